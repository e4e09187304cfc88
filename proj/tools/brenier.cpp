// Command-line front end: good-function checks, conjugates, transport
// solves, bound suites and far-field probes.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "brenier/conjugate.hpp"
#include "brenier/error.hpp"
#include "brenier/increments.hpp"
#include "brenier/io.hpp"
#include "brenier/transport.hpp"
#include "brenier/verify.hpp"

using namespace brenier;

namespace {

Json tally_json(const PropertyTally& t) {
    return Json{{"tested", t.tested}, {"passed", t.passed}};
}

int check_good(const std::string& path, int trials, std::uint64_t seed) {
    GoodFunction f = good_function_from_json(read_json_file(path));
    GoodnessReport rep = check_goodness(f, trials, seed);
    Json out{{"f", f.name()},
             {"dim", f.dim()},
             {"certified", f.certified()},
             {"seed", seed},
             {"convexity", tally_json(rep.convexity)},
             {"monotonicity", tally_json(rep.monotonicity)},
             {"positivity", tally_json(rep.positivity)},
             {"homogeneity", tally_json(rep.homogeneity)},
             {"good", rep.all_passed()}};
    if (rep.all_passed()) {
        try {
            out["beta_min"] = beta_min(f);
            PdSubgradient e = construct_pd_subgradient(f);
            out["pd_subgradient"] = Json{{"steps", e.steps}, {"min_eigenvalue", e.matrix.min_eigenvalue()}};
        } catch (const GoodnessViolation& e) {
            out["good"] = false;
            out["violation"] = e.what();
        }
    }
    std::cout << out.dump(2) << "\n";
    return out["good"].get<bool>() ? 0 : 1;
}

int conjugate(const std::string& path, const std::string& out, bool refine) {
    Json j = read_json_file(path);
    if (!j.contains("potential") || !j.contains("primal_grid") || !j.contains("dual_grid"))
        throw ConfigError(path + ": expected {potential, primal_grid, dual_grid}");
    Potential w = potential_from_json(j["potential"]);
    ConjugateGrids grids{grid_from_json(j["primal_grid"]), grid_from_json(j["dual_grid"])};
    ConjugateOptions opts;
    opts.refine = refine;
    Conjugate c = legendre_transform(w, grids, opts);
    save_grid_field(out + ".bgf", c.field);
    std::ofstream csv(out + ".csv");
    write_grid_field_csv(csv, c.field);
    Json summary{{"refined", c.refined},
                 {"refine_failures", c.refine_failures},
                 {"involution_gap", conjugate_involution_gap(w, grids, refine)},
                 {"files", {out + ".bgf", out + ".csv"}}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int solve(const std::string& path, const std::string& out) {
    ProblemEntry e = problem_from_json(read_json_file(path));
    BrenierSolution sol = solve_transport(e.problem);
    ResidualReport res = monge_ampere_residual(sol, e.problem);
    if (!out.empty()) save_solution(out, sol);
    Json summary{{"problem", e.id},
                 {"solver", to_json(sol.meta)},
                 {"monge_ampere_residual", Json{{"sup", res.sup}, {"l2", res.l2}, {"evaluated", res.evaluated}}}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int verify(const std::string& path, const std::string& report_dir) {
    SuiteOutcome o = run_suite(path, report_dir);
    for (const auto& r : o.reports)
        std::cout << r.problem_id << " " << r.f_name << " ratio=" << r.ratio << " margin=" << r.margins.total << " "
                  << verdict_name(r.verdict) << "\n";
    for (const auto& s : o.skipped) std::cerr << "skipped: " << s << "\n";
    for (const auto& w : o.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& e : o.errors) std::cerr << "error: " << e << "\n";
    return o.exit_code;
}

int decay_probe(const std::string& path, double j, std::vector<double> radii, const std::string& out) {
    ProblemEntry e = problem_from_json(read_json_file(path));
    if (radii.empty()) {
        double reach = kInf;
        const Box& b = e.problem.mu_grid.box();
        for (int a = 0; a < b.dim; ++a) reach = std::min({reach, -b.low[a], b.high[a]});
        for (double f : {0.3, 0.45, 0.6, 0.75, 0.9}) radii.push_back(f * reach);
    }
    BrenierSolution sol = solve_transport(e.problem);
    DecayReport rep = far_field_decay_probe(sol, j, radii);
    if (out.empty()) {
        write_decay_csv(std::cout, rep);
    } else {
        std::ofstream os(out);
        write_decay_csv(os, rep);
    }
    std::cerr << "radial decreasing: " << (rep.radial_decreasing ? "yes" : "no")
              << ", angular decreasing: " << (rep.angular_decreasing ? "yes" : "no") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hessian bounds for Brenier maps: checks, solvers and verification suites"};
    app.require_subcommand(1);
    std::uint64_t seed = 1;
    app.add_option("--seed", seed, "Seed for randomized checks")->capture_default_str();

    std::string path, out, report_dir;
    int trials = 2000;
    bool no_refine = false;
    double j = 0.0;
    std::vector<double> radii;

    auto* good = app.add_subcommand("check-good", "Probe the good-function axioms of a JSON spec");
    good->add_option("spec", path, "Good function JSON")->required()->check(CLI::ExistingFile);
    good->add_option("--trials", trials, "Random trials per property")->capture_default_str();
    good->add_option("--seed", seed, "Seed for randomized checks");

    auto* conj = app.add_subcommand("conjugate", "Legendre transform of a potential on a grid");
    conj->add_option("potential", path, "JSON with potential, primal_grid and dual_grid")
        ->required()
        ->check(CLI::ExistingFile);
    conj->add_option("--out", out, "Output stem for .bgf and .csv")->required();
    conj->add_flag("--no-refine", no_refine, "Skip the Newton polish");

    auto* sol = app.add_subcommand("solve", "Solve a transport problem");
    sol->add_option("problem", path, "Problem JSON")->required()->check(CLI::ExistingFile);
    sol->add_option("--out", out, "Output stem for potential, map and diagnostics");

    auto* ver = app.add_subcommand("verify", "Run a bound-verification suite");
    ver->add_option("suite", path, "Suite TOML")->required();
    ver->add_option("--report-dir", report_dir, "Overrides suite.report_dir");

    auto* dec = app.add_subcommand("decay-probe", "Far-field behaviour of T for a bounded target");
    dec->add_option("problem", path, "Problem JSON")->required()->check(CLI::ExistingFile);
    dec->add_option("--j", j, "Support radius of the target")->required();
    dec->add_option("--radii", radii, "Probe radii (default: spread over the grid)");
    dec->add_option("--out", out, "CSV output (default: stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*good) return check_good(path, trials, seed);
        if (*conj) return conjugate(path, out, !no_refine);
        if (*sol) return solve(path, out);
        if (*ver) return verify(path, report_dir);
        if (*dec) return decay_probe(path, j, radii, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
