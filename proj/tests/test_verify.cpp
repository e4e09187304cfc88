#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "brenier/error.hpp"
#include "brenier/io.hpp"
#include "brenier/verify.hpp"

using namespace brenier;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("brenier_verify_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("bootstrap recurrence follows (n + 2) / (n + 1)") {
    CHECK(bootstrap_recurrence(0) == 2.0);
    CHECK(bootstrap_recurrence(1) == 1.5);
    CHECK(std::abs(bootstrap_recurrence(100) - 102.0 / 101.0) <= 1e-15);
    double prev = bootstrap_recurrence(0);
    for (int n = 1; n <= 1000; ++n) {
        double a = bootstrap_recurrence(n);
        CHECK(a < prev);
        CHECK(a > 1.0);
        CHECK(std::abs(a - double(n + 2) / double(n + 1)) <= 1e-13);
        prev = a;
    }
    CHECK_THROWS_AS(bootstrap_recurrence(-1), ContractViolation);
}

TEST_CASE("verdicts from ratio and relative margin") {
    CHECK(classify(1.0, 1e-6) == Verdict::Saturated);
    CHECK(classify(0.9995, 1e-3) == Verdict::Saturated);
    CHECK(classify(0.9, 1e-3) == Verdict::Satisfied);
    CHECK(classify(1.01, 1e-3) == Verdict::Violated);
    CHECK(classify(1.01, 0.1) == Verdict::ViolatedWithinMargin);
    // Small margins never downgrade an excess to a warning.
    CHECK(classify(1.0005, 0.001) == Verdict::Saturated);
    CHECK(classify(1.02, 0.03) == Verdict::Saturated);
    CHECK(std::string(verdict_name(Verdict::ViolatedWithinMargin)) == "ViolatedWithinMargin");
}

TEST_CASE("primal constants of gaussian and cosine-perturbed potentials") {
    auto v1 = Potential::isotropic_gaussian(1, 1.0);
    auto e = estimate_primal_constant(v1, GoodFunction::trace(1), GridSpec::cube(1, -6, 6, 121));
    CHECK(e.value == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(e.margin == 0.0);

    auto v2 = Potential::isotropic_gaussian(2, 1.0);
    e = estimate_primal_constant(v2, GoodFunction::lambda_max(2), GridSpec::cube(2, -4, 4, 41));
    CHECK(e.value == doctest::Approx(1.0).epsilon(1e-14));

    // alpha = 2: Hess V = Id / 4.
    e = estimate_primal_constant(Potential::isotropic_gaussian(2, 2.0), GoodFunction::trace(2), GridSpec::cube(2, -8, 8, 41));
    CHECK(e.value == doctest::Approx(0.5).epsilon(1e-14));

    // V = |x|^2/2 + 0.1 cos x1: Hess V = Id - 0.1 cos(x1) e1 e1^T, largest at
    // x1 = pi, where the trace is 2.1 and lambda_max is 1.1. Nodes sit on
    // multiples of pi/2.
    auto vc = Potential::quadratic(SymMatrix::identity(2)).with_perturbation(Perturbation::CosX1, 0.1);
    GridSpec on_pi = GridSpec::cube(2, -2 * std::numbers::pi, 2 * std::numbers::pi, 9);
    CHECK(std::abs(estimate_primal_constant(vc, GoodFunction::trace(2), on_pi).value - 2.1) <= 1e-6);
    CHECK(std::abs(estimate_primal_constant(vc, GoodFunction::lambda_max(2), on_pi).value - 1.1) <= 1e-6);

    // Off the maximizer the margin still covers the supremum.
    GridSpec off = GridSpec::cube(2, -4, 4, 41);
    auto eo = estimate_primal_constant(vc, GoodFunction::trace(2), off);
    CHECK(eo.value < 2.1);
    CHECK(eo.value + eo.margin >= 2.1);
    CHECK(eo.margin <= 1e-2);

    // Sampled quadratic: finite differences are exact.
    GridSpec g = GridSpec::cube(2, -3, 3, 31);
    auto q = Potential::quadratic(SymMatrix::diagonal({1.0, 3.0}));
    auto vg = Potential::grid(q.sample(g), true);
    auto eg = estimate_primal_constant(vg, GoodFunction::lambda_max(2), g);
    CHECK(eg.value == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(eg.margin <= 1e-9);
}

TEST_CASE("1D sharp gaussian pair saturates the bound") {
    auto entry = registry_entry("gauss_1d_a1_b2");
    for (auto f : {GoodFunction::trace(1), GoodFunction::lambda_max(1), GoodFunction::pnorm_positive(1, 2)}) {
        auto r = verify_bound(entry, f);
        CHECK(r.lambda_v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.inv_lambda_w == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(r.bound * r.bound == doctest::Approx(r.lambda_v * r.inv_lambda_w).epsilon(1e-14));
        // T(x) = beta x / alpha = 2x.
        CHECK(std::abs(r.ratio - 1.0) <= 1e-3);
        CHECK(r.verdict == Verdict::Saturated);
        REQUIRE(r.exact_sup);
        CHECK(*r.exact_sup == doctest::Approx(2.0));
    }
}

TEST_CASE("mu = nu saturates with sup f(Id)") {
    auto prepared = prepare_problem(registry_entry("gauss_1d_a1_b1"));
    auto r = assess(prepared, GoodFunction::trace(1));
    CHECK(r.sup == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.bound == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.verdict == Verdict::Saturated);
}

TEST_CASE("compact target is satisfied with the truncated-gaussian slope") {
    auto r = verify_bound(registry_entry("compact_1d"), GoodFunction::trace(1));
    CHECK(r.verdict == Verdict::Satisfied);
    CHECK(r.ratio < 1.0);
    // For N(0,1) onto N(0,1) restricted to [-1, 1], T' peaks at 0 with value
    // P(|Z| <= 1); the 0.1 mollification changes it by O(t^2).
    double slope = std::erf(1.0 / std::sqrt(2.0));
    CHECK(std::abs(r.sup - slope) <= 1e-3);
    CHECK(r.inv_lambda_w == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("non-affine entries stay below the bound") {
    for (const char* id : {"quartic_1d", "cosine_1d"}) {
        auto prepared = prepare_problem(registry_entry(id));
        for (auto f : {GoodFunction::trace(1), GoodFunction::lambda_max(1)}) {
            auto r = assess(prepared, f);
            CHECK(r.verdict == Verdict::Satisfied);
            CHECK(r.ratio < 1.0);
        }
    }
    auto r = verify_bound(registry_entry("cosine_1d"), GoodFunction::trace(1));
    CHECK(r.lambda_v == doctest::Approx(1.3).epsilon(1e-6));
}

TEST_CASE("ratio approaches 1 under grid refinement") {
    for (const char* id : {"gauss_1d_a1_b2", "gauss_2d_a1_b2"}) {
        double prev_gap = 1.0;
        for (double s : {0.25, 0.5, 1.0}) {
            auto r = verify_bound(registry_entry(id, s), GoodFunction::trace(registry_entry(id).dim()));
            double gap = std::abs(r.ratio - 1.0);
            CHECK(gap <= prev_gap + 1e-3);
            CHECK(r.verdict != Verdict::Violated);
            prev_gap = gap;
        }
        CHECK(prev_gap <= 1e-3);
    }
}

TEST_CASE("trace sup dominates lambda_max sup on the same solution") {
    auto prepared = prepare_problem(registry_entry("gauss_aniso_2d", 0.5));
    auto tr = assess(prepared, GoodFunction::trace(2));
    auto lm = assess(prepared, GoodFunction::lambda_max(2));
    auto s2 = assess(prepared, GoodFunction::sum_top_k(2, 2));
    CHECK(tr.sup >= lm.sup);
    CHECK(s2.sup == doctest::Approx(tr.sup).epsilon(1e-12));
    for (std::size_t i = 0; i < prepared.solution.grid.size(); ++i)
        if (prepared.solution.admissible(i) && prepared.solution.hessian[i]->is_psd())
            CHECK(prepared.solution.hessian[i]->trace() >= prepared.solution.hessian[i]->max_eigenvalue());
}

TEST_CASE("stage failures carry the stage name") {
    auto entry = registry_entry("gauss_1d_a1_b2");
    // Dual nodes whose maximizer would sit beyond the primal grid.
    entry.dual_grids.dual = GridSpec::cube(1, -20, 20, 401);
    try {
        verify_bound(entry, GoodFunction::trace(1));
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "dual-constant");
    }
    CHECK_THROWS_AS(registry_entry("no_such_problem"), ConfigError);
}

TEST_CASE("anisotropic reduction with Y = Id leaves the problem unchanged") {
    auto rep = verify_anisotropic_reduction(registry_entry("gauss_2d_a1_b2", 0.6), SymMatrix::identity(2));
    CHECK(rep.compared > 100);
    CHECK(rep.hessian_gap <= 1e-12);
    CHECK(rep.potential_gap <= 1e-12);
    CHECK(rep.original.sup == doctest::Approx(rep.transformed.sup).epsilon(1e-12));
}

TEST_CASE("anisotropic reduction for diag(4, 1) and its rotation") {
    auto entry = registry_entry("gauss_2d_a1_b2");
    // T = (beta / alpha) x, so <Hess phi, Y> = 2 Tr Y = 10 everywhere.
    auto diag = verify_anisotropic_reduction(entry, SymMatrix::diagonal({4.0, 1.0}));
    CHECK(std::abs(diag.laplacian_mean - 10.0) <= 0.2);
    CHECK(diag.laplacian_spread <= 0.02);
    CHECK(diag.hessian_gap <= 0.02);
    CHECK(diag.potential_gap <= 1e-12);
    // Both directions of the reduction report the same bound and ratio.
    CHECK(diag.original.bound == doctest::Approx(diag.transformed.bound).epsilon(1e-9));
    double tol = diag.original.margins.total + diag.transformed.margins.total + 2e-3;
    CHECK(std::abs(diag.original.ratio - diag.transformed.ratio) <= tol);

    const double c = std::cos(0.5), s = std::sin(0.5);
    Matrix r(2, 2);
    r << c, -s, s, c;
    SymMatrix rotated(r * SymMatrix::diagonal({4.0, 1.0}).dense() * r.transpose());
    auto rot = verify_anisotropic_reduction(entry, rotated);
    CHECK(std::abs(rot.laplacian_mean - diag.laplacian_mean) <= 0.02 * diag.laplacian_mean);
    CHECK(std::abs(rot.original.sup - diag.original.sup) <= 1e-9 * diag.original.sup + 1e-3);
    CHECK(rot.original.bound == doctest::Approx(diag.original.bound).epsilon(1e-9));
    CHECK(rot.potential_gap <= 1e-12);

    CHECK_THROWS_AS(verify_anisotropic_reduction(registry_entry("gauss_1d_a1_b2"), SymMatrix::identity(1)),
                    ContractViolation);
}

TEST_CASE("run_suite writes reports and a summary") {
    auto dir = scratch_dir("ok");
    auto cfg = write_file(dir / "suite.toml", R"(
[suite]
name = "small"
problems = ["gauss_1d_a1_b2", "compact_1d"]
functions = ["trace", "lambda_max", "S_2", "N_2"]
report_dir = "unused"
threads = 2
)");
    auto out = run_suite(cfg.string(), (dir / "reports").string());
    CHECK(out.exit_code == 0);
    CHECK(out.errors.empty());
    CHECK(out.reports.size() == 6);
    CHECK(out.skipped.size() == 2);  // S_2 needs d >= 2
    CHECK(fs::exists(dir / "reports" / "summary.csv"));
    CHECK(fs::exists(dir / "reports" / "gauss_1d_a1_b2__trace.json"));
    CHECK(fs::exists(dir / "reports" / "compact_1d__pnorm_positive_2.json"));
    auto j = read_json_file((dir / "reports" / "gauss_1d_a1_b2__trace.json").string());
    CHECK(j["verdict"] == "Saturated");
    CHECK(j["suite"] == "small");
    std::string csv = slurp(dir / "reports" / "summary.csv");
    CHECK(csv.rfind("problem,f,lambda_v,inv_lambda_w,bound,sup,ratio,margin,verdict,seconds\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("run_suite on an under-resolved grid widens the margins") {
    auto dir = scratch_dir("coarse");
    auto make = [&](const std::string& scale) {
        return write_file(dir / ("suite_" + scale + ".toml"), "[suite]\nproblems = [\"gauss_2d_a1_b2\"]\n"
                                                               "functions = [\"trace\"]\nreport_dir = \"" +
                                                                   (dir / scale).string() + "\"\n[solver]\ngrid_scale = " +
                                                                   scale + "\n");
    };
    auto coarse = run_suite(make("0.25").string());
    auto fine = run_suite(make("0.5").string());
    CHECK(coarse.exit_code == 0);
    REQUIRE(coarse.reports.size() == 1);
    REQUIRE(fine.reports.size() == 1);
    CHECK(coarse.reports[0].verdict != Verdict::Violated);
    CHECK(coarse.reports[0].margins.total > fine.reports[0].margins.total);
    CHECK(coarse.reports[0].margins.total > 0.01);
}

TEST_CASE("run_suite reports configuration errors with exit code 2") {
    auto dir = scratch_dir("bad");
    auto syntax = run_suite(write_file(dir / "a.toml", "[suite]\nproblems = [\"gauss_1d_a1_b2\"\n").string());
    CHECK(syntax.exit_code == 2);
    REQUIRE(syntax.errors.size() == 1);
    CHECK(syntax.errors[0].find("a.toml:") != std::string::npos);

    auto unknown = run_suite(write_file(dir / "b.toml", "[suite]\n\nproblems = [\"nope\"]\n").string());
    CHECK(unknown.exit_code == 2);
    REQUIRE(unknown.errors.size() == 1);
    CHECK(unknown.errors[0].find("line 3") != std::string::npos);
    CHECK(unknown.errors[0].find("suite.problems[0]") != std::string::npos);

    auto field = run_suite(write_file(dir / "c.toml", "[suite]\nproblems = \"all\"\n[solver]\ngrid_scale = \"x\"\n").string());
    CHECK(field.exit_code == 2);
    CHECK(field.errors[0].find("solver.grid_scale") != std::string::npos);

    auto fn = run_suite(write_file(dir / "d.toml", "[suite]\nproblems = [\"compact_1d\"]\nfunctions = [\"det\"]\n").string());
    CHECK(fn.exit_code == 2);
    CHECK(fn.errors[0].find("suite.functions[0]") != std::string::npos);

    CHECK(run_suite((dir / "missing.toml").string()).exit_code == 2);
}
