#include "brenier/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "toml.hpp"

#include "brenier/approx.hpp"
#include "brenier/error.hpp"
#include "brenier/io.hpp"

namespace brenier {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Saturated: return "Saturated";
        case Verdict::Satisfied: return "Satisfied";
        case Verdict::ViolatedWithinMargin: return "ViolatedWithinMargin";
        case Verdict::Violated: return "Violated";
    }
    return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Keeps n - 1 even so 0 stays a node of symmetric boxes.
std::size_t scaled(std::size_t n, double s) {
    long half = std::lround(double(n - 1) * s / 2.0);
    return std::size_t(std::max(2L, half) * 2 + 1);
}

GridSpec box_grid(int dim, std::array<double, 3> half, std::array<std::size_t, 3> n, double s) {
    Box b;
    b.dim = dim;
    std::array<std::size_t, 3> m{1, 1, 1};
    for (int a = 0; a < dim; ++a) {
        b.low[a] = -half[a];
        b.high[a] = half[a];
        m[a] = scaled(n[a], s);
    }
    return GridSpec(b, m);
}

GridSpec cube_grid(int dim, double half, std::size_t n, double s) {
    return box_grid(dim, {half, half, half}, {n, n, n}, s);
}

ProblemEntry gaussian_pair(const std::string& id, int dim, double alpha, double beta, double s) {
    ProblemEntry e;
    e.id = id;
    std::ostringstream os;
    os << "N(0, " << alpha * alpha << " Id) -> N(0, " << beta * beta << " Id) in d=" << dim;
    e.description = os.str();
    auto& p = e.problem;
    p.mu = Potential::isotropic_gaussian(dim, alpha);
    p.nu = Potential::isotropic_gaussian(dim, beta);
    if (dim == 1) {
        p.solver = SolverKind::Quantile1D;
        p.mu_grid = cube_grid(1, 8 * alpha, 4001, s);
        p.nu_grid = cube_grid(1, 8 * beta, 4001, s);
        e.dual_grids = {p.nu_grid, cube_grid(1, 4 / beta, 801, s)};
    } else {
        p.solver = SolverKind::Entropic;
        p.mu_grid = cube_grid(dim, 6 * alpha, 101, s);
        p.nu_grid = cube_grid(dim, 6 * beta, 121, s);
        e.dual_grids = {p.nu_grid, cube_grid(dim, 3 / beta, 61, s)};
    }
    e.map_matrix = Matrix::Identity(dim, dim) * (beta / alpha);
    e.map_shift = Vector::Zero(dim);
    e.tags = {"gaussian", beta == alpha ? "identity" : "sharp"};
    return e;
}

ProblemEntry anisotropic_target(double s) {
    ProblemEntry e;
    e.id = "gauss_aniso_2d";
    e.description = "N(0, Id) -> N(0, diag(4, 1)) in d=2";
    auto& p = e.problem;
    SymMatrix cov = SymMatrix::diagonal({4.0, 1.0});
    p.mu = Potential::isotropic_gaussian(2, 1.0);
    p.nu = Potential::gaussian(Vector::Zero(2), cov);
    p.mu_grid = cube_grid(2, 6, 101, s);
    p.nu_grid = box_grid(2, {12, 6, 0}, {121, 121, 1}, s);
    e.dual_grids = {p.nu_grid, cube_grid(2, 2.5, 51, s)};
    e.map_matrix = cov.sqrt().dense();
    e.map_shift = Vector::Zero(2);
    e.tags = {"gaussian", "anisotropic"};
    return e;
}

// nu: N(0, Id) mollified at scale 0.1 and restricted to the unit ball.
ProblemEntry compact_target(int dim, double s) {
    ProblemEntry e;
    e.id = dim == 1 ? "compact_1d" : "compact_2d";
    e.description = "N(0, Id) -> mollified N(0, Id) truncated to |y| <= 1 in d=" + std::to_string(dim);
    auto& p = e.problem;
    p.mu = Potential::isotropic_gaussian(dim, 1.0);
    if (dim == 1) {
        p.solver = SolverKind::Quantile1D;
        p.mu_grid = cube_grid(1, 5, 2001, s);
        p.nu_grid = cube_grid(1, 1.2, 2401, s);
        e.dual_grids = {p.nu_grid, cube_grid(1, 2, 801, s)};
    } else {
        p.solver = SolverKind::Entropic;
        p.mu_grid = cube_grid(2, 4, 121, s);
        p.nu_grid = cube_grid(2, 1.2, 81, s);
        e.dual_grids = {p.nu_grid, cube_grid(2, 2, 81, s)};
    }
    Mollifier m = Mollifier::bump(p.nu_grid, std::max(0.1, p.nu_grid.h(0)));
    p.nu = truncate_and_mollify_w(Potential::isotropic_gaussian(dim, 1.0), m, 1.0, p.nu_grid).potential;
    e.support_radius = 1.0;
    e.tags = {"compact"};
    return e;
}

ProblemEntry quartic_target(double s) {
    ProblemEntry e;
    e.id = "quartic_1d";
    e.description = "N(0, 1) -> e^-(y^2/2 + 0.1 y^4/4)";
    auto& p = e.problem;
    p.solver = SolverKind::Quantile1D;
    p.mu = Potential::isotropic_gaussian(1, 1.0);
    p.nu = Potential::quadratic(SymMatrix::identity(1)).with_perturbation(Perturbation::Quartic, 0.1);
    p.mu_grid = cube_grid(1, 8, 4001, s);
    p.nu_grid = cube_grid(1, 6, 4001, s);
    e.dual_grids = {p.nu_grid, cube_grid(1, 10, 801, s)};
    e.tags = {"non-affine"};
    return e;
}

ProblemEntry cosine_source(double s) {
    ProblemEntry e;
    e.id = "cosine_1d";
    e.description = "e^-(x^2/2 + 0.3 cos x) -> N(0, 1)";
    auto& p = e.problem;
    p.solver = SolverKind::Quantile1D;
    p.mu = Potential::quadratic(SymMatrix::identity(1)).with_perturbation(Perturbation::CosX1, 0.3);
    p.nu = Potential::isotropic_gaussian(1, 1.0);
    p.mu_grid = cube_grid(1, 8, 4001, s);
    p.nu_grid = cube_grid(1, 8, 4001, s);
    e.dual_grids = {p.nu_grid, cube_grid(1, 4, 801, s)};
    e.tags = {"non-affine"};
    return e;
}

const std::map<std::string, std::function<ProblemEntry(double)>>& registry() {
    static const std::map<std::string, std::function<ProblemEntry(double)>> r = {
        {"gauss_1d_a1_b2", [](double s) { return gaussian_pair("gauss_1d_a1_b2", 1, 1, 2, s); }},
        {"gauss_1d_a2_b1", [](double s) { return gaussian_pair("gauss_1d_a2_b1", 1, 2, 1, s); }},
        {"gauss_1d_a1_b1", [](double s) { return gaussian_pair("gauss_1d_a1_b1", 1, 1, 1, s); }},
        {"gauss_2d_a1_b2", [](double s) { return gaussian_pair("gauss_2d_a1_b2", 2, 1, 2, s); }},
        {"gauss_2d_a2_b1", [](double s) { return gaussian_pair("gauss_2d_a2_b1", 2, 2, 1, s); }},
        {"gauss_aniso_2d", anisotropic_target},
        {"compact_1d", [](double s) { return compact_target(1, s); }},
        {"compact_2d", [](double s) { return compact_target(2, s); }},
        {"quartic_1d", quartic_target},
        {"cosine_1d", cosine_source},
    };
    return r;
}

template <class F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

void apply(const SolverConfig& cfg, TransportProblem& p) {
    if (cfg.max_iters) p.entropic.max_iters = *cfg.max_iters;
    if (cfg.tol) p.entropic.tol = *cfg.tol;
    if (cfg.relaxation) p.entropic.relaxation = *cfg.relaxation;
    if (cfg.epsilons) p.entropic.epsilons = *cfg.epsilons;
}

GridSpec halve(const GridSpec& g) {
    std::array<std::size_t, 3> n{1, 1, 1};
    for (int a = 0; a < g.dim(); ++a) n[a] = (g.n(a) - 1) / 2 + 1;
    return GridSpec(g.box(), n);
}

// Bounding box of M * box, same node counts.
GridSpec mapped_grid(const GridSpec& g, const Matrix& m) {
    const int d = g.dim();
    Box b;
    b.dim = d;
    for (int a = 0; a < d; ++a) {
        b.low[a] = kInf;
        b.high[a] = -kInf;
    }
    for (int corner = 0; corner < (1 << d); ++corner) {
        Vector c(d);
        for (int a = 0; a < d; ++a) c(a) = (corner >> a) & 1 ? g.box().high[a] : g.box().low[a];
        Vector y = m * c;
        for (int a = 0; a < d; ++a) {
            b.low[a] = std::min(b.low[a], y(a));
            b.high[a] = std::max(b.high[a], y(a));
        }
    }
    return GridSpec(b, g.shape());
}

}  // namespace

const std::vector<std::string>& registry_ids() {
    static const std::vector<std::string> ids = {"gauss_1d_a1_b2", "gauss_1d_a2_b1", "gauss_1d_a1_b1",
                                                 "gauss_2d_a1_b2", "gauss_2d_a2_b1", "gauss_aniso_2d",
                                                 "compact_1d",     "compact_2d",     "quartic_1d",
                                                 "cosine_1d"};
    return ids;
}

ProblemEntry registry_entry(const std::string& id, double scale) {
    require(scale > 0.0, "registry_entry: scale must be positive");
    auto it = registry().find(id);
    if (it == registry().end()) throw ConfigError("unknown problem id '" + id + "'");
    return it->second(scale);
}

ConstantEstimate estimate_primal_constant(const Potential& v, const GoodFunction& f, const GridSpec& grid) {
    require(v.dim() == grid.dim() && f.dim() == grid.dim(), "estimate_primal_constant: dimension mismatch");
    ConstantEstimate est;
    est.value = -kInf;
    for (int a = 0; a < grid.dim(); ++a) est.h = std::max(est.h, grid.h(a));

    if (v.form() != Potential::Form::Grid && v.smooth()) {
        // Closed-form Hessians at the nodes; the margin bounds how far the
        // supremum between nodes can exceed the nodal one.
        std::vector<double> g(grid.size(), kInf);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            Vector x = grid.point(i);
            if (!v.in_support(x) || !std::isfinite(v.value(x))) {
                if (grid.interior(i)) ++est.skipped;
                continue;
            }
            g[i] = eval_good(f, v.hessian(x));
            if (!grid.interior(i)) continue;
            ++est.nodes;
            if (g[i] > est.value) {
                est.value = g[i];
                est.argmax = x;
            }
        }
        double curv = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!grid.interior(i) || g[i] == kInf) continue;
            double sum = 0.0;
            for (int a = 0; a < grid.dim(); ++a) {
                double lo = g[i - grid.stride(a)], hi = g[i + grid.stride(a)];
                if (lo == kInf || hi == kInf) continue;
                sum += std::abs(lo - 2 * g[i] + hi);
            }
            curv = std::max(curv, sum);
        }
        est.margin = curv / 8.0;
    } else {
        GridField field = v.form() == Potential::Form::Grid && v.field().spec() == grid ? v.field() : v.sample(grid);
        double upper = -kInf;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!grid.interior(i)) continue;
            if (!field.hessian_stencil_ok(i)) {
                ++est.skipped;
                continue;
            }
            double val = eval_good(f, field.hessian_fd(i));
            ++est.nodes;
            double unc = field.hessian_stencil_ok(i, 2) ? std::abs(val - eval_good(f, field.hessian_fd(i, 2))) / 3.0
                                                        : 0.0;
            if (val > est.value) {
                est.value = val;
                est.argmax = grid.point(i);
            }
            upper = std::max(upper, val + unc);
        }
        est.margin = est.nodes ? upper - est.value : 0.0;
    }
    if (est.nodes == 0) throw DegenerateSolution("estimate_primal_constant: no admissible node");
    return est;
}

PreparedProblem prepare_problem(const ProblemEntry& entry, const SolverConfig& cfg) {
    auto t0 = Clock::now();
    PreparedProblem out;
    out.entry = entry;
    apply(cfg, out.entry.problem);
    const TransportProblem& p = out.entry.problem;
    out.solution = staged("solve", [&] { return solve_transport(p); });
    if (p.solver == SolverKind::Quantile1D) {
        TransportProblem q = p;
        q.mu_grid = halve(p.mu_grid);
        q.nu_grid = halve(p.nu_grid);
        out.coarse = staged("solve", [&] { return solve_transport(q); });
    }
    staged("dual-constant", [&] {
        ConjugateOptions opts;
        opts.refine = cfg.refine_conjugate;
        out.dual = legendre_transform(p.nu, out.entry.dual_grids, opts);
        if (!out.dual.refined || out.dual.refine_failures > 0)
            out.lft_margin = unrefined_conjugate_margin(p.nu, out.entry.dual_grids);
        return 0;
    });
    out.seconds = seconds_since(t0);
    return out;
}

Verdict classify(double ratio, double margin) {
    if (ratio > 1.0 + margin) return Verdict::Violated;
    if (ratio > 1.0 && margin > 0.05) return Verdict::ViolatedWithinMargin;
    if (std::abs(ratio - 1.0) <= margin) return Verdict::Saturated;
    return Verdict::Satisfied;
}

BoundReport assess(const PreparedProblem& prepared, const GoodFunction& f) {
    auto t0 = Clock::now();
    const TransportProblem& p = prepared.entry.problem;
    require(f.dim() == p.dim(), "assess: good function dimension does not match the problem");
    BoundReport r;
    r.problem_id = prepared.entry.id;
    r.f_name = f.name();
    r.solver = prepared.solution.meta;

    auto lv = staged("primal-constant", [&] { return estimate_primal_constant(p.mu, f, p.mu_grid); });
    auto iw = staged("dual-constant",
                     [&] { return estimate_dual_constant(prepared.dual, f, lipschitz_bound(f) * prepared.lft_margin); });
    if (!(lv.value > 0.0) || !std::isfinite(lv.value))
        throw StageError("primal-constant", "Lambda_V is not finite and positive");
    if (!(iw.value > 0.0) || !std::isfinite(iw.value))
        throw StageError("dual-constant", "1/lambda_W is not finite and positive");
    auto sup = staged("hessian-sup", [&] { return sup_good_hessian(prepared.solution, f); });

    r.lambda_v = lv.value;
    r.inv_lambda_w = iw.value;
    r.bound = std::sqrt(lv.value * iw.value);
    r.sup = sup.value;
    r.ratio = sup.value / r.bound;
    r.argmax = sup.point;

    Margins& m = r.margins;
    m.lambda_v = lv.margin;
    m.inv_lambda_w = iw.margin;
    m.sup_stencil = sup.stencil_margin;
    m.sup_extrapolation = sup.extrapolation_margin;
    if (prepared.coarse) {
        auto coarse = staged("hessian-sup", [&] { return sup_good_hessian(*prepared.coarse, f); });
        m.sup_resolution = std::abs(sup.value - coarse.value) / 3.0;
    }
    m.marginal = prepared.solution.meta.marginal_error;
    double scale = std::max(std::abs(sup.value), 1e-300);
    m.total = (m.sup_stencil + m.sup_extrapolation + m.sup_resolution) / scale + 0.5 * m.lambda_v / lv.value +
              0.5 * m.inv_lambda_w / iw.value + m.marginal;
    m.total = std::max(m.total, 1e-6);
    r.verdict = classify(r.ratio, m.total);

    if (prepared.entry.map_matrix) r.exact_sup = eval_good(f, SymMatrix(*prepared.entry.map_matrix));
    r.seconds = prepared.seconds + seconds_since(t0);
    return r;
}

BoundReport verify_bound(const ProblemEntry& entry, const GoodFunction& f, const SolverConfig& cfg) {
    return assess(prepare_problem(entry, cfg), f);
}

AnisotropicReport verify_anisotropic_reduction(const ProblemEntry& entry, const SymMatrix& y,
                                               const SolverConfig& cfg) {
    require(entry.dim() == 2 && y.dim() == 2, "verify_anisotropic_reduction: d = 2 only");
    require(y.min_eigenvalue() > 0.0, "verify_anisotropic_reduction: Y must be positive definite");
    const TransportProblem& p = entry.problem;
    SymMatrix a = y.sqrt();
    Matrix ad = a.dense();
    Matrix ainv = a.inverse().dense();
    double logdet = 0.5 * std::log(y.eigenvalues().prod());

    ProblemEntry te;
    te.id = entry.id + "/A";
    te.description = "A-transformed " + entry.id;
    TransportProblem& tp = te.problem;
    tp = p;
    tp.mu = p.mu.compose_linear(ad, Vector::Zero(2), -logdet);
    tp.nu = p.nu.compose_linear(ainv, Vector::Zero(2), logdet);
    tp.mu_grid = mapped_grid(p.mu_grid, ainv);
    tp.nu_grid = mapped_grid(p.nu_grid, ad);
    // A maps the new dual box into the old one.
    double c = kInf;
    for (int k = 0; k < 2; ++k)
        c = std::min({c, -entry.dual_grids.dual.box().low[k], entry.dual_grids.dual.box().high[k]});
    c /= a.max_eigenvalue();
    te.dual_grids = {tp.nu_grid, GridSpec(Box::cube(2, -c, c), entry.dual_grids.dual.shape())};
    if (entry.map_matrix) {
        te.map_matrix = ad * *entry.map_matrix * ad;
        te.map_shift = Vector::Zero(2);
    }

    PreparedProblem orig = prepare_problem(entry, cfg);
    PreparedProblem trans = prepare_problem(te, cfg);

    AnisotropicReport rep;
    rep.y = y;
    double lo = kInf, hi = -kInf, sum = 0.0;
    const BrenierSolution& so = orig.solution;
    const BrenierSolution& st = trans.solution;
    const bool analytic_v = p.mu.form() == Potential::Form::Analytic;
    for (std::size_t i = 0; i < st.grid.size(); ++i) {
        if (!st.admissible(i)) continue;
        Vector x = st.grid.point(i);
        Vector ax = ad * x;
        if (!so.central.contains(ax)) continue;
        auto h = interpolate_matrix(so.grid, so.hessian, ax);
        if (!h) continue;
        double target = inner(*h, y);
        double lap = st.hessian[i]->trace();
        rep.hessian_gap = std::max(rep.hessian_gap, std::abs(lap - target) / (1.0 + std::abs(target)));
        if (analytic_v)
            rep.potential_gap =
                std::max(rep.potential_gap, std::abs(tp.mu.hessian(x).trace() - inner(p.mu.hessian(ax), y)));
        lo = std::min(lo, lap);
        hi = std::max(hi, lap);
        sum += lap;
        ++rep.compared;
    }
    if (rep.compared == 0) throw RangeError("verify_anisotropic_reduction: transformed grid misses the original");
    rep.laplacian_mean = sum / double(rep.compared);
    rep.laplacian_spread = (hi - lo) / std::abs(rep.laplacian_mean);
    rep.original = assess(orig, GoodFunction::anisotropic(y));
    rep.transformed = assess(trans, GoodFunction::trace(2));
    return rep;
}

double bootstrap_recurrence(int n) {
    require(n >= 0, "bootstrap_recurrence: n must be non-negative");
    double a = 2.0;
    for (int k = 0; k < n; ++k) a = 2.0 - 1.0 / a;
    return a;
}

namespace {

struct SuiteConfig {
    std::string name = "suite";
    std::vector<ProblemEntry> problems;
    std::vector<std::string> functions;
    std::string report_dir = "reports";
    int threads = 0;
    SolverConfig solver;
};

[[noreturn]] void config_error(const toml::node& n, const std::string& field, const std::string& msg) {
    std::ostringstream os;
    os << "line " << n.source().begin.line << ": " << field << ": " << msg;
    throw ConfigError(os.str());
}

[[noreturn]] void config_error(const std::string& field, const std::string& msg) {
    throw ConfigError(field + ": " + msg);
}

std::string get_string(const toml::table& t, const std::string& section, const char* key, std::string fallback) {
    const toml::node* n = t.get(key);
    if (!n) return fallback;
    if (!n->is_string()) config_error(*n, section + "." + key, "expected a string");
    return n->value<std::string>().value();
}

double get_number(const toml::table& t, const std::string& section, const char* key, double fallback) {
    const toml::node* n = t.get(key);
    if (!n) return fallback;
    if (!n->is_number()) config_error(*n, section + "." + key, "expected a number");
    return n->value<double>().value();
}

std::vector<std::string> get_strings(const toml::table& t, const std::string& section, const char* key) {
    std::vector<std::string> out;
    const toml::node* n = t.get(key);
    if (!n) return out;
    if (n->is_string()) return {n->value<std::string>().value()};
    const toml::array* arr = n->as_array();
    if (!arr) config_error(*n, section + "." + key, "expected an array of strings");
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const toml::node& el = *arr->get(i);
        if (!el.is_string())
            config_error(el, section + "." + key + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back(el.value<std::string>().value());
    }
    return out;
}

SuiteConfig parse_suite(const std::string& path) {
    toml::table root;
    try {
        root = toml::parse_file(path);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << path << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        throw ConfigError(os.str());
    }
    SuiteConfig cfg;
    const toml::table* suite = root["suite"].as_table();
    if (!suite) config_error("suite", "missing [suite] table");
    for (auto&& [k, v] : *suite) {
        static const std::vector<std::string> known = {"name", "problems", "problem_files", "functions",
                                                       "report_dir", "threads", "seed"};
        if (std::find(known.begin(), known.end(), std::string(k.str())) == known.end())
            config_error(v, "suite." + std::string(k.str()), "unknown field");
    }
    cfg.name = get_string(*suite, "suite", "name", cfg.name);
    cfg.report_dir = get_string(*suite, "suite", "report_dir", cfg.report_dir);
    cfg.threads = int(get_number(*suite, "suite", "threads", 0));

    if (const toml::table* s = root["solver"].as_table()) {
        for (auto&& [k, v] : *s) {
            std::string key(k.str());
            std::string field = "solver." + key;
            if (key == "grid_scale") {
                if (!v.is_number() || v.value<double>().value() <= 0) config_error(v, field, "expected a positive number");
                cfg.solver.grid_scale = v.value<double>().value();
            } else if (key == "max_iters") {
                if (!v.is_integer() || v.value<int64_t>().value() < 1) config_error(v, field, "expected a positive integer");
                cfg.solver.max_iters = int(v.value<int64_t>().value());
            } else if (key == "tol") {
                if (!v.is_number()) config_error(v, field, "expected a number");
                cfg.solver.tol = v.value<double>().value();
            } else if (key == "relaxation") {
                if (!v.is_number()) config_error(v, field, "expected a number");
                cfg.solver.relaxation = v.value<double>().value();
            } else if (key == "epsilons") {
                const toml::array* arr = v.as_array();
                if (!arr) config_error(v, field, "expected an array of numbers");
                std::vector<double> eps;
                for (std::size_t i = 0; i < arr->size(); ++i) {
                    if (!arr->get(i)->is_number())
                        config_error(*arr->get(i), field + "[" + std::to_string(i) + "]", "expected a number");
                    eps.push_back(arr->get(i)->value<double>().value());
                }
                cfg.solver.epsilons = eps;
            } else if (key == "refine_conjugate") {
                if (!v.is_boolean()) config_error(v, field, "expected a boolean");
                cfg.solver.refine_conjugate = v.value<bool>().value();
            } else {
                config_error(v, field, "unknown field");
            }
        }
    } else if (root.contains("solver")) {
        config_error(*root.get("solver"), "solver", "expected a table");
    }

    auto ids = get_strings(*suite, "suite", "problems");
    if (ids.size() == 1 && ids[0] == "all") ids = registry_ids();
    const toml::node* pn = suite->get("problems");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!registry().count(ids[i]))
            config_error(pn ? *pn : static_cast<const toml::node&>(*suite), "suite.problems[" + std::to_string(i) + "]",
                         "unknown problem id '" + ids[i] + "'");
        cfg.problems.push_back(registry_entry(ids[i], cfg.solver.grid_scale));
    }
    auto base = std::filesystem::path(path).parent_path();
    auto files = get_strings(*suite, "suite", "problem_files");
    for (std::size_t i = 0; i < files.size(); ++i) {
        auto fp = std::filesystem::path(files[i]);
        if (fp.is_relative()) fp = base / fp;
        try {
            cfg.problems.push_back(problem_from_json(read_json_file(fp.string())));
        } catch (const std::exception& e) {
            config_error(*suite->get("problem_files"), "suite.problem_files[" + std::to_string(i) + "]", e.what());
        }
    }
    if (cfg.problems.empty()) config_error("suite.problems", "no problems selected");

    cfg.functions = get_strings(*suite, "suite", "functions");
    if (cfg.functions.empty()) cfg.functions = {"trace", "lambda_max", "S_2", "N_2"};
    for (std::size_t i = 0; i < cfg.functions.size(); ++i) {
        try {
            good_function_from_name(cfg.functions[i], 3);
        } catch (const std::exception& e) {
            config_error(*suite->get("functions"), "suite.functions[" + std::to_string(i) + "]", e.what());
        }
    }
    return cfg;
}

int thread_count(int configured, std::size_t jobs) {
    int n = configured;
    if (const char* env = std::getenv("BRENIER_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) n = int(v);
    }
    if (n <= 0) n = int(std::max(1u, std::thread::hardware_concurrency()));
    return int(std::min<std::size_t>(std::size_t(n), std::max<std::size_t>(1, jobs)));
}

std::string file_stem(const std::string& problem, const std::string& f) {
    std::string s = problem + "__" + f;
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

struct JobResult {
    std::vector<BoundReport> reports;
    std::vector<std::string> skipped;
    std::vector<std::string> errors;
};

}  // namespace

SuiteOutcome run_suite(const std::string& config_path, const std::string& report_dir_override) {
    SuiteOutcome out;
    SuiteConfig cfg;
    try {
        cfg = parse_suite(config_path);
    } catch (const ConfigError& e) {
        out.errors.push_back(std::string("config: ") + e.what());
        out.exit_code = 2;
        return out;
    }
    if (!report_dir_override.empty()) cfg.report_dir = report_dir_override;

    std::vector<JobResult> results(cfg.problems.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < cfg.problems.size(); j = next++) {
            const ProblemEntry& entry = cfg.problems[j];
            JobResult& res = results[j];
            std::vector<GoodFunction> fs;
            for (const auto& name : cfg.functions) {
                try {
                    fs.push_back(good_function_from_name(name, entry.dim()));
                } catch (const std::exception& e) {
                    res.skipped.push_back(entry.id + "/" + name + ": " + e.what());
                }
            }
            try {
                PreparedProblem prepared = prepare_problem(entry, cfg.solver);
                for (const auto& f : fs) {
                    try {
                        res.reports.push_back(assess(prepared, f));
                    } catch (const std::exception& e) {
                        res.errors.push_back(entry.id + "/" + f.name() + ": " + e.what());
                    }
                }
            } catch (const std::exception& e) {
                res.errors.push_back(entry.id + ": " + e.what());
            }
        }
    };
    const int nthreads = thread_count(cfg.threads, cfg.problems.size());
    {
        std::vector<std::jthread> pool;
        for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
        worker();
    }

    // Single collector: reports are written in registry order after all jobs.
    std::filesystem::create_directories(cfg.report_dir);
    for (auto& res : results) {
        for (auto& r : res.reports) {
            Json j = to_json(r);
            j["suite"] = cfg.name;
            write_json_file((std::filesystem::path(cfg.report_dir) / (file_stem(r.problem_id, r.f_name) + ".json")).string(),
                            j);
            if (r.verdict == Verdict::Violated) out.exit_code = std::max(out.exit_code, 1);
            if (r.verdict == Verdict::ViolatedWithinMargin) {
                std::ostringstream os;
                os << r.problem_id << "/" << r.f_name << ": ratio " << r.ratio << " exceeds 1 within margin "
                   << r.margins.total;
                out.warnings.push_back(os.str());
            }
            out.reports.push_back(std::move(r));
        }
        for (auto& s : res.skipped) out.skipped.push_back(std::move(s));
        for (auto& e : res.errors) out.errors.push_back(std::move(e));
    }
    std::ofstream csv(std::filesystem::path(cfg.report_dir) / "summary.csv");
    write_summary_csv(csv, out.reports);
    if (out.exit_code == 0 && !out.errors.empty()) out.exit_code = 3;
    return out;
}

}  // namespace brenier
