#pragma once

// End-to-end checks of sup f(Hess phi) <= sqrt(Lambda_V / lambda_W) on a
// registry of problems, with margins carried from every discretization step.

#include <optional>
#include <string>
#include <vector>

#include "brenier/conjugate.hpp"
#include "brenier/potential.hpp"
#include "brenier/symcalc.hpp"
#include "brenier/transport.hpp"

namespace brenier {

enum class Verdict { Saturated, Satisfied, ViolatedWithinMargin, Violated };
const char* verdict_name(Verdict v);

struct ProblemEntry {
    std::string id;
    std::string description;
    TransportProblem problem;
    /// Grids for W*: primal covers the nu grid, dual the range of grad W that
    /// matters.
    ConjugateGrids dual_grids;
    /// Closed-form T(x) = map_matrix x + map_shift when known.
    std::optional<Matrix> map_matrix;
    Vector map_shift;
    /// Radius of the support of nu, for bounded targets.
    std::optional<double> support_radius;
    std::vector<std::string> tags;

    int dim() const { return problem.dim(); }
};

/// Ids in registry order.
const std::vector<std::string>& registry_ids();
/// `scale` multiplies the number of grid intervals on every grid; throws
/// ConfigError for unknown ids.
ProblemEntry registry_entry(const std::string& id, double scale = 1.0);

struct SolverConfig {
    double grid_scale = 1.0;  // applied when entries are built from ids
    /// Overrides of the entry's entropic options; unset keeps the entry's.
    std::optional<int> max_iters;
    std::optional<double> tol;
    std::optional<double> relaxation;
    std::optional<std::vector<double>> epsilons;
    bool refine_conjugate = true;
};

/// ess-sup of f(Hess V) over interior grid nodes: closed-form Hessians for
/// smooth potentials, finite differences (with an h / 2h margin) otherwise.
ConstantEstimate estimate_primal_constant(const Potential& v, const GoodFunction& f, const GridSpec& grid);

/// Solved problem and its dual conjugate, reusable across good functions.
struct PreparedProblem {
    ProblemEntry entry;
    BrenierSolution solution;
    /// Half-resolution solve for the 1D rearrangement, whose sup error is
    /// otherwise invisible to the stencil margin.
    std::optional<BrenierSolution> coarse;
    Conjugate dual;
    /// Shift of the dual second differences per unit Lipschitz constant of f.
    double lft_margin = 0.0;
    double seconds = 0.0;
};

PreparedProblem prepare_problem(const ProblemEntry& entry, const SolverConfig& cfg = {});

struct Margins {
    double lambda_v = 0.0;      // absolute
    double inv_lambda_w = 0.0;  // absolute
    double sup_stencil = 0.0;   // absolute
    double sup_extrapolation = 0.0;
    double sup_resolution = 0.0;
    double marginal = 0.0;
    /// Relative uncertainty of the ratio.
    double total = 0.0;
};

struct BoundReport {
    std::string problem_id;
    std::string f_name;
    double lambda_v = 0.0;
    double inv_lambda_w = 0.0;
    double bound = 0.0;
    double sup = 0.0;
    double ratio = 0.0;
    Vector argmax;
    Margins margins;
    Verdict verdict = Verdict::Satisfied;
    std::optional<double> exact_sup;  // f of the closed-form Hessian when known
    SolverDiagnostics solver;
    double seconds = 0.0;
};

/// Relative margin m: Violated if ratio > 1 + m; ViolatedWithinMargin if
/// ratio > 1 and m > 0.05; Saturated if |ratio - 1| <= m; else Satisfied.
Verdict classify(double ratio, double margin);

BoundReport assess(const PreparedProblem& prepared, const GoodFunction& f);
/// prepare_problem + assess. Stage failures come back as StageError.
BoundReport verify_bound(const ProblemEntry& entry, const GoodFunction& f, const SolverConfig& cfg = {});

struct AnisotropicReport {
    SymMatrix y;
    /// max |tr Hess phi_A(x) - <Hess phi(Ax), Y>| / (1 + |<Hess phi(Ax), Y>|).
    double hessian_gap = 0.0;
    /// max |tr Hess V_A(x) - <Hess V(Ax), Y>| for closed-form V.
    double potential_gap = 0.0;
    std::size_t compared = 0;
    double laplacian_mean = 0.0;
    double laplacian_spread = 0.0;  // (max - min) / mean over compared nodes
    BoundReport original;     // f = <., Y> on the original problem
    BoundReport transformed;  // f = trace on the transformed problem
};

/// Y > 0, d = 2. A = Y^(1/2), V_A = V(Ax) - log det A, W_A = W(A^-1 x) + log det A.
/// Throws RangeError when no transformed node maps into the original grid.
AnisotropicReport verify_anisotropic_reduction(const ProblemEntry& entry, const SymMatrix& y,
                                               const SolverConfig& cfg = {});

/// a_0 = 2, a_{n+1} = 2 - 1/a_n.
double bootstrap_recurrence(int n);

struct SuiteOutcome {
    int exit_code = 0;
    std::vector<BoundReport> reports;
    std::vector<std::string> skipped;  // "problem/f: reason"
    std::vector<std::string> warnings;  // ViolatedWithinMargin cases
    std::vector<std::string> errors;
};

/// Reads the TOML suite, writes one JSON report per (problem, f) plus
/// summary.csv under report_dir. Exit code 0, 1 if any verdict is Violated,
/// 2 on configuration errors, 3 when a pipeline stage fails. Problems run in
/// parallel on BRENIER_THREADS workers.
SuiteOutcome run_suite(const std::string& config_path, const std::string& report_dir_override = "");

}  // namespace brenier
