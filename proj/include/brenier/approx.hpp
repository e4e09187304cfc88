#pragma once

// Smooth approximations of the marginals: V_t = -log(e^-V * eta_t), the
// truncated and mollified W_t = W * eta_t + c_t on a ball, the interpolation
// (1-t) V + t (Lambda/d) |x|^2/2, and checks that the curvature constants
// survive these operations.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "brenier/conjugate.hpp"
#include "brenier/grid.hpp"
#include "brenier/potential.hpp"
#include "brenier/symcalc.hpp"

namespace brenier {

/// The bump c (1 - |z/t|^2)^3 restricted to the lattice h Z^d and normalized
/// to unit discrete mass.
struct Mollifier {
    int dim = 0;
    double t = 0.0;
    std::vector<std::array<int, 3>> steps;  // lattice offsets in grid units
    std::vector<Vector> offsets;            // the same offsets as points
    std::vector<double> weights;

    /// Requires t >= max_a h_a.
    static Mollifier bump(const GridSpec& grid, double t);

    double mass() const;
    /// Every offset z has -z in the stencil with the same weight.
    bool even() const;
    /// Largest |z|.
    double reach() const;
    /// Kernel radius in grid units along each axis.
    std::array<std::size_t, 3> halo() const;
};

/// The subgrid of `grid` whose nodes keep the full stencil inside `grid`.
GridSpec shrink_by_halo(const GridSpec& grid, const Mollifier& m);

struct MollifiedDensity {
    GridField potential;  // V_t on the shrunken grid, +inf where e^-V underflows
    double mass_in = 0.0;   // sum e^-V h^d over the padded grid
    double mass_out = 0.0;  // sum e^-V_t h^d over the shrunken grid
    /// log mass_out; subtracting it from V_t normalizes the density.
    double log_normalizer = 0.0;
    std::size_t masked = 0;
};

/// Direct summation over the stencil in log-sum-exp form. e^-V below 1e-300
/// counts as zero.
MollifiedDensity mollify_log_density(const Potential& v, const Mollifier& m, const GridSpec& grid);

/// Pointwise V_t(x) = -log sum_k w_k e^{-V(x - z_k)}, for closed-form V.
double mollified_log_value(const Potential& v, const Mollifier& m, const Vector& x);
/// The weighted mean E[Hess V] under w_k e^{-V(x - z_k)} / e^{-V_t(x)}.
SymMatrix expected_hessian(const Potential& v, const Mollifier& m, const Vector& x);

struct PreservationReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    /// max f(Hess) - bound over checked nodes.
    double worst = 0.0;
    double tolerance = 0.0;
    std::size_t matrix_checked = 0;
    std::size_t matrix_violations = 0;
    /// max lambda_max(lhs - rhs) of the matrix inequality.
    double matrix_worst = 0.0;
    std::vector<Vector> counterexamples;

    bool ok() const { return violations == 0 && matrix_violations == 0; }
};

/// f(Hess V_t) <= Lambda_V + tol on interior nodes of the mollified field, and
/// Hess V_t <= E[Hess V] + tol Id. tol is L_f times the h / 2h stencil
/// discrepancy, plus 1e-9.
PreservationReport check_laplacian_preservation(const Potential& v, const Mollifier& m, const GoodFunction& f,
                                                double lambda_v, const GridSpec& grid);

struct MollifiedPotential {
    GridField field;  // W * eta_t + c_t on the shrunken grid, +inf off the ball
    double c_t = 0.0;
    double radius = 0.0;
    /// The same function off the grid: mollified closed form when W has one,
    /// the sampled field otherwise.
    Potential potential;
};

/// Requires W convex and R <= (grid half-width) - t. Throws MassError when
/// e^{-W * eta_t} has no mass on the ball.
MollifiedPotential truncate_and_mollify_w(const Potential& w, const Mollifier& m, double radius,
                                          const GridSpec& grid);

/// Least-squares fits a + b r^2 along the 2d axis rays and the diagonals,
/// then c2 = min b and c1 = min over finite nodes of W(x) - c2 |x|^2.
struct QuadraticFloor {
    double c1 = 0.0;
    double c2 = 0.0;
    std::size_t rays = 0;
    bool ok() const { return c2 > 0.0; }
};
QuadraticFloor fit_quadratic_floor(const GridField& w);

struct DualPreservationOptions {
    /// Truncation radius; empty keeps the whole grid minus the kernel halo.
    std::optional<double> radius;
    int spot_checks = 100;
    std::uint64_t seed = 1;
};

/// f(Hess W_t*) <= inv_lambda_w + margin at admissible dual nodes, and
/// (Hess W * eta_t)^-1 <= (Hess W)^-1 * eta_t at sampled points in the ball.
/// The kernel lattice follows grids.primal.
PreservationReport check_dual_preservation(const Potential& w, double t, const GoodFunction& f,
                                           double inv_lambda_w, const ConjugateGrids& grids,
                                           const DualPreservationOptions& opts = {});

/// (1-t) V + (t Lambda / d) |x|^2 / 2 + c_t, normalized on the grid.
Potential interpolation_path(const Potential& v, double t, double lambda_v, const GridSpec& grid);

struct PathReport {
    /// max over interior nodes of tr Hess V_t - Lambda (closed form).
    double worst_excess = 0.0;
    /// max |FD Laplacian - closed-form Laplacian| over interior nodes.
    double stencil_error = 0.0;
    std::size_t checked = 0;
};
PathReport check_interpolation_path(const Potential& v, double t, double lambda_v, const GridSpec& grid);

/// lambda_max((s A + (1-s) B)^-1 - s A^-1 - (1-s) B^-1); non-positive for
/// A, B > 0.
double inversion_convexity_gap(const SymMatrix& a, const SymMatrix& b, double s);

struct LadderRow {
    double t = 0.0;
    double sup_potential = 0.0;  // max |V_t - V| on the central box
    double sup_density = 0.0;    // max |e^-V_t - e^-V| on the central box
    double lambda_v = 0.0;       // sup f(Hess V_t)
    double inv_lambda_w = 0.0;   // sup f(Hess W_t*)
    std::size_t laplacian_violations = 0;
    std::size_t dual_violations = 0;
};

struct LadderConfig {
    std::vector<double> ts{0.2, 0.1, 0.05};
    double central_fraction = 0.6;
    std::optional<double> radius;
};

/// Runs both preservation checks for every t and records the convergence
/// metrics of V_t.
std::vector<LadderRow> approximation_ladder(const Potential& v, const Potential& w, const GoodFunction& f,
                                            double lambda_v, double inv_lambda_w, const GridSpec& v_grid,
                                            const ConjugateGrids& w_grids, const LadderConfig& cfg = {});

}  // namespace brenier
