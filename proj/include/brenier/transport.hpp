#pragma once

// Brenier maps between log-concave densities: monotone rearrangement in 1D,
// entropic transport with epsilon extrapolation on tensor grids in 1D-3D.

#include <optional>
#include <string>
#include <vector>

#include "brenier/grid.hpp"
#include "brenier/potential.hpp"
#include "brenier/symcalc.hpp"

namespace brenier {

enum class SolverKind { Quantile1D, Entropic };

struct EntropicOptions {
    /// Strictly decreasing ladder; empty selects diam^2 4^-k truncated at the
    /// grid-resolution floor.
    std::vector<double> epsilons;
    int max_iters = 20000;  // per level
    double tol = 1e-9;      // l1 marginal violation at exit of each level
    /// Over-relaxation weight for the potential updates, in [1, 2).
    double relaxation = 1.0;
    bool extrapolate = true;
    /// Default ladders stop once eps < (floor_factor)^2 * max_a h_mu,a h_nu,a.
    double floor_factor = 1.3;
    /// Number of default levels before truncation.
    int levels = 9;
};

struct TransportProblem {
    Potential mu;  // V, density e^-V
    Potential nu;  // W, density e^-W
    GridSpec mu_grid;
    GridSpec nu_grid;
    SolverKind solver = SolverKind::Entropic;
    EntropicOptions entropic;
    /// Reported quantities are restricted to this concentric fraction of the
    /// mu box to stay clear of the truncation boundary layer.
    double central_fraction = 0.6;

    int dim() const { return mu.dim(); }
};

struct SolverDiagnostics {
    std::string solver;
    std::vector<int> iterations;
    std::vector<double> marginal_errors;
    std::vector<double> epsilon_ladder;
    double marginal_error = 0.0;
    /// W1 (1D) or sliced W1 (d >= 2) between T#mu and nu on the grids.
    double push_tol = 0.0;
    /// max |T_extrapolated - T_finest| over the central box.
    double extrapolation_shift = 0.0;
    /// log of the discrete normalizers sum e^-V h^d and sum e^-W h^d.
    double log_mass_mu = 0.0;
    double log_mass_nu = 0.0;
};

struct BrenierSolution {
    GridSpec grid;
    GridField potential;  // phi, up to an additive constant
    /// phi extrapolated from the previous pair of levels; drives the
    /// extrapolation error estimate. Empty for the exact 1D solver.
    std::optional<GridField> potential_previous;
    double extrapolation_ratio = 0.0;
    std::vector<GridField> map;  // one field per component of T
    std::vector<std::optional<SymMatrix>> hessian;
    Box central;
    SolverDiagnostics meta;

    Vector map_at(std::size_t node) const;
    /// Interpolated T(x).
    Vector map_eval(const Vector& x) const;
    /// Interior node inside the central box with a Hessian.
    bool admissible(std::size_t node) const;
};

BrenierSolution brenier_1d(const TransportProblem& problem);
BrenierSolution brenier_entropic(const TransportProblem& problem);
/// Dispatches on problem.solver.
BrenierSolution solve_transport(const TransportProblem& problem);

/// The default ladder for a problem, after truncation.
std::vector<double> default_epsilon_ladder(const TransportProblem& problem);

struct ResidualReport {
    GridField residual;  // +inf on nodes that are not evaluated
    double sup = 0.0;
    double l2 = 0.0;
    std::size_t evaluated = 0;
    std::size_t masked = 0;  // admissible nodes with a non-positive-definite Hessian
};

/// r = V - W(T) + log det Hess phi on admissible nodes, with V and W shifted
/// by the discrete normalizers used by the solver.
ResidualReport monge_ampere_residual(const BrenierSolution& sol, const TransportProblem& problem);

struct HessianSup {
    double value = 0.0;
    std::size_t node = 0;
    Vector point;
    /// Upper-bound shift from comparing h and 2h stencils.
    double stencil_margin = 0.0;
    /// Richardson error estimate from the previous extrapolation pair.
    double extrapolation_margin = 0.0;
    std::size_t nodes = 0;
};

/// max f(Hess phi) over admissible nodes.
HessianSup sup_good_hessian(const BrenierSolution& sol, const GoodFunction& f);

/// W1 between two weighted point sets on the line.
double wasserstein1_1d(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b);

}  // namespace brenier
