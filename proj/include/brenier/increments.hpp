#pragma once

// Spherical second increments Delta_eps F(x) = 1/2 avg_y (F(x+eps y) + F(x-eps y) - 2F(x)),
// their eps -> 0 limit and upper bounds, and far-field probes of Brenier maps.

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "brenier/grid.hpp"
#include "brenier/potential.hpp"
#include "brenier/transport.hpp"

namespace brenier {

struct SphericalQuadrature {
    int dim = 0;
    std::vector<Vector> nodes;
    std::vector<double> weights;
    bool symmetric = false;

    /// d=1: {-1, +1}. d=2: 32 equally spaced angles. d=3: the 12 icosahedron
    /// and 20 dodecahedron vertices, equally weighted.
    static SphericalQuadrature standard(int dim);
    /// Equal weights; symmetric is detected from the nodes.
    static SphericalQuadrature from_nodes(std::vector<Vector> nodes);

    /// max_ij |sum_k w_k y_ki y_kj - delta_ij / d|.
    double second_moment_error() const;
};

/// A scalar function with an optional gradient, evaluated analytically or by
/// interpolation. Leaving the domain, or hitting +inf, throws DomainError.
struct ScalarField {
    int dim = 0;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;  // may be empty
    std::optional<Box> domain;
    /// Sup of the multilinear interpolation error, when the field is sampled.
    double interpolation_error = 0.0;

    double operator()(const Vector& x) const;
    Vector grad(const Vector& x) const;

    static ScalarField from_potential(const Potential& p);
    /// Multilinear interpolation; gradient from the supplied component fields
    /// when given.
    static ScalarField from_grid(const GridField& f, const std::vector<GridField>* gradient = nullptr);
};

struct Increments {
    double first = 0.0;   // F(x + eps y) - F(x)
    double second = 0.0;  // first + (F(x - eps y) - F(x))
};

Increments delta_increments(const ScalarField& f, const Vector& x, const Vector& y, double eps);

/// 1/2 sum_i w_i delta^2_{eps y_i} F(x). Requires a symmetric quadrature.
double delta_eps(const ScalarField& f, const Vector& x, double eps, const SphericalQuadrature& quad);

struct LimitReport {
    std::vector<double> eps;
    std::vector<double> ratios;  // Delta_eps F / eps^2
    /// Two Romberg sweeps of the ratios in eps^2.
    double limit = 0.0;
    /// Laplacian / (2d) when the Laplacian was supplied, NaN otherwise.
    double expected = 0.0;
    double error = 0.0;
    /// log2 of successive difference ratios of the last three levels.
    double order = 0.0;
    /// Ratios constant to roundoff (quadratic F): order is reported as +inf.
    bool exact = false;
    bool ok = false;
};

/// Ladder eps = 2^-1 .. 2^-levels. ok requires |limit - expected| <= tol and
/// order >= 2 (or an exact ladder).
LimitReport check_delta_eps_limit(const ScalarField& f, const Vector& x, const SphericalQuadrature& quad,
                                  std::optional<double> laplacian, int levels = 6, double tol = 1e-6);

/// One (x, eps) sample of an inequality lhs <= rhs.
struct InequalityRow {
    Vector x;
    double eps = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // rhs - lhs
};

struct InequalityReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double tolerance = 0.0;
    double max_slack = 0.0;
    double min_slack = 0.0;
    std::vector<InequalityRow> rows;
    std::vector<InequalityRow> counterexamples;

    bool ok() const { return violations == 0; }
};

/// Delta_eps F(x) <= (ell/d) eps^2/2 + tol over all sampled (x, eps).
InequalityReport check_delta_eps_bound(const ScalarField& f, double ell, const std::vector<Vector>& points,
                                       const std::vector<double>& eps, const SphericalQuadrature& quad,
                                       double tol = 1e-10);

struct DecayRow {
    double radius = 0.0;
    double radial = 0.0;   // max | |T(x)| - j | on the sphere of this radius
    double angular = 0.0;  // max angle between T(x) and x, radians
};

struct DecayReport {
    double j = 0.0;
    std::vector<DecayRow> rows;
    bool radial_decreasing = false;
    bool angular_decreasing = false;
};

/// Samples T on spheres |x| = r: 2 points in 1D, 64 angles in 2D, the
/// standard quadrature nodes in 3D. Throws DomainError when a sphere leaves
/// the grid.
DecayReport far_field_decay_probe(const BrenierSolution& sol, double j, const std::vector<double>& radii);

/// Delta_eps phi(x) <= (eps/2) sum_i w_i <grad phi(x + eps y_i) - grad phi(x - eps y_i), y_i>
/// at the given points, within tol plus the fields' interpolation error.
InequalityReport delta_eps_phi_bound_check(const ScalarField& phi, const std::vector<Vector>& points, double eps,
                                           const SphericalQuadrature& quad, double tol = 1e-8);
/// The same at every admissible node of a solution whose eps-sphere stays in
/// the grid.
InequalityReport delta_eps_phi_bound_check(const BrenierSolution& sol, double eps, const SphericalQuadrature& quad,
                                           double tol = 1e-8);

}  // namespace brenier
