#include "brenier/increments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "brenier/error.hpp"

namespace brenier {

// ---------------------------------------------------------------------------
// Quadrature

SphericalQuadrature SphericalQuadrature::from_nodes(std::vector<Vector> nodes) {
    require(!nodes.empty(), "quadrature: no nodes");
    SphericalQuadrature q;
    q.dim = static_cast<int>(nodes.front().size());
    for (auto& y : nodes) {
        require(y.size() == q.dim, "quadrature: mixed dimensions");
        y /= y.norm();
    }
    q.weights.assign(nodes.size(), 1.0 / double(nodes.size()));
    q.symmetric = true;
    for (const auto& y : nodes) {
        bool found = false;
        for (const auto& z : nodes)
            if ((y + z).norm() <= 1e-12) found = true;
        if (!found) q.symmetric = false;
    }
    q.nodes = std::move(nodes);
    return q;
}

SphericalQuadrature SphericalQuadrature::standard(int dim) {
    require(dim >= 1 && dim <= 3, "quadrature: dimension must be 1, 2 or 3");
    std::vector<Vector> nodes;
    if (dim == 1) {
        nodes = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
    } else if (dim == 2) {
        for (int k = 0; k < 32; ++k) {
            double th = 2.0 * std::numbers::pi * k / 32.0;
            Vector y(2);
            y << std::cos(th), std::sin(th);
            nodes.push_back(y);
        }
    } else {
        const double g = std::numbers::phi;
        auto add = [&](double a, double b, double c) {
            Vector y(3);
            y << a, b, c;
            nodes.push_back(y);
        };
        // Icosahedron: cyclic permutations of (0, +-1, +-g).
        for (double s1 : {-1.0, 1.0})
            for (double s2 : {-1.0, 1.0}) {
                add(0, s1, s2 * g);
                add(s1, s2 * g, 0);
                add(s2 * g, 0, s1);
            }
        // Dodecahedron: (+-1, +-1, +-1) and cyclic permutations of (0, +-1/g, +-g).
        for (double a : {-1.0, 1.0})
            for (double b : {-1.0, 1.0})
                for (double c : {-1.0, 1.0}) add(a, b, c);
        for (double s1 : {-1.0, 1.0})
            for (double s2 : {-1.0, 1.0}) {
                add(0, s1 / g, s2 * g);
                add(s1 / g, s2 * g, 0);
                add(s2 * g, 0, s1 / g);
            }
    }
    return from_nodes(std::move(nodes));
}

double SphericalQuadrature::second_moment_error() const {
    Matrix m = Matrix::Zero(dim, dim);
    for (std::size_t k = 0; k < nodes.size(); ++k) m += weights[k] * nodes[k] * nodes[k].transpose();
    m -= Matrix::Identity(dim, dim) / double(dim);
    return m.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Function handles

double ScalarField::operator()(const Vector& x) const {
    if (domain && !domain->contains(x, 1e-12)) throw DomainError("increments: evaluation point leaves the domain");
    double v = value(x);
    if (!std::isfinite(v)) throw DomainError("increments: evaluation point leaves the support");
    return v;
}

Vector ScalarField::grad(const Vector& x) const {
    require(static_cast<bool>(gradient), "increments: field has no gradient");
    if (domain && !domain->contains(x, 1e-12)) throw DomainError("increments: evaluation point leaves the domain");
    return gradient(x);
}

ScalarField ScalarField::from_potential(const Potential& p) {
    ScalarField f;
    f.dim = p.dim();
    f.value = [p](const Vector& x) { return p.value(x); };
    f.gradient = [p](const Vector& x) { return p.gradient(x); };
    if (p.form() == Potential::Form::Grid) {
        f.domain = p.field().spec().box();
        f.interpolation_error = 0.0;
    }
    return f;
}

namespace {

// (1/8) sum_a h_a^2 max |second difference along a| / h_a^2, the classical
// bound for multilinear interpolation.
double interpolation_bound(const GridField& f) {
    const GridSpec& g = f.spec();
    double total = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t s = g.stride(a);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto idx = g.unravel(i);
            if (idx[a] == 0 || idx[a] + 1 >= g.n(a)) continue;
            double c = f[i], l = f[i - s], r = f[i + s];
            if (!std::isfinite(c) || !std::isfinite(l) || !std::isfinite(r)) continue;
            worst = std::max(worst, std::abs(l - 2 * c + r));
        }
        total += worst / 8.0;
    }
    return total;
}

}  // namespace

ScalarField ScalarField::from_grid(const GridField& f, const std::vector<GridField>* gradient) {
    ScalarField s;
    s.dim = f.spec().dim();
    s.domain = f.spec().box();
    s.value = [f](const Vector& x) { return f.interpolate(x); };
    s.interpolation_error = interpolation_bound(f);
    if (gradient) {
        require(static_cast<int>(gradient->size()) == s.dim, "increments: gradient needs one field per axis");
        std::vector<GridField> comps = *gradient;
        s.gradient = [comps](const Vector& x) {
            Vector g(static_cast<int>(comps.size()));
            for (std::size_t a = 0; a < comps.size(); ++a) g(a) = comps[a].interpolate(x);
            return g;
        };
    }
    return s;
}

// ---------------------------------------------------------------------------

Increments delta_increments(const ScalarField& f, const Vector& x, const Vector& y, double eps) {
    require(x.size() == f.dim && y.size() == f.dim, "delta_increments: dimension mismatch");
    const double c = f(x);
    const double p = f(x + eps * y);
    const double m = f(x - eps * y);
    Increments out;
    out.first = p - c;
    out.second = out.first + (m - c);
    return out;
}

double delta_eps(const ScalarField& f, const Vector& x, double eps, const SphericalQuadrature& quad) {
    require(quad.symmetric, "delta_eps: quadrature must be symmetric");
    require(quad.dim == f.dim, "delta_eps: dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < quad.nodes.size(); ++k)
        acc += quad.weights[k] * delta_increments(f, x, quad.nodes[k], eps).second;
    return 0.5 * acc;
}

LimitReport check_delta_eps_limit(const ScalarField& f, const Vector& x, const SphericalQuadrature& quad,
                                  std::optional<double> laplacian, int levels, double tol) {
    require(levels >= 3, "check_delta_eps_limit: need at least three levels");
    LimitReport rep;
    for (int k = 1; k <= levels; ++k) {
        double e = std::ldexp(1.0, -k);
        rep.eps.push_back(e);
        rep.ratios.push_back(delta_eps(f, x, e, quad) / (e * e));
    }
    const auto& q = rep.ratios;
    const std::size_t n = q.size();
    double spread = 0.0;
    for (double v : q) spread = std::max(spread, std::abs(v - q.front()));
    rep.exact = spread <= 1e-12 * (1.0 + std::abs(q.front()));

    // Halving eps divides the eps^2 and eps^4 terms by 4 and 16.
    std::vector<double> r1(n - 1), r2(n - 2);
    for (std::size_t k = 0; k + 1 < n; ++k) r1[k] = (4.0 * q[k + 1] - q[k]) / 3.0;
    for (std::size_t k = 0; k + 1 < r1.size(); ++k) r2[k] = (16.0 * r1[k + 1] - r1[k]) / 15.0;
    rep.limit = rep.exact ? q.back() : r2.back();

    if (rep.exact) {
        rep.order = std::numeric_limits<double>::infinity();
    } else {
        double d1 = std::abs(q[n - 3] - q[n - 2]), d2 = std::abs(q[n - 2] - q[n - 1]);
        rep.order = (d2 > 0.0) ? std::log2(d1 / d2) : std::numeric_limits<double>::infinity();
    }
    if (laplacian) {
        rep.expected = *laplacian / (2.0 * f.dim);
        rep.error = std::abs(rep.limit - rep.expected);
        rep.ok = rep.error <= tol && (rep.exact || rep.order >= 2.0 - 1e-3);
    } else {
        rep.expected = std::numeric_limits<double>::quiet_NaN();
        rep.error = std::numeric_limits<double>::quiet_NaN();
        rep.ok = rep.exact || rep.order >= 2.0 - 1e-3;
    }
    return rep;
}

namespace {

void record(InequalityReport& rep, InequalityRow row, double tol) {
    ++rep.checked;
    if (rep.checked == 1) {
        rep.max_slack = rep.min_slack = row.slack;
    } else {
        rep.max_slack = std::max(rep.max_slack, row.slack);
        rep.min_slack = std::min(rep.min_slack, row.slack);
    }
    if (row.slack < -tol) {
        ++rep.violations;
        rep.counterexamples.push_back(row);
    }
    rep.rows.push_back(std::move(row));
}

}  // namespace

InequalityReport check_delta_eps_bound(const ScalarField& f, double ell, const std::vector<Vector>& points,
                                       const std::vector<double>& eps, const SphericalQuadrature& quad,
                                       double tol) {
    InequalityReport rep;
    rep.tolerance = tol;
    for (const auto& x : points)
        for (double e : eps) {
            InequalityRow row;
            row.x = x;
            row.eps = e;
            row.lhs = delta_eps(f, x, e, quad);
            row.rhs = ell / f.dim * e * e / 2.0;
            row.slack = row.rhs - row.lhs;
            record(rep, std::move(row), tol);
        }
    return rep;
}

DecayReport far_field_decay_probe(const BrenierSolution& sol, double j, const std::vector<double>& radii) {
    const int d = sol.grid.dim();
    require(!radii.empty(), "far_field_decay_probe: empty radius ladder");
    std::vector<Vector> dirs;
    if (d == 1) {
        dirs = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
    } else if (d == 2) {
        for (int k = 0; k < 64; ++k) {
            double th = 2.0 * std::numbers::pi * k / 64.0;
            Vector y(2);
            y << std::cos(th), std::sin(th);
            dirs.push_back(y);
        }
    } else {
        dirs = SphericalQuadrature::standard(3).nodes;
    }
    DecayReport rep;
    rep.j = j;
    for (double r : radii) {
        DecayRow row;
        row.radius = r;
        for (const auto& y : dirs) {
            Vector x = r * y;
            if (!sol.grid.box().contains(x, 1e-12))
                throw DomainError("far_field_decay_probe: radius " + std::to_string(r) + " leaves the grid");
            Vector t = sol.map_eval(x);
            row.radial = std::max(row.radial, std::abs(t.norm() - j));
            double tn = t.norm();
            double ang = tn > 0 ? std::acos(std::clamp(t.dot(y) / tn, -1.0, 1.0)) : std::numbers::pi;
            row.angular = std::max(row.angular, ang);
        }
        rep.rows.push_back(row);
    }
    rep.radial_decreasing = rep.angular_decreasing = true;
    for (std::size_t k = 1; k < rep.rows.size(); ++k) {
        if (rep.rows[k].radial > rep.rows[k - 1].radial) rep.radial_decreasing = false;
        if (rep.rows[k].angular > rep.rows[k - 1].angular + 1e-12) rep.angular_decreasing = false;
    }
    return rep;
}

InequalityReport delta_eps_phi_bound_check(const ScalarField& phi, const std::vector<Vector>& points, double eps,
                                           const SphericalQuadrature& quad, double tol) {
    require(quad.symmetric, "delta_eps_phi_bound_check: quadrature must be symmetric");
    InequalityReport rep;
    rep.tolerance = tol;
    for (const auto& x : points) {
        InequalityRow row;
        row.x = x;
        row.eps = eps;
        row.lhs = delta_eps(phi, x, eps, quad);
        double acc = 0.0;
        for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
            const Vector& y = quad.nodes[k];
            acc += quad.weights[k] * (phi.grad(x + eps * y) - phi.grad(x - eps * y)).dot(y);
        }
        row.rhs = 0.5 * eps * acc;
        row.slack = row.rhs - row.lhs;
        record(rep, std::move(row), tol);
    }
    return rep;
}

InequalityReport delta_eps_phi_bound_check(const BrenierSolution& sol, double eps, const SphericalQuadrature& quad,
                                           double tol) {
    require(quad.dim == sol.grid.dim(), "delta_eps_phi_bound_check: dimension mismatch");
    ScalarField phi = ScalarField::from_grid(sol.potential, &sol.map);
    double map_err = 0.0;
    for (const auto& c : sol.map) map_err = std::max(map_err, interpolation_bound(c));
    // Node values of phi are exact; the sphere points carry the interpolation
    // error of phi on the left and of each map component on the right.
    const double budget = tol + phi.interpolation_error + eps * map_err;
    std::vector<Vector> points;
    const Box& box = sol.grid.box();
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        if (!sol.admissible(i)) continue;
        Vector x = sol.grid.point(i);
        bool inside = true;
        for (int a = 0; a < sol.grid.dim(); ++a)
            if (x(a) - eps < box.low[a] || x(a) + eps > box.high[a]) inside = false;
        if (inside) points.push_back(x);
    }
    return delta_eps_phi_bound_check(phi, points, eps, quad, budget);
}

}  // namespace brenier
