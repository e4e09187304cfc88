#include "doctest.h"

#include <cmath>
#include <random>

#include "brenier/error.hpp"
#include "brenier/increments.hpp"

using namespace brenier;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<int>(v.size()));
    int i = 0;
    for (double c : v) x(i++) = c;
    return x;
}

ScalarField field(int d, std::function<double(const Vector&)> fn) {
    ScalarField f;
    f.dim = d;
    f.value = std::move(fn);
    return f;
}

double log1p_norm2(const Vector& x) { return std::log1p(x.squaredNorm()); }

// Delta of log(1 + |x|^2) in d dimensions.
double log1p_norm2_laplacian(const Vector& x) {
    double r2 = x.squaredNorm();
    double d = double(x.size());
    return (2 * d * (1 + r2) - 4 * r2) / ((1 + r2) * (1 + r2));
}

}  // namespace

TEST_CASE("standard quadratures have unit nodes and exact second moments") {
    for (int d : {1, 2, 3}) {
        auto q = SphericalQuadrature::standard(d);
        CHECK(q.symmetric);
        double wsum = 0;
        for (std::size_t k = 0; k < q.nodes.size(); ++k) {
            CHECK(std::abs(q.nodes[k].norm() - 1) <= 1e-14);
            wsum += q.weights[k];
        }
        CHECK(std::abs(wsum - 1) <= 1e-14);
        CHECK(q.second_moment_error() <= 1e-12);
    }
    CHECK(SphericalQuadrature::standard(2).nodes.size() == 32);
    CHECK(SphericalQuadrature::standard(3).nodes.size() == 32);
    // A lopsided node set is flagged.
    auto lop = SphericalQuadrature::from_nodes({vec({1, 0}), vec({0, 1}), vec({-1, 0})});
    CHECK_FALSE(lop.symmetric);
    CHECK_THROWS_AS(delta_eps(field(2, [](const Vector&) { return 0.0; }), vec({0, 0}), 0.1, lop),
                    ContractViolation);
}

TEST_CASE("first and second increments on elementary functions") {
    Vector a = vec({0.3, -1.2});
    auto lin = field(2, [a](const Vector& x) { return a.dot(x) + 2; });
    Vector y = vec({0.6, 0.8});
    auto inc = delta_increments(lin, vec({0.1, 0.7}), y, 0.25);
    CHECK(inc.first == doctest::Approx(0.25 * a.dot(y)).epsilon(1e-14));
    CHECK(std::abs(inc.second) <= 1e-15);

    auto half_sq = field(2, [](const Vector& x) { return 0.5 * x.squaredNorm(); });
    CHECK(delta_increments(half_sq, vec({0.5, -0.25}), y, 0.5).second == doctest::Approx(0.25).epsilon(1e-14));

    auto quartic = field(1, [](const Vector& x) { return std::pow(x(0), 4); });
    CHECK(std::abs(delta_increments(quartic, vec({1.0}), vec({1.0}), 0.1).second - 0.1202) <= 1e-14);

    // The second increment is the sum of the two one-sided first increments,
    // bit for bit.
    auto wavy = field(2, [](const Vector& x) { return std::sin(3 * x(0)) * std::exp(x(1)); });
    Vector x = vec({0.37, -0.11});
    auto both = delta_increments(wavy, x, y, 0.3);
    CHECK(both.second == delta_increments(wavy, x, y, 0.3).first + delta_increments(wavy, x, -y, 0.3).first);
}

TEST_CASE("increments leaving the domain raise DomainError") {
    GridSpec g = GridSpec::cube(1, -1, 1, 21);
    auto f = ScalarField::from_grid(GridField::sample(g, [](const Vector& x) { return x(0) * x(0); }));
    CHECK_NOTHROW(delta_increments(f, vec({0.0}), vec({1.0}), 0.5));
    CHECK_THROWS_AS(delta_increments(f, vec({0.8}), vec({1.0}), 0.5), DomainError);
    Potential ball = Potential::mollified(Potential::isotropic_gaussian(1, 1.0), {vec({0.0})}, {1.0}, 0.0, 1.0);
    CHECK_THROWS_AS(delta_increments(ScalarField::from_potential(ball), vec({0.8}), vec({1.0}), 0.5), DomainError);
}

TEST_CASE("delta_eps on quadratics equals eps^2 tr A / (2d)") {
    auto q2 = SphericalQuadrature::standard(2);
    auto half_sq = field(2, [](const Vector& x) { return 0.5 * x.squaredNorm(); });
    auto aniso = field(2, [](const Vector& x) { return 0.5 * (x(0) * x(0) + 3 * x(1) * x(1)); });
    auto lin = field(2, [](const Vector& x) { return 4 * x(0) - x(1); });
    for (double eps : {1.0, 0.3, 1e-2}) {
        for (Vector x : {vec({0, 0}), vec({1.5, -2.5}), vec({-7, 3})}) {
            CHECK(delta_eps(half_sq, x, eps, q2) == doctest::Approx(eps * eps / 2).epsilon(1e-12));
            CHECK(delta_eps(aniso, x, eps, q2) == doctest::Approx(eps * eps).epsilon(1e-12));
            CHECK(std::abs(delta_eps(lin, x, eps, q2)) <= 1e-13 * (1 + x.norm()));
        }
    }
    auto q3 = SphericalQuadrature::standard(3);
    auto diag3 = field(3, [](const Vector& x) { return 0.5 * (x(0) * x(0) + 2 * x(1) * x(1) + 6 * x(2) * x(2)); });
    CHECK(delta_eps(diag3, vec({0.2, 0.1, -0.3}), 0.5, q3) == doctest::Approx(0.25 * 9 / 6.0).epsilon(1e-12));
}

TEST_CASE("delta_eps is linear and non-negative on convex functions") {
    auto q = SphericalQuadrature::standard(2);
    auto f = field(2, [](const Vector& x) { return std::exp(x(0) - 0.5 * x(1)); });
    auto g = field(2, log1p_norm2);
    auto comb = field(2, [&](const Vector& x) { return 2.5 * f.value(x) - 0.75 * g.value(x); });
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 100; ++k) {
        Vector x = vec({u(rng), u(rng)});
        double e = 0.1 + 0.2 * std::abs(u(rng));
        double lhs = delta_eps(comb, x, e, q);
        double rhs = 2.5 * delta_eps(f, x, e, q) - 0.75 * delta_eps(g, x, e, q);
        CHECK(std::abs(lhs - rhs) <= 1e-13 * (1 + std::abs(f.value(x))));
        CHECK(delta_eps(f, x, e, q) >= 0.0);
    }
    // Dyadic points and steps keep quadratics exact, so zero tolerance.
    auto sq = field(1, [](const Vector& x) { return x(0) * x(0) + 0.5 * x(0); });
    auto q1 = SphericalQuadrature::standard(1);
    for (double x : {-3.0, -0.5, 0.0, 1.25, 8.0})
        for (double e : {0.5, 0.25, 0.125}) CHECK(delta_eps(sq, vec({x}), e, q1) == e * e);
}

TEST_CASE("delta_eps / eps^2 converges to the Laplacian over 2d at second order") {
    auto q2 = SphericalQuadrature::standard(2);
    auto half_sq = field(2, [](const Vector& x) { return 0.5 * x.squaredNorm(); });
    auto exact = check_delta_eps_limit(half_sq, vec({0.3, 0.4}), q2, 2.0);
    CHECK(exact.exact);
    CHECK(exact.ok);
    CHECK(exact.limit == doctest::Approx(0.5).epsilon(1e-12));

    auto s = field(2, [](const Vector& x) { return std::sin(x(0)) + x(1) * x(1); });
    auto rs = check_delta_eps_limit(s, vec({0.5, 0.2}), q2, -std::sin(0.5) + 2);
    CHECK(rs.ok);
    CHECK(rs.error <= 1e-6);
    CHECK(rs.order >= 2.0 - 1e-3);
    CHECK(rs.order <= 2.1);

    auto x4 = field(1, [](const Vector& x) { return std::pow(x(0), 4); });
    auto r4 = check_delta_eps_limit(x4, vec({1.0}), SphericalQuadrature::standard(1), 12.0);
    CHECK(r4.ok);
    CHECK(r4.limit == doctest::Approx(6.0).epsilon(1e-10));
    // The ratio is 6 + eps^2 exactly.
    for (std::size_t k = 0; k < r4.eps.size(); ++k)
        CHECK(r4.ratios[k] == doctest::Approx(6 + r4.eps[k] * r4.eps[k]).epsilon(1e-12));

    auto lg = field(3, log1p_norm2);
    Vector x3 = vec({0.3, -0.2, 0.5});
    auto r3 = check_delta_eps_limit(lg, x3, SphericalQuadrature::standard(3), log1p_norm2_laplacian(x3));
    CHECK(r3.ok);

    // A wrong Laplacian is caught.
    CHECK_FALSE(check_delta_eps_limit(s, vec({0.5, 0.2}), q2, 2.0).ok);
}

TEST_CASE("delta_eps bound holds with equality on quadratics") {
    auto q2 = SphericalQuadrature::standard(2);
    std::vector<Vector> pts = {vec({0, 0}), vec({1, -2}), vec({-3.5, 0.25})};
    std::vector<double> eps = {1.0, 0.5, 0.1};
    auto half_sq = field(2, [](const Vector& x) { return 0.5 * x.squaredNorm(); });
    auto rep = check_delta_eps_bound(half_sq, 2.0, pts, eps, q2);
    CHECK(rep.ok());
    CHECK(std::abs(rep.max_slack) <= 1e-12);
    CHECK(std::abs(rep.min_slack) <= 1e-12);

    auto concave = field(1, [](const Vector& x) { return -x(0) * x(0); });
    auto rc = check_delta_eps_bound(concave, -2.0, {vec({0.3}), vec({-2})}, eps, SphericalQuadrature::standard(1));
    CHECK(rc.ok());
    CHECK(std::abs(rc.min_slack) <= 1e-12);

    // Too small an ell is reported as a counterexample.
    auto bad = check_delta_eps_bound(half_sq, 1.5, pts, eps, q2);
    CHECK(bad.violations == pts.size() * eps.size());
    CHECK(bad.counterexamples.size() == bad.violations);
}

TEST_CASE("delta_eps bound on non-quadratic functions with analytic ell") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-3, 3), ue(1e-3, 1.0);
    struct Case {
        int d;
        double ell;
        std::function<double(const Vector&)> fn;
    };
    std::vector<Case> cases = {
        {1, 1.0, [](const Vector& x) { return -std::cos(x(0)); }},
        {2, 4.0, log1p_norm2},
        {2, 3.0, [](const Vector& x) { return std::sin(x(0)) + x(1) * x(1); }},
    };
    for (const auto& c : cases) {
        auto q = SphericalQuadrature::standard(c.d);
        auto f = field(c.d, c.fn);
        std::size_t checked = 0, bad = 0;
        for (int k = 0; k < 1000; ++k) {
            Vector x(c.d);
            for (int a = 0; a < c.d; ++a) x(a) = u(rng);
            auto rep = check_delta_eps_bound(f, c.ell, {x}, {ue(rng)}, q);
            checked += rep.checked;
            bad += rep.violations;
        }
        CHECK(checked == 1000);
        CHECK(bad == 0);
    }
}

TEST_CASE("convexity inequality for delta_eps phi on closed-form potentials") {
    auto q1 = SphericalQuadrature::standard(1);
    ScalarField quartic = field(1, [](const Vector& x) { return std::pow(x(0), 4) / 4; });
    quartic.gradient = [](const Vector& x) { return Vector::Constant(1, std::pow(x(0), 3)); };
    auto rep = delta_eps_phi_bound_check(quartic, {vec({0.0})}, 1.0, q1);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].lhs == doctest::Approx(0.25));
    CHECK(rep.rows[0].rhs == doctest::Approx(1.0));
    CHECK(rep.ok());

    auto q2 = SphericalQuadrature::standard(2);
    ScalarField sq = field(2, [](const Vector& x) { return 0.5 * x.squaredNorm(); });
    sq.gradient = [](const Vector& x) { return x; };
    auto rs = delta_eps_phi_bound_check(sq, {vec({0.2, 1.0}), vec({-1, -1})}, 0.3, q2);
    for (const auto& row : rs.rows) {
        CHECK(row.lhs == doctest::Approx(0.045).epsilon(1e-12));
        CHECK(row.rhs == doctest::Approx(0.09).epsilon(1e-12));
    }
    CHECK(rs.ok());
}

TEST_CASE("convexity inequality on computed Brenier potentials") {
    TransportProblem p1{Potential::isotropic_gaussian(1, 1.0),
                        Potential::isotropic_gaussian(1, 1.0).with_perturbation(Perturbation::Quartic, 0.3),
                        GridSpec::cube(1, -7, 7, 1401), GridSpec::cube(1, -4, 4, 801), SolverKind::Quantile1D};
    auto s1 = brenier_1d(p1);
    auto r1 = delta_eps_phi_bound_check(s1, 0.5, SphericalQuadrature::standard(1));
    CHECK(r1.checked > 100);
    CHECK(r1.ok());

    TransportProblem p2{Potential::isotropic_gaussian(2, 1.0), Potential::isotropic_gaussian(2, 2.0),
                        GridSpec::cube(2, -6, 6, 61), GridSpec::cube(2, -12, 12, 73)};
    auto s2 = brenier_entropic(p2);
    auto r2 = delta_eps_phi_bound_check(s2, 0.4, SphericalQuadrature::standard(2));
    CHECK(r2.checked > 100);
    CHECK(r2.ok());
}

TEST_CASE("far-field probe on a compactly supported 1D target") {
    // nu: the standard Gaussian restricted to [-1, 1].
    Potential w = Potential::mollified(Potential::isotropic_gaussian(1, 1.0), {vec({0.0})}, {1.0}, 0.0, 1.0);
    TransportProblem p{Potential::isotropic_gaussian(1, 1.0), w, GridSpec::cube(1, -5, 5, 2001),
                       GridSpec::cube(1, -1.2, 1.2, 2401), SolverKind::Quantile1D};
    auto sol = brenier_1d(p);
    auto rep = far_field_decay_probe(sol, 1.0, {1.5, 2.0, 2.5, 3.0, 3.5});
    REQUIRE(rep.rows.size() == 5);
    CHECK(rep.radial_decreasing);
    CHECK(rep.angular_decreasing);
    double t35 = sol.map_eval(vec({3.5}))(0);
    CHECK(t35 >= 0.995);
    CHECK(t35 <= 1.0);
    CHECK(rep.rows.back().radial <= 1e-2);
    CHECK(rep.rows.back().angular == 0.0);
    // Oracle: F_nu^-1(Phi(r)) for the truncated Gaussian is
    // Phi^-1(Phi(-1) + Phi(r) (Phi(1) - Phi(-1))). The density jumps at the
    // support edge, so the trapezoid CDF is only first-order accurate there.
    auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    auto oracle = [&](double r) {
        double target = Phi(-1) + Phi(r) * (Phi(1) - Phi(-1));
        double lo = -1, hi = 1;
        for (int k = 0; k < 100; ++k) {
            double mid = 0.5 * (lo + hi);
            (Phi(mid) < target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    TransportProblem fine = p;
    fine.nu_grid = GridSpec::cube(1, -1.2, 1.2, 4801);
    auto sol_fine = brenier_1d(fine);
    for (double r : {1.5, 2.5}) {
        double e_coarse = std::abs(sol.map_eval(vec({r}))(0) - oracle(r));
        double e_fine = std::abs(sol_fine.map_eval(vec({r}))(0) - oracle(r));
        CHECK(e_coarse <= 1e-3);
        CHECK(e_fine <= 0.6 * e_coarse);
    }
    CHECK_THROWS_AS(far_field_decay_probe(sol, 1.0, {6.0}), DomainError);
}

TEST_CASE("far-field probe of the identity on the support boundary") {
    Potential w = Potential::mollified(Potential::isotropic_gaussian(1, 1.0), {vec({0.0})}, {1.0}, 0.0, 1.0);
    GridSpec g = GridSpec::cube(1, -1, 1, 801);
    TransportProblem p{w, w, g, g, SolverKind::Quantile1D};
    auto sol = brenier_1d(p);
    auto rep = far_field_decay_probe(sol, 1.0, {1.0});
    CHECK(rep.rows[0].radial <= 1e-12);
}
