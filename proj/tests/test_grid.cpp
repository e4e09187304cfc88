#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "brenier/error.hpp"
#include "brenier/grid.hpp"
#include "brenier/potential.hpp"

using namespace brenier;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<int>(v.size()));
    int i = 0;
    for (double c : v) x(i++) = c;
    return x;
}

std::size_t nearest_node(const GridSpec& g, const Vector& x) {
    std::array<std::size_t, 3> idx{};
    for (int a = 0; a < g.dim(); ++a)
        idx[a] = static_cast<std::size_t>(std::lround((x(a) - g.box().low[a]) / g.h(a)));
    return g.ravel(idx);
}

}  // namespace

TEST_CASE("grid layout round-trips flat indices") {
    GridSpec g(Box{3, {-1, 0, 2}, {1, 4, 3}}, {5, 7, 6});
    CHECK(g.size() == 5 * 7 * 6);
    for (std::size_t i = 0; i < g.size(); i += 7) CHECK(g.ravel(g.unravel(i)) == i);
    CHECK(g.stride(2) == 1);
    CHECK(g.stride(1) == 6);
    CHECK(g.stride(0) == 42);
    Vector p = g.point(g.ravel({4, 6, 5}));
    CHECK(p(0) == doctest::Approx(1));
    CHECK(p(1) == doctest::Approx(4));
    CHECK(p(2) == doctest::Approx(3));
    CHECK_THROWS_AS(GridSpec::cube(1, 0, 1, 4), ContractViolation);
}

TEST_CASE("hessian_fd is exact on quadratics and linear fields") {
    GridSpec g = GridSpec::cube(2, -1, 1, 21);
    GridField quad = GridField::sample(g, [](const Vector& x) { return 0.5 * (2 * x(0) * x(0) + 3 * x(1) * x(1)); });
    GridField lin = GridField::sample(g, [](const Vector& x) { return 3 * x(0) - 2 * x(1) + 1; });
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g.interior(i)) continue;
        SymMatrix h = quad.hessian_fd(i);
        CHECK(std::abs(h(0, 0) - 2) <= 1e-9);
        CHECK(std::abs(h(1, 1) - 3) <= 1e-9);
        CHECK(std::abs(h(0, 1)) <= 1e-9);
        CHECK(lin.hessian_fd(i).frobenius_norm() <= 1e-9);
    }
    // Cross term of a full quadratic.
    GridField full = GridField::sample(g, [](const Vector& x) { return x(0) * x(1); });
    CHECK(full.hessian_fd(nearest_node(g, vec({0.3, -0.2})))(0, 1) == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("hessian_fd on x^4/4 matches the Taylor remainder h^2/2") {
    for (std::size_t n : {41u, 81u, 161u}) {
        GridSpec g = GridSpec::cube(1, -2, 2, n);
        GridField f = GridField::sample(g, [](const Vector& x) { return std::pow(x(0), 4) / 4; });
        double h = g.h(0);
        std::size_t node = nearest_node(g, vec({1.0}));
        REQUIRE(std::abs(g.point(node)(0) - 1.0) < 1e-12);
        // ((1+h)^4 + (1-h)^4 - 2) / (4 h^2) = 3 + h^2 / 2.
        CHECK(std::abs(f.hessian_fd(node)(0, 0) - (3 + h * h / 2)) <= 1e-9);
    }
}

TEST_CASE("hessian_fd rejects boundary nodes and masked neighbours") {
    GridSpec g = GridSpec::cube(2, 0, 1, 6);
    std::vector<double> v(g.size(), 1.0);
    v[g.ravel({2, 2})] = kInf;
    GridField f(g, v);
    CHECK_THROWS_AS(f.hessian_fd(g.ravel({0, 3})), StencilError);
    CHECK_THROWS_AS(f.hessian_fd(g.ravel({3, 3})), StencilError);  // diagonal neighbour masked
    CHECK_NOTHROW(f.hessian_fd(g.ravel({3, 4}), 1));
    CHECK_FALSE(f.hessian_stencil_ok(g.ravel({3, 4}), 2));
    CHECK(f.masked_count() == 1);
}

TEST_CASE("multilinear interpolation reproduces multilinear functions") {
    GridSpec g(Box{3, {-1, -2, 0}, {1, 2, 1}}, {7, 9, 5});
    auto fn = [](const Vector& x) { return 1 + 2 * x(0) - x(1) + 0.5 * x(0) * x(1) * x(2) + x(2); };
    GridField f = GridField::sample(g, fn);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 200; ++k) {
        Vector x = vec({-1 + 2 * u(rng), -2 + 4 * u(rng), u(rng)});
        CHECK(f.interpolate(x) == doctest::Approx(fn(x)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(f.interpolate(vec({1.5, 0, 0.5})), DomainError);
}

TEST_CASE("convexity scan separates convex and concave samples") {
    GridSpec g = GridSpec::cube(2, -2, 2, 31);
    auto convex = GridField::sample(g, [](const Vector& x) { return std::exp(x(0)) + x(1) * x(1); });
    auto concave = GridField::sample(g, [](const Vector& x) { return -x(0) * x(0); });
    CHECK(convex.convexity_scan().ok());
    auto scan = concave.convexity_scan();
    CHECK_FALSE(scan.ok());
    CHECK(scan.worst == doctest::Approx(2 * g.h(0) * g.h(0)));
}

TEST_CASE("gaussian potentials are normalized log-densities") {
    SymMatrix cov = SymMatrix::from_row_major(2, std::vector<double>{2.0, 0.5, 0.5, 1.0});
    Potential v = Potential::gaussian(vec({0.5, -0.3}), cov);
    GridSpec g = GridSpec::cube(2, -12, 12, 241);
    GridField s = v.sample(g);
    double mass = 0;
    for (double x : s.values()) mass += std::exp(-x);
    mass *= g.cell_volume();
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    // Hessian is the precision matrix.
    SymMatrix prec = cov.inverse();
    CHECK((v.hessian(vec({1, 2})).dense() - prec.dense()).norm() <= 1e-14);
}

TEST_CASE("closed-form derivatives agree with central differences") {
    Matrix l(2, 2);
    l << 1.0, 0.3, -0.2, 0.8;
    std::vector<Potential> cases = {
        Potential::isotropic_gaussian(2, 1.0).with_perturbation(Perturbation::CosX1, 0.1),
        Potential::isotropic_gaussian(2, 1.0).with_perturbation(Perturbation::Quartic, 0.5, l, vec({0.1, 0.2})),
        Potential::isotropic_gaussian(2, 2.0).with_perturbation(Perturbation::Cosh, 0.2),
        Potential::isotropic_gaussian(2, 1.0)
            .with_perturbation(Perturbation::Quartic, 0.5)
            .compose_linear(l, vec({0.4, -0.1}), 0.3),
    };
    for (const auto& p : cases) {
        Vector x = vec({0.37, -0.81});
        const double h = 1e-4;
        Vector g = p.gradient(x);
        Matrix hm = p.hessian(x).dense();
        for (int a = 0; a < 2; ++a) {
            Vector e = Vector::Zero(2);
            e(a) = h;
            double fd = (p.value(x + e) - p.value(x - e)) / (2 * h);
            CHECK(g(a) == doctest::Approx(fd).epsilon(1e-7));
            Vector gd = (p.gradient(x + e) - p.gradient(x - e)) / (2 * h);
            for (int b = 0; b < 2; ++b) CHECK(hm(b, a) == doctest::Approx(gd(b)).epsilon(1e-7));
        }
    }
}

TEST_CASE("compose_linear evaluates V(Mx+b) + c") {
    Matrix m(2, 2);
    m << 2.0, 0.0, 0.5, 1.0;
    Vector b = vec({0.3, -0.4});
    Potential v = Potential::gaussian(vec({1, 0}), SymMatrix::diagonal({1.0, 4.0}))
                      .with_perturbation(Perturbation::Cosh, 0.1);
    Potential w = v.compose_linear(m, b, -0.7);
    for (Vector x : {vec({0, 0}), vec({1, -1}), vec({-0.3, 2.2})})
        CHECK(w.value(x) == doctest::Approx(v.value(m * x + b) - 0.7).epsilon(1e-13));
}

TEST_CASE("mollified potentials sum shifted copies and mask outside the ball") {
    Potential base = Potential::isotropic_gaussian(2, 1.0);
    std::vector<Vector> offs = {vec({0.1, 0}), vec({-0.1, 0}), vec({0, 0.1}), vec({0, -0.1})};
    std::vector<double> w = {0.25, 0.25, 0.25, 0.25};
    Potential m = Potential::mollified(base, offs, w, 0.2, 1.0);
    Vector x = vec({0.3, 0.4});
    double expect = 0.2;
    for (std::size_t k = 0; k < offs.size(); ++k) expect += w[k] * base.value(x - offs[k]);
    CHECK(m.value(x) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(m.value(vec({0.8, 0.8})) == kInf);
    CHECK_FALSE(m.in_support(vec({0.8, 0.8})));
    CHECK_THROWS_AS(m.gradient(vec({0.8, 0.8})), DomainError);
    // Mollifying a quadratic adds a constant only.
    CHECK((m.hessian(x).dense() - Matrix::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("grid potentials interpolate and differentiate their samples") {
    GridSpec g = GridSpec::cube(1, -3, 3, 601);
    Potential p = Potential::grid(GridField::sample(g, [](const Vector& x) { return std::cosh(x(0)); }), true);
    CHECK(p.value(vec({0.5})) == doctest::Approx(std::cosh(0.5)).epsilon(1e-4));
    CHECK(p.gradient(vec({0.5}))(0) == doctest::Approx(std::sinh(0.5)).epsilon(1e-4));
    CHECK(p.hessian(vec({0.5}))(0, 0) == doctest::Approx(std::cosh(0.5)).epsilon(1e-3));
    GridField bad = GridField::sample(g, [](const Vector& x) { return std::sin(x(0)); });
    CHECK_THROWS_AS(Potential::grid(bad, true), ContractViolation);
}
