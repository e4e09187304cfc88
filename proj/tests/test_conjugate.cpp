#include "doctest.h"

#include <cmath>
#include <random>

#include "brenier/conjugate.hpp"
#include "brenier/error.hpp"

using namespace brenier;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<int>(v.size()));
    int i = 0;
    for (double c : v) x(i++) = c;
    return x;
}

// Direct O(N M) maximization, the reference for the linear-time transform.
std::vector<double> brute_conjugate(const GridField& f, const GridSpec& dual) {
    std::vector<double> out(dual.size(), -kInf);
    for (std::size_t j = 0; j < dual.size(); ++j) {
        Vector y = dual.point(j);
        for (std::size_t i = 0; i < f.size(); ++i)
            if (!f.masked(i)) out[j] = std::max(out[j], f.spec().point(i).dot(y) - f[i]);
    }
    return out;
}

Potential quadratic(int d, double alpha) { return Potential::quadratic(SymMatrix::identity(d) * alpha); }

Potential quartic_1d() {
    return Potential::quadratic(SymMatrix::zero(1)).with_perturbation(Perturbation::Quartic, 1.0);
}

}  // namespace

TEST_CASE("discrete transform equals direct maximization, masked or not") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int d = 1; d <= 3; ++d) {
        std::size_t n = d == 3 ? 6 : (d == 2 ? 9 : 23);
        GridSpec primal = GridSpec::cube(d, -1, 1.5, n);
        GridSpec dual(Box::cube(d, -2, 3), {n + 2, n + 1, n + 3});
        std::vector<double> v(primal.size());
        for (auto& x : v) x = u(rng) * 3;  // deliberately non-convex
        v[1] = kInf;
        v[primal.size() / 2] = kInf;
        GridField f(primal, v);
        auto fast = discrete_legendre(f, dual);
        auto slow = brute_conjugate(f, dual);
        for (std::size_t j = 0; j < dual.size(); ++j) {
            CHECK(fast.values[j] == doctest::Approx(slow[j]).epsilon(1e-13));
            // The reported argmax attains the value.
            std::size_t i = fast.argmax[j];
            CHECK(primal.point(i).dot(dual.point(j)) - f[i] == doctest::Approx(slow[j]).epsilon(1e-13));
        }
    }
}

TEST_CASE("quadratics are fixed points up to stencil accuracy") {
    for (double alpha : {0.5, 1.0, 4.0}) {
        GridSpec primal = GridSpec::cube(1, -4, 4, 801);
        GridSpec dual = GridSpec::cube(1, -alpha * 3, alpha * 3, 801);
        ConjugateOptions raw;
        raw.refine = false;
        Conjugate c = legendre_transform(quadratic(1, alpha), {primal, dual}, raw);
        double h = primal.h(0), err = 0;
        for (std::size_t j = 0; j < dual.size(); ++j) {
            double y = dual.point(j)(0);
            err = std::max(err, std::abs(c.field[j] - y * y / (2 * alpha)));
        }
        // Discrete sup misses the continuous one by at most alpha h^2 / 8.
        CHECK(err <= alpha * h * h / 8 + 1e-13);
        CHECK(err <= h * h);
    }
    // Matched 2D grids, alpha = 4 gives |y|^2 / 8.
    GridSpec primal = GridSpec::cube(2, -2, 2, 81);
    GridSpec dual = GridSpec::cube(2, -6, 6, 61);
    Conjugate c = legendre_transform(quadratic(2, 4.0), {primal, dual});
    double err = 0;
    for (std::size_t j = 0; j < dual.size(); ++j) err = std::max(err, std::abs(c.field[j] - dual.point(j).squaredNorm() / 8));
    CHECK(err <= 1e-12);
    CHECK(c.refine_failures == 0);
}

TEST_CASE("x^4/4 conjugates to (3/4)|y|^(4/3)") {
    GridSpec primal = GridSpec::cube(1, -3, 3, 2001);
    GridSpec dual = GridSpec::cube(1, -8, 8, 1601);
    for (bool refine : {false, true}) {
        ConjugateOptions opts;
        opts.refine = refine;
        Conjugate c = legendre_transform(quartic_1d(), {primal, dual}, opts);
        double err = 0;
        for (std::size_t j = 0; j < dual.size(); ++j) {
            double y = dual.point(j)(0);
            err = std::max(err, std::abs(c.field[j] - 0.75 * std::pow(std::abs(y), 4.0 / 3.0)));
        }
        CHECK(err <= 5e-4);
        if (refine) CHECK(err <= 1e-12);
        CHECK(c.field.convexity_scan().ok());
    }
}

TEST_CASE("a primal box too small for the dual box is a range error") {
    GridSpec primal = GridSpec::cube(1, -1, 1, 101);
    GridSpec dual = GridSpec::cube(1, -3, 3, 101);
    CHECK_THROWS_AS(legendre_transform(quadratic(1, 1.0), {primal, dual}), RangeError);
    ConjugateOptions lax;
    lax.check_range = false;
    CHECK_NOTHROW(legendre_transform(quadratic(1, 1.0), {primal, dual}, lax));
}

TEST_CASE("masked potentials have finite conjugates and exact ball-constrained refinement") {
    Potential base = Potential::isotropic_gaussian(2, 1.0);
    std::vector<Vector> offs = {vec({0.05, 0}), vec({-0.05, 0}), vec({0, 0})};
    std::vector<double> w = {0.25, 0.25, 0.5};
    Potential wt = Potential::mollified(base, offs, w, 0.0, 1.0);
    GridSpec primal = GridSpec::cube(2, -1.2, 1.2, 121);
    GridSpec dual = GridSpec::cube(2, -3, 3, 31);
    Conjugate c = legendre_transform(wt, {primal, dual});
    CHECK(c.refine_failures == 0);
    for (double v : c.field.values()) CHECK(std::isfinite(v));
    // Oracle: brute force over a fine polar sampling of the disc.
    for (Vector y : {vec({0.2, 0.2}), vec({2.0, -1.0}), vec({-2.8, 2.8})}) {
        std::size_t j = 0;
        double best = -kInf;
        for (std::size_t k = 0; k < dual.size(); ++k)
            if ((dual.point(k) - y).norm() < 1e-9) j = k;
        for (int ir = 0; ir <= 400; ++ir)
            for (int it = 0; it < 1600; ++it) {
                double r = ir / 400.0, th = 2 * M_PI * it / 1600.0;
                Vector x = vec({r * std::cos(th), r * std::sin(th)});
                best = std::max(best, x.dot(y) - wt.value(x));
            }
        CHECK(c.field[j] >= best - 1e-12);
        CHECK(c.field[j] <= best + 1e-4);
        bool inside = y.norm() < 0.99;
        CHECK(bool(c.interior[j]) == inside);
    }
}

TEST_CASE("conjugate invariants: convexity, order reversal, Young") {
    GridSpec primal = GridSpec::cube(2, -3, 3, 61);
    GridSpec dual = GridSpec::cube(2, -2, 2, 41);
    ConjugateOptions raw;
    raw.refine = false;
    Potential w1 = quadratic(2, 1.0).with_perturbation(Perturbation::Cosh, 0.2);
    Potential w2 = w1.shifted(0.1);
    Conjugate c1 = legendre_transform(w1, {primal, dual}, raw);
    Conjugate c2 = legendre_transform(w2, {primal, dual}, raw);
    CHECK(c1.field.convexity_scan().ok());
    for (std::size_t j = 0; j < dual.size(); ++j) CHECK(c1.field[j] >= c2.field[j]);

    // Order reversal on an unrelated pair W1 <= W3.
    Potential w3 = quadratic(2, 1.5).with_perturbation(Perturbation::Cosh, 0.2);
    Conjugate c3 = legendre_transform(w3, {primal, dual}, raw);
    for (std::size_t j = 0; j < dual.size(); ++j) CHECK(c1.field[j] >= c3.field[j]);

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pi(0, primal.size() - 1), pj(0, dual.size() - 1);
    GridField s1 = w1.sample(primal);
    for (int k = 0; k < 1000; ++k) {
        std::size_t i = pi(rng), j = pj(rng);
        CHECK(primal.point(i).dot(dual.point(j)) <= s1[i] + c1.field[j] + 1e-9);
    }
}

TEST_CASE("involution gap stays at the plateau") {
    {
        GridSpec g = GridSpec::cube(1, -3, 3, 2001);
        CHECK(conjugate_involution_gap(quadratic(1, 1.0), {g, g}) <= 1e-6);
    }
    {
        GridSpec primal = GridSpec::cube(1, -3, 3, 2001);
        GridSpec dual = GridSpec::cube(1, -8, 8, 2001);
        double gap = conjugate_involution_gap(quartic_1d(), {primal, dual});
        MESSAGE("x^4/4 involution gap " << gap);
        CHECK(gap <= 1e-3);
    }
    {
        Potential cosh = Potential::quadratic(SymMatrix::zero(1)).with_perturbation(Perturbation::Cosh, 1.0);
        GridSpec primal = GridSpec::cube(1, -4, 4, 2001);
        GridSpec dual = GridSpec::cube(1, -20, 20, 2001);
        double gap = conjugate_involution_gap(cosh, {primal, dual});
        MESSAGE("cosh-1 involution gap " << gap);
        CHECK(gap <= 1e-3);
    }
}

TEST_CASE("Hessian duality on closed-form cases") {
    {
        GridSpec primal = GridSpec::cube(2, -3, 3, 61);
        GridSpec dual = GridSpec::cube(2, -6, 6, 61);
        Conjugate c = legendre_transform(quadratic(2, 2.0), {primal, dual});
        CHECK(hessian_duality_gap(quadratic(2, 2.0), c, vec({0.4, -1.1})) <= 1e-6);
    }
    {
        GridSpec primal = GridSpec::cube(1, -3, 3, 2001);
        GridSpec dual = GridSpec::cube(1, -8, 8, 2001);
        Conjugate c = legendre_transform(quartic_1d(), {primal, dual});
        auto h = c.field.hessian_at(vec({1.0}));
        REQUIRE(h);
        CHECK(std::abs((*h)(0, 0) - 1.0 / 3.0) <= 1e-3);
        CHECK(hessian_duality_gap(quartic_1d(), c, vec({1.0})) <= 1e-3);
        CHECK_THROWS_AS(hessian_duality_gap(quartic_1d(), c, vec({2.5})), RangeError);
    }
    {
        Potential w = quadratic(2, 1.0).with_perturbation(Perturbation::CosX1, 0.1);
        GridSpec primal = GridSpec::cube(2, -4, 4, 801);
        GridSpec dual = GridSpec::cube(2, -3, 3, 801);
        Conjugate c = legendre_transform(w, {primal, dual});
        CHECK(hessian_duality_gap(w, c, vec({0.3, -0.2})) <= 5e-3);
    }
}

TEST_CASE("estimate_dual_constant on closed-form cases") {
    {
        double beta = 2.0;
        Potential w = Potential::isotropic_gaussian(1, beta);
        GridSpec primal = GridSpec::cube(1, -16, 16, 801);
        GridSpec dual = GridSpec::cube(1, -3, 3, 301);
        auto est = estimate_dual_constant(w, GoodFunction::trace(1), {primal, dual});
        CHECK(std::abs(est.value - beta * beta) <= 1e-6);
    }
    {
        GridSpec primal = GridSpec::cube(2, -4, 4, 81);
        GridSpec dual = GridSpec::cube(2, -3, 3, 61);
        auto est = estimate_dual_constant(quadratic(2, 1.0), GoodFunction::lambda_max(2), {primal, dual});
        CHECK(std::abs(est.value - 1.0) <= 1e-6);
    }
    {
        // cosh(x) - 1 + x^2/2 on [-3, 3]; oracle: dense scan of 1/W'' over the
        // primal points whose gradient lands in the dual box.
        Potential w = quadratic(1, 1.0).with_perturbation(Perturbation::Cosh, 1.0);
        GridSpec primal = GridSpec::cube(1, -3, 3, 1201);
        GridSpec dual = GridSpec::cube(1, -5, 5, 1001);
        auto est = estimate_dual_constant(w, GoodFunction::trace(1), {primal, dual});
        double oracle = 0;
        for (int k = 0; k <= 200000; ++k) {
            double x = -3 + 6.0 * k / 200000;
            double g = x + std::sinh(x);
            if (std::abs(g) <= 5) oracle = std::max(oracle, 1.0 / (1 + std::cosh(x)));
        }
        CHECK(std::abs(est.value - oracle) <= 1e-6);
    }
}
