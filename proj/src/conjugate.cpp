#include "brenier/conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brenier/error.hpp"

namespace brenier {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// One line of the discrete transform: out[j] = max_i x_i y_j - in[i].
// Lower hull of the finite points, then a single merge pass over sorted y.
void conjugate_line(const double* x, const double* in, std::size_t n, std::size_t in_stride,
                    const double* y, std::size_t m, double* out, std::size_t* arg,
                    std::size_t out_stride, std::vector<std::size_t>& hull) {
    hull.clear();
    for (std::size_t i = 0; i < n; ++i) {
        double v = in[i * in_stride];
        if (v == kInf) continue;
        while (hull.size() >= 2) {
            std::size_t p = hull[hull.size() - 2], q = hull.back();
            double lhs = (in[q * in_stride] - in[p * in_stride]) * (x[i] - x[q]);
            double rhs = (v - in[q * in_stride]) * (x[q] - x[p]);
            if (lhs >= rhs)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(i);
    }
    if (hull.empty()) {
        for (std::size_t j = 0; j < m; ++j) {
            out[j * out_stride] = -kInf;
            arg[j * out_stride] = kNone;
        }
        return;
    }
    std::size_t k = 0;
    for (std::size_t j = 0; j < m; ++j) {
        while (k + 1 < hull.size()) {
            std::size_t p = hull[k], q = hull[k + 1];
            if (in[q * in_stride] - in[p * in_stride] < y[j] * (x[q] - x[p]))
                ++k;
            else
                break;
        }
        std::size_t i = hull[k];
        out[j * out_stride] = x[i] * y[j] - in[i * in_stride];
        arg[j * out_stride] = i;
    }
}

std::vector<double> axis_coords(const GridSpec& g, int a) {
    std::vector<double> c(g.n(a));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = g.coord(a, i);
    return c;
}

struct Shape {
    int d;
    std::array<std::size_t, 3> n{1, 1, 1};
    std::size_t size() const { return n[0] * n[1] * n[2]; }
    std::size_t stride(int a) const {
        std::size_t s = 1;
        for (int b = a + 1; b < d; ++b) s *= n[b];
        return s;
    }
};

// Iterates over every line along axis a of a shape, calling fn(base offset).
template <class Fn>
void for_each_line(const Shape& s, int a, Fn fn) {
    std::size_t inner = s.stride(a);
    std::size_t outer = s.size() / (inner * s.n[a]);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) fn(o * inner * s.n[a] + i);
}

}  // namespace

DiscreteConjugate discrete_legendre(const GridField& f, const GridSpec& dual) {
    const GridSpec& primal = f.spec();
    const int d = primal.dim();
    require(dual.dim() == d, "discrete_legendre: primal and dual dimensions differ");

    // The sup over a tensor grid splits into d successive one-dimensional
    // transforms; axis d-1 goes first, and each pass feeds its negation on.
    std::vector<double> cur = f.values();
    Shape shape{d};
    for (int a = 0; a < d; ++a) shape.n[a] = primal.n(a);
    std::vector<std::vector<std::size_t>> args(d);
    std::vector<std::size_t> hull;
    hull.reserve(4096);

    for (int a = d - 1; a >= 0; --a) {
        Shape next = shape;
        next.n[a] = dual.n(a);
        std::vector<double> out(next.size());
        std::vector<std::size_t> arg(next.size());
        auto xs = axis_coords(primal, a);
        auto ys = axis_coords(dual, a);
        std::size_t in_stride = shape.stride(a), out_stride = next.stride(a);
        // Lines of the input and output correspond one to one in the same order.
        std::vector<std::size_t> in_bases, out_bases;
        for_each_line(shape, a, [&](std::size_t b) { in_bases.push_back(b); });
        for_each_line(next, a, [&](std::size_t b) { out_bases.push_back(b); });
        for (std::size_t l = 0; l < in_bases.size(); ++l)
            conjugate_line(xs.data(), cur.data() + in_bases[l], xs.size(), in_stride, ys.data(),
                           ys.size(), out.data() + out_bases[l], arg.data() + out_bases[l],
                           out_stride, hull);
        if (a > 0)
            for (double& v : out) v = (v == -kInf) ? kInf : -v;
        cur = std::move(out);
        args[a] = std::move(arg);
        shape = next;
    }

    DiscreteConjugate res;
    res.argmax.assign(dual.size(), kNone);
    for (std::size_t j = 0; j < dual.size(); ++j) {
        if (cur[j] == -kInf) throw MassError("discrete_legendre: every primal node is masked");
        auto jd = dual.unravel(j);
        std::array<std::size_t, 3> ip{};
        // Pass for axis a has shape (n_0..n_{a-1}, m_a..m_{d-1}).
        for (int a = 0; a < d; ++a) {
            Shape s{d};
            for (int b = 0; b < d; ++b) s.n[b] = b < a ? primal.n(b) : dual.n(b);
            std::size_t flat = 0;
            for (int b = 0; b < d; ++b) flat += (b < a ? ip[b] : jd[b]) * s.stride(b);
            ip[a] = args[a][flat];
        }
        res.argmax[j] = primal.ravel(ip);
    }
    res.values = GridField(dual, std::move(cur));
    return res;
}

// ---------------------------------------------------------------------------

Vector Conjugate::maximizer(std::size_t node) const {
    const int d = field.dim();
    Vector x(d);
    for (int a = 0; a < d; ++a) x(a) = argmax[node * d + a];
    return x;
}

namespace {

// Maximizer of <x, y> - W(x) - lambda |x|^2 / 2 by damped Newton.
bool newton_argmax(const Potential& w, const Vector& y, double lambda, Vector& x) {
    const int d = w.dim();
    auto obj = [&](const Vector& z) { return z.dot(y) - w.value(z) - 0.5 * lambda * z.squaredNorm(); };
    double fx = obj(x);
    for (int it = 0; it < 200; ++it) {
        Vector g = y - w.gradient(x) - lambda * x;
        double scale = 1.0 + y.norm() + lambda * x.norm();
        if (g.norm() <= 1e-13 * scale) return true;
        Matrix h = w.hessian(x).dense() + lambda * Matrix::Identity(d, d);
        Eigen::LLT<Matrix> llt(h);
        Vector step;
        if (llt.info() == Eigen::Success) {
            step = llt.solve(g);
        } else {
            double reg = 1e-8 * (1.0 + h.norm());
            step = (h + reg * Matrix::Identity(d, d)).ldlt().solve(g);
        }
        double t = 1.0;
        bool moved = false;
        while (t > 1e-12) {
            Vector xn = x + t * step;
            double fn = obj(xn);
            if (fn >= fx - 1e-15 * (1.0 + std::abs(fx))) {
                x = xn;
                fx = fn;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) {
            g = y - w.gradient(x) - lambda * x;
            return g.norm() <= 1e-9 * scale;
        }
    }
    return false;
}

struct Refined {
    Vector x;
    double value = 0.0;
    bool ok = false;
    bool interior = true;
};

// Exact maximizer of <x, y> - W(x) over the support, starting from the grid
// maximizer. A ball constraint |x| <= R is handled through its multiplier.
Refined refine_node(const Potential& open, std::optional<double> radius, const Vector& y,
                    const Vector& x0) {
    Refined r;
    r.x = x0;
    if (!newton_argmax(open, y, 0.0, r.x)) return r;
    if (!radius || r.x.norm() <= *radius) {
        r.value = r.x.dot(y) - open.value(r.x);
        r.ok = true;
        r.interior = !radius || r.x.norm() < *radius * (1.0 - 1e-12);
        return r;
    }
    const double rad = *radius;
    double lo = 0.0, hi = 1.0;
    Vector xh = r.x * (rad / r.x.norm());
    while (true) {
        Vector t = xh;
        if (!newton_argmax(open, y, hi, t)) return r;
        xh = t;
        if (t.norm() <= rad) break;
        lo = hi;
        hi *= 4.0;
        if (hi > 1e12) return r;
    }
    // Safeguarded Newton on q(lambda) = |x(lambda)| - R.
    double lam = hi;
    Vector x = xh;
    for (int it = 0; it < 200; ++it) {
        double q = x.norm() - rad;
        if (std::abs(q) <= 1e-14 * rad) break;
        if (q > 0)
            lo = lam;
        else
            hi = lam;
        Matrix h = open.hessian(x).dense() + lam * Matrix::Identity(x.size(), x.size());
        Vector dx = -h.ldlt().solve(x);
        double dq = x.dot(dx) / x.norm();
        double next = (dq < 0) ? lam - q / dq : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        lam = next;
        if (!newton_argmax(open, y, lam, x)) return r;
        if (hi - lo <= 1e-15 * hi) break;
    }
    x *= rad / x.norm();
    r.x = x;
    r.value = x.dot(y) - open.value(x);
    r.ok = true;
    r.interior = false;
    return r;
}

Potential open_extension(const Potential& w) {
    if (w.form() == Potential::Form::Mollified && w.support_radius())
        return Potential::mollified(w.base()[0], w.offsets(), w.weights(), w.offset(), std::nullopt);
    return w;
}

bool bounded_support(const Potential& w, const GridField& sampled) {
    if (w.support_radius()) return true;
    return sampled.masked_count() > 0;
}

}  // namespace

Conjugate legendre_transform(const Potential& w, const ConjugateGrids& grids,
                             const ConjugateOptions& opts) {
    if (!w.convex()) throw ContractViolation("legendre_transform: potential is not flagged convex");
    const GridSpec& primal = grids.primal;
    const GridSpec& dual = grids.dual;
    const int d = w.dim();
    require(primal.dim() == d && dual.dim() == d, "legendre_transform: dimension mismatch");

    GridField sampled = w.form() == Potential::Form::Grid && w.field().spec() == primal
                            ? w.field()
                            : w.sample(primal);
    const bool bounded = bounded_support(w, sampled);
    DiscreteConjugate disc = discrete_legendre(sampled, dual);

    Conjugate out;
    out.argmax.resize(dual.size() * d);
    out.interior.assign(dual.size(), 1);

    for (std::size_t j = 0; j < dual.size(); ++j) {
        auto ip = primal.unravel(disc.argmax[j]);
        bool on_edge = false;
        for (int a = 0; a < d; ++a) on_edge |= ip[a] == 0 || ip[a] + 1 == primal.n(a);
        if (on_edge && opts.check_range && !bounded && dual.interior(j)) {
            Vector y = dual.point(j);
            std::string msg = "legendre_transform: dual node y=(";
            for (int a = 0; a < d; ++a) msg += (a ? "," : "") + std::to_string(y(a));
            msg += ") is maximized on the primal boundary; enlarge the primal box";
            throw RangeError(msg);
        }
        if (on_edge) out.interior[j] = 0;
        if (bounded && !on_edge) {
            // A masked neighbour means the maximizer sits on the support boundary.
            std::size_t flat = disc.argmax[j];
            for (int a = 0; a < d; ++a) {
                std::size_t s = primal.stride(a);
                if (sampled.masked(flat + s) || sampled.masked(flat - s)) out.interior[j] = 0;
            }
        }
        Vector x = primal.point(disc.argmax[j]);
        for (int a = 0; a < d; ++a) out.argmax[j * d + a] = x(a);
    }

    std::vector<double> values = disc.values.values();
    const bool can_refine = opts.refine && w.smooth() && w.form() != Potential::Form::Grid;
    if (can_refine) {
        Potential open = open_extension(w);
        out.refined = true;
        for (std::size_t j = 0; j < dual.size(); ++j) {
            Vector y = dual.point(j);
            Vector x0 = primal.point(disc.argmax[j]);
            Refined r = refine_node(open, w.support_radius(), y, x0);
            double tol = 1e-10 * (1.0 + std::abs(values[j]));
            if (!r.ok || !(r.value >= values[j] - tol)) {
                ++out.refine_failures;
                continue;
            }
            values[j] = std::max(values[j], r.value);
            out.interior[j] = bounded ? (r.interior ? 1 : 0) : 1;
            for (int a = 0; a < d; ++a) out.argmax[j * d + a] = r.x(a);
        }
    }
    out.field = GridField(dual, std::move(values));
    return out;
}

double conjugate_involution_gap(const Potential& w, const ConjugateGrids& grids, bool refine) {
    ConjugateOptions opts;
    opts.refine = refine;
    Conjugate conj = legendre_transform(w, grids, opts);
    DiscreteConjugate back = discrete_legendre(conj.field, grids.primal);
    const GridSpec& primal = grids.primal;
    const Box inner = [&] {
        Box b = grids.dual.box();
        for (int a = 0; a < b.dim; ++a) {
            b.low[a] += grids.dual.h(a);
            b.high[a] -= grids.dual.h(a);
        }
        return b;
    }();
    double gap = 0.0;
    for (std::size_t i = 0; i < primal.size(); ++i) {
        if (!primal.interior(i)) continue;
        Vector x = primal.point(i);
        double wx = w.value(x);
        if (!std::isfinite(wx)) continue;
        Vector g;
        try {
            g = w.gradient(x);
        } catch (const Error&) {
            continue;
        }
        if (!inner.contains(g)) continue;
        gap = std::max(gap, std::abs(back.values[i] - wx));
    }
    return gap;
}

double hessian_duality_gap(const Potential& w, const Conjugate& conj, const Vector& x) {
    Vector y = w.gradient(x);
    const GridSpec& dual = conj.field.spec();
    Box inner = dual.box();
    for (int a = 0; a < inner.dim; ++a) {
        inner.low[a] += dual.h(a);
        inner.high[a] -= dual.h(a);
    }
    if (!inner.contains(y)) throw RangeError("hessian_duality_gap: grad W(x) is outside the dual grid interior");
    auto hs = conj.field.hessian_at(y);
    if (!hs) throw RangeError("hessian_duality_gap: no finite-difference stencil at grad W(x)");
    SymMatrix hw = w.hessian(x);
    return (hs->dense() - hw.inverse().dense()).norm();
}

ConstantEstimate estimate_dual_constant(const Conjugate& conj, const GoodFunction& f,
                                        double lft_margin) {
    const GridField& field = conj.field;
    const GridSpec& dual = field.spec();
    require(f.dim() == dual.dim(), "estimate_dual_constant: dimension mismatch");
    ConstantEstimate est;
    est.value = -kInf;
    double upper = -kInf;
    for (std::size_t j = 0; j < dual.size(); ++j) {
        if (!dual.interior(j)) continue;
        if (!field.hessian_stencil_ok(j)) {
            ++est.skipped;
            continue;
        }
        double v = eval_good(f, field.hessian_fd(j));
        ++est.nodes;
        double unc = 0.0;
        if (field.hessian_stencil_ok(j, 2)) unc = std::abs(v - eval_good(f, field.hessian_fd(j, 2))) / 3.0;
        if (v > est.value) {
            est.value = v;
            est.argmax = dual.point(j);
        }
        upper = std::max(upper, v + unc);
    }
    if (est.nodes == 0) throw DegenerateSolution("estimate_dual_constant: no admissible dual node");
    est.margin = (upper - est.value) + lft_margin;
    est.h = 0.0;
    for (int a = 0; a < dual.dim(); ++a) est.h = std::max(est.h, dual.h(a));
    return est;
}

double unrefined_conjugate_margin(const Potential& w, const ConjugateGrids& grids) {
    // Unrefined discrete conjugates sit up to W'' h_p^2 / 8 below the true
    // one, which a second difference over h_d can amplify by 4 / h_d^2.
    GridField sampled = w.sample(grids.primal);
    double wpp = 0.0;
    for (std::size_t i = 0; i < sampled.size(); ++i)
        if (sampled.hessian_stencil_ok(i)) wpp = std::max(wpp, sampled.hessian_fd(i).max_eigenvalue());
    double hp = 0.0, hd = kInf;
    for (int a = 0; a < grids.primal.dim(); ++a) {
        hp = std::max(hp, grids.primal.h(a));
        hd = std::min(hd, grids.dual.h(a));
    }
    return wpp * hp * hp / (2.0 * hd * hd);
}

ConstantEstimate estimate_dual_constant(const Potential& w, const GoodFunction& f,
                                        const ConjugateGrids& grids, const ConjugateOptions& opts) {
    Conjugate conj = legendre_transform(w, grids, opts);
    double lft = 0.0;
    if (!conj.refined || conj.refine_failures > 0) lft = lipschitz_bound(f) * unrefined_conjugate_margin(w, grids);
    return estimate_dual_constant(conj, f, lft);
}

}  // namespace brenier
