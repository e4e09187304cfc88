#include "brenier/approx.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "brenier/error.hpp"

namespace brenier {

// ---------------------------------------------------------------------------
// Kernel

Mollifier Mollifier::bump(const GridSpec& grid, double t) {
    const int d = grid.dim();
    double hmax = 0.0;
    for (int a = 0; a < d; ++a) hmax = std::max(hmax, grid.h(a));
    require(t >= hmax * (1 - 1e-12), "Mollifier::bump: radius must be at least the grid spacing");
    Mollifier m;
    m.dim = d;
    m.t = t;
    std::array<int, 3> r{0, 0, 0};
    for (int a = 0; a < d; ++a) r[a] = static_cast<int>(std::floor(t / grid.h(a) + 1e-9));
    double total = 0.0;
    for (int i = -r[0]; i <= r[0]; ++i)
        for (int j = -r[1]; j <= r[1]; ++j)
            for (int k = -r[2]; k <= r[2]; ++k) {
                std::array<int, 3> s{i, j, k};
                Vector z(d);
                for (int a = 0; a < d; ++a) z(a) = s[a] * grid.h(a);
                double q = 1.0 - z.squaredNorm() / (t * t);
                if (q <= 0.0) continue;
                double w = q * q * q;
                m.steps.push_back(s);
                m.offsets.push_back(z);
                m.weights.push_back(w);
                total += w;
            }
    for (double& w : m.weights) w /= total;
    return m;
}

double Mollifier::mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

bool Mollifier::even() const {
    for (std::size_t k = 0; k < steps.size(); ++k) {
        bool found = false;
        for (std::size_t l = 0; l < steps.size(); ++l)
            if (steps[l][0] == -steps[k][0] && steps[l][1] == -steps[k][1] && steps[l][2] == -steps[k][2] &&
                weights[l] == weights[k])
                found = true;
        if (!found) return false;
    }
    return true;
}

double Mollifier::reach() const {
    double r = 0.0;
    for (const auto& z : offsets) r = std::max(r, z.norm());
    return r;
}

std::array<std::size_t, 3> Mollifier::halo() const {
    std::array<std::size_t, 3> h{0, 0, 0};
    for (const auto& s : steps)
        for (int a = 0; a < dim; ++a) h[a] = std::max<std::size_t>(h[a], static_cast<std::size_t>(std::abs(s[a])));
    return h;
}

GridSpec shrink_by_halo(const GridSpec& grid, const Mollifier& m) {
    require(m.dim == grid.dim(), "shrink_by_halo: dimension mismatch");
    auto halo = m.halo();
    Box b = grid.box();
    std::array<std::size_t, 3> n{1, 1, 1};
    for (int a = 0; a < grid.dim(); ++a) {
        require(grid.n(a) >= 2 * halo[a] + 5, "shrink_by_halo: grid too small for the kernel");
        n[a] = grid.n(a) - 2 * halo[a];
        b.low[a] = grid.coord(a, halo[a]);
        b.high[a] = grid.coord(a, grid.n(a) - 1 - halo[a]);
    }
    return GridSpec(b, n);
}

namespace {

// Flat index in `outer` of the node of `inner` (a halo-shrunk subgrid)
// shifted by -step.
std::size_t shifted_index(const GridSpec& outer, const std::array<std::size_t, 3>& halo,
                          const std::array<std::size_t, 3>& idx, const std::array<int, 3>& step) {
    std::array<std::size_t, 3> o{0, 0, 0};
    for (int a = 0; a < outer.dim(); ++a)
        o[a] = static_cast<std::size_t>(static_cast<long>(idx[a] + halo[a]) - step[a]);
    return outer.ravel(o);
}

}  // namespace

// ---------------------------------------------------------------------------
// V_t

MollifiedDensity mollify_log_density(const Potential& v, const Mollifier& m, const GridSpec& grid) {
    require(v.dim() == grid.dim() && m.dim == grid.dim(), "mollify_log_density: dimension mismatch");
    GridField s = v.sample(grid);
    GridSpec inner = shrink_by_halo(grid, m);
    auto halo = m.halo();
    const double floor_v = -std::log(1e-300);
    MollifiedDensity out;
    for (double x : s.values())
        if (x < floor_v) out.mass_in += std::exp(-x);
    out.mass_in *= grid.cell_volume();

    std::vector<double> vt(inner.size());
    std::vector<double> terms(m.weights.size());
    for (std::size_t i = 0; i < inner.size(); ++i) {
        auto idx = inner.unravel(i);
        double mx = -kInf;
        for (std::size_t k = 0; k < m.weights.size(); ++k) {
            double vv = s[shifted_index(grid, halo, idx, m.steps[k])];
            terms[k] = vv < floor_v ? std::log(m.weights[k]) - vv : -kInf;
            mx = std::max(mx, terms[k]);
        }
        if (mx == -kInf) {
            vt[i] = kInf;
            ++out.masked;
            continue;
        }
        double sum = 0.0;
        for (double t : terms)
            if (t > -kInf) sum += std::exp(t - mx);
        vt[i] = -(mx + std::log(sum));
        out.mass_out += std::exp(-vt[i]);
    }
    out.mass_out *= inner.cell_volume();
    require(out.mass_out > 0.0, "mollify_log_density: no mass left after mollification");
    out.log_normalizer = std::log(out.mass_out);
    out.potential = GridField(inner, std::move(vt));
    return out;
}

double mollified_log_value(const Potential& v, const Mollifier& m, const Vector& x) {
    double mx = -kInf;
    std::vector<double> terms(m.weights.size());
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
        terms[k] = std::log(m.weights[k]) - v.value(x - m.offsets[k]);
        mx = std::max(mx, terms[k]);
    }
    if (mx == -kInf) return kInf;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - mx);
    return -(mx + std::log(sum));
}

SymMatrix expected_hessian(const Potential& v, const Mollifier& m, const Vector& x) {
    std::vector<double> lw(m.weights.size());
    double mx = -kInf;
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
        lw[k] = std::log(m.weights[k]) - v.value(x - m.offsets[k]);
        mx = std::max(mx, lw[k]);
    }
    if (mx == -kInf) throw DomainError("expected_hessian: no mass under the kernel");
    Matrix acc = Matrix::Zero(v.dim(), v.dim());
    double total = 0.0;
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
        if (lw[k] == -kInf) continue;
        double w = std::exp(lw[k] - mx);
        acc += w * v.hessian(x - m.offsets[k]).dense();
        total += w;
    }
    return SymMatrix(acc / total);
}

PreservationReport check_laplacian_preservation(const Potential& v, const Mollifier& m, const GoodFunction& f,
                                                double lambda_v, const GridSpec& grid) {
    require(v.smooth() || v.form() == Potential::Form::Grid,
            "check_laplacian_preservation: V needs a Hessian everywhere on the grid");
    MollifiedDensity md = mollify_log_density(v, m, grid);
    const GridField& vt = md.potential;
    const GridSpec& g = vt.spec();
    const double lf = lipschitz_bound(f);

    // Stencil tolerance from the h / 2h discrepancy.
    double disc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (vt.hessian_stencil_ok(i, 1) && vt.hessian_stencil_ok(i, 2))
            disc = std::max(disc, (vt.hessian_fd(i, 1) - vt.hessian_fd(i, 2)).frobenius_norm());
    PreservationReport rep;
    rep.tolerance = lf * (2.0 / 3.0) * disc + 1e-9;
    rep.worst = -kInf;
    rep.matrix_worst = -kInf;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!vt.hessian_stencil_ok(i, 1)) continue;
        SymMatrix h = vt.hessian_fd(i, 1);
        Vector x = g.point(i);
        double val = eval_good(f, h) - lambda_v;
        ++rep.checked;
        rep.worst = std::max(rep.worst, val);
        bool bad = val > rep.tolerance;
        if (bad) ++rep.violations;

        SymMatrix eh = v.form() == Potential::Form::Grid ? SymMatrix() : expected_hessian(v, m, x);
        if (v.form() == Potential::Form::Grid) {
            // Average the sampled Hessians over the stencil.
            Matrix acc = Matrix::Zero(g.dim(), g.dim());
            double total = 0.0;
            for (std::size_t k = 0; k < m.weights.size(); ++k) {
                Vector y = x - m.offsets[k];
                double w = m.weights[k] * std::exp(-(v.value(y) - vt[i]));
                acc += w * v.hessian(y).dense();
                total += w;
            }
            eh = SymMatrix(acc / total);
        }
        double gap = (h - eh).max_eigenvalue() - rep.tolerance;
        ++rep.matrix_checked;
        rep.matrix_worst = std::max(rep.matrix_worst, gap + rep.tolerance);
        if (gap > 0.0) {
            ++rep.matrix_violations;
            bad = true;
        }
        if (bad) rep.counterexamples.push_back(x);
    }
    if (rep.checked == 0) throw DegenerateSolution("check_laplacian_preservation: no interior node");
    return rep;
}

// ---------------------------------------------------------------------------
// W_t

MollifiedPotential truncate_and_mollify_w(const Potential& w, const Mollifier& m, double radius,
                                          const GridSpec& grid) {
    require(w.convex(), "truncate_and_mollify_w: W must be convex");
    require(w.dim() == grid.dim() && m.dim == grid.dim(), "truncate_and_mollify_w: dimension mismatch");
    for (int a = 0; a < grid.dim(); ++a) {
        double half = 0.5 * (grid.box().high[a] - grid.box().low[a]);
        require(radius <= half - m.t + 1e-12, "truncate_and_mollify_w: ball plus kernel must fit in the grid");
    }
    GridField s = w.sample(grid);
    GridSpec inner = shrink_by_halo(grid, m);
    auto halo = m.halo();
    std::vector<double> conv(inner.size(), kInf);
    for (std::size_t i = 0; i < inner.size(); ++i) {
        Vector x = inner.point(i);
        if (x.norm() > radius * (1 + 1e-12)) continue;
        auto idx = inner.unravel(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < m.weights.size(); ++k) acc += m.weights[k] * s[shifted_index(grid, halo, idx, m.steps[k])];
        if (std::isfinite(acc)) conv[i] = acc;
    }
    double vmin = kInf;
    for (double c : conv) vmin = std::min(vmin, c);
    if (!std::isfinite(vmin)) throw MassError("truncate_and_mollify_w: no finite value on the ball");
    double mass = 0.0;
    for (double c : conv)
        if (std::isfinite(c)) mass += std::exp(vmin - c);
    mass *= inner.cell_volume();
    if (!(mass > 0.0) || !std::isfinite(mass)) throw MassError("truncate_and_mollify_w: normalization failed");
    MollifiedPotential out;
    out.c_t = std::log(mass) - vmin;
    for (double& c : conv)
        if (std::isfinite(c)) c += out.c_t;
    out.radius = radius;
    out.field = GridField(inner, std::move(conv));
    if (w.form() == Potential::Form::Analytic)
        out.potential = Potential::mollified(w, m.offsets, m.weights, out.c_t, radius);
    else
        out.potential = Potential::grid(out.field, true);
    return out;
}

QuadraticFloor fit_quadratic_floor(const GridField& w) {
    const GridSpec& g = w.spec();
    const int d = g.dim();
    // Rays through the node nearest the origin along axes and diagonals.
    std::array<std::size_t, 3> c{0, 0, 0};
    for (int a = 0; a < d; ++a) {
        long k = std::lround(-g.box().low[a] / g.h(a));
        c[a] = static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(g.n(a)) - 1));
    }
    std::vector<std::array<int, 3>> dirs;
    for (int i = -1; i <= 1; ++i)
        for (int j = (d >= 2 ? -1 : 0); j <= (d >= 2 ? 1 : 0); ++j)
            for (int k = (d >= 3 ? -1 : 0); k <= (d >= 3 ? 1 : 0); ++k)
                if (i != 0 || j != 0 || k != 0) dirs.push_back({i, j, k});
    QuadraticFloor out;
    out.c2 = kInf;
    for (const auto& dir : dirs) {
        // Least squares a + b r^2 on the finite samples of the ray.
        double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
        std::size_t count = 0;
        for (long step = 0;; ++step) {
            std::array<std::size_t, 3> idx = c;
            bool inside = true;
            for (int a = 0; a < d; ++a) {
                long v = static_cast<long>(c[a]) + step * dir[a];
                if (v < 0 || v >= static_cast<long>(g.n(a))) inside = false;
                else idx[a] = static_cast<std::size_t>(v);
            }
            if (!inside) break;
            std::size_t flat = g.ravel(idx);
            double val = w[flat];
            if (!std::isfinite(val)) continue;
            double r2 = g.point(flat).squaredNorm();
            s0 += 1;
            s1 += r2;
            s2 += r2 * r2;
            t0 += val;
            t1 += val * r2;
            ++count;
        }
        if (count < 3) continue;
        double det = s0 * s2 - s1 * s1;
        if (det <= 0) continue;
        double b = (s0 * t1 - s1 * t0) / det;
        out.c2 = std::min(out.c2, b);
        ++out.rays;
    }
    if (out.rays == 0) throw DegenerateSolution("fit_quadratic_floor: no ray with enough finite samples");
    out.c1 = kInf;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::isfinite(w[i])) out.c1 = std::min(out.c1, w[i] - out.c2 * g.point(i).squaredNorm());
    return out;
}

PreservationReport check_dual_preservation(const Potential& w, double t, const GoodFunction& f,
                                           double inv_lambda_w, const ConjugateGrids& grids,
                                           const DualPreservationOptions& opts) {
    require(w.smooth() && w.form() == Potential::Form::Analytic,
            "check_dual_preservation: W needs closed-form derivatives");
    const GridSpec& gp = grids.primal;
    Mollifier m = Mollifier::bump(gp, t);
    double half = kInf;
    for (int a = 0; a < gp.dim(); ++a) half = std::min(half, 0.5 * (gp.box().high[a] - gp.box().low[a]));
    const double radius = opts.radius ? *opts.radius : half - t;
    MollifiedPotential wt = truncate_and_mollify_w(w, m, radius, gp);

    ConjugateGrids cg{wt.field.spec(), grids.dual};
    ConjugateOptions co;
    co.check_range = false;
    Conjugate conj = legendre_transform(wt.potential, cg, co);
    ConstantEstimate est = estimate_dual_constant(conj, f);

    PreservationReport rep;
    rep.tolerance = est.margin + 1e-9;
    rep.worst = -kInf;
    const GridSpec& gd = grids.dual;
    for (std::size_t i = 0; i < gd.size(); ++i) {
        if (!gd.interior(i) || !conj.field.hessian_stencil_ok(i)) continue;
        double val = eval_good(f, conj.field.hessian_fd(i)) - inv_lambda_w;
        ++rep.checked;
        rep.worst = std::max(rep.worst, val);
        if (val > rep.tolerance) {
            ++rep.violations;
            rep.counterexamples.push_back(gd.point(i));
        }
    }

    // Jensen plus operator convexity of inversion at sampled points.
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    rep.matrix_worst = -kInf;
    const int d = gp.dim();
    for (int k = 0; k < opts.spot_checks; ++k) {
        Vector x(d);
        for (int a = 0; a < d; ++a) x(a) = normal(rng);
        x *= (radius - t) * std::pow(unif(rng), 1.0 / d) / x.norm();
        Matrix mean_h = Matrix::Zero(d, d), mean_inv = Matrix::Zero(d, d);
        for (std::size_t j = 0; j < m.weights.size(); ++j) {
            SymMatrix hj = w.hessian(x - m.offsets[j]);
            mean_h += m.weights[j] * hj.dense();
            mean_inv += m.weights[j] * hj.inverse().dense();
        }
        SymMatrix lhs = SymMatrix(mean_h).inverse();
        SymMatrix rhs(mean_inv);
        double gap = (lhs - rhs).max_eigenvalue();
        double scale = 1e-9 * (1.0 + rhs.frobenius_norm());
        ++rep.matrix_checked;
        rep.matrix_worst = std::max(rep.matrix_worst, gap);
        if (gap > scale) {
            ++rep.matrix_violations;
            rep.counterexamples.push_back(x);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Interpolation path

Potential interpolation_path(const Potential& v, double t, double lambda_v, const GridSpec& grid) {
    require(t >= 0.0 && t <= 1.0, "interpolation_path: t must lie in [0, 1]");
    const int d = v.dim();
    Potential p = v.scaled_plus_quadratic(1.0 - t, SymMatrix::identity(d) * (t * lambda_v / d));
    GridField s = p.sample(grid);
    double vmin = kInf;
    for (double x : s.values()) vmin = std::min(vmin, x);
    double mass = 0.0;
    for (double x : s.values())
        if (std::isfinite(x)) mass += std::exp(vmin - x);
    mass *= grid.cell_volume();
    if (!(mass > 0.0) || !std::isfinite(mass)) throw MassError("interpolation_path: normalization failed");
    return p.shifted(std::log(mass) - vmin);
}

PathReport check_interpolation_path(const Potential& v, double t, double lambda_v, const GridSpec& grid) {
    Potential p = interpolation_path(v, t, lambda_v, grid);
    GridField s = p.sample(grid);
    PathReport rep;
    rep.worst_excess = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!s.hessian_stencil_ok(i)) continue;
        double exact = p.hessian(grid.point(i)).trace();
        rep.worst_excess = std::max(rep.worst_excess, exact - lambda_v);
        rep.stencil_error = std::max(rep.stencil_error, std::abs(s.hessian_fd(i).trace() - exact));
        ++rep.checked;
    }
    return rep;
}

double inversion_convexity_gap(const SymMatrix& a, const SymMatrix& b, double s) {
    SymMatrix mix = a * s + b * (1.0 - s);
    SymMatrix rhs = a.inverse() * s + b.inverse() * (1.0 - s);
    return (mix.inverse() - rhs).max_eigenvalue();
}

// ---------------------------------------------------------------------------

std::vector<LadderRow> approximation_ladder(const Potential& v, const Potential& w, const GoodFunction& f,
                                            double lambda_v, double inv_lambda_w, const GridSpec& v_grid,
                                            const ConjugateGrids& w_grids, const LadderConfig& cfg) {
    std::vector<LadderRow> rows;
    for (double t : cfg.ts) {
        LadderRow row;
        row.t = t;
        Mollifier m = Mollifier::bump(v_grid, t);
        MollifiedDensity md = mollify_log_density(v, m, v_grid);
        Box central = v_grid.box().central(cfg.central_fraction);
        const GridSpec& g = md.potential.spec();
        for (std::size_t i = 0; i < g.size(); ++i) {
            Vector x = g.point(i);
            if (!central.contains(x, 1e-12)) continue;
            double a = md.potential[i], b = v.value(x);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            row.sup_potential = std::max(row.sup_potential, std::abs(a - b));
            row.sup_density = std::max(row.sup_density, std::abs(std::exp(-a) - std::exp(-b)));
        }
        auto lap = check_laplacian_preservation(v, m, f, lambda_v, v_grid);
        row.lambda_v = lambda_v + lap.worst;
        row.laplacian_violations = lap.violations + lap.matrix_violations;
        DualPreservationOptions dopt;
        dopt.radius = cfg.radius;
        auto dual = check_dual_preservation(w, t, f, inv_lambda_w, w_grids, dopt);
        row.inv_lambda_w = inv_lambda_w + dual.worst;
        row.dual_violations = dual.violations + dual.matrix_violations;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace brenier
