#include "brenier/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "brenier/error.hpp"

namespace brenier {

// ---------------------------------------------------------------------------
// Solution accessors

Vector BrenierSolution::map_at(std::size_t node) const {
    Vector t(static_cast<int>(map.size()));
    for (std::size_t a = 0; a < map.size(); ++a) t(a) = map[a][node];
    return t;
}

Vector BrenierSolution::map_eval(const Vector& x) const {
    Vector t(static_cast<int>(map.size()));
    for (std::size_t a = 0; a < map.size(); ++a) t(a) = map[a].interpolate(x);
    return t;
}

bool BrenierSolution::admissible(std::size_t node) const {
    return hessian[node].has_value() && grid.interior(node) && central.contains(grid.point(node), 1e-12);
}

namespace {

struct Marginal {
    std::vector<double> prob;     // sums to 1
    std::vector<double> logprob;  // -inf on masked or underflowing nodes
    double log_mass = 0.0;        // log(sum e^-V h^d)
};

Marginal discretize(const Potential& v, const GridSpec& grid, const char* which) {
    GridField s = v.sample(grid);
    Marginal m;
    m.prob.resize(grid.size());
    m.logprob.resize(grid.size());
    double vmin = kInf;
    for (double x : s.values()) vmin = std::min(vmin, x);
    if (!std::isfinite(vmin)) throw MassError(std::string(which) + ": density vanishes on the whole grid");
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double e = s[i] == kInf ? 0.0 : std::exp(vmin - s[i]);
        m.prob[i] = e;
        total += e;
    }
    if (!(total > 0.0) || !std::isfinite(total))
        throw MassError(std::string(which) + ": density is not normalizable on the grid");
    const double log_total = std::log(total);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        m.prob[i] /= total;
        m.logprob[i] = s[i] == kInf ? -kInf : (vmin - s[i]) - log_total;
    }
    m.log_mass = -vmin + log_total + std::log(grid.cell_volume());
    return m;
}

std::vector<std::pair<double, double>> atoms_along(const GridSpec& g, const std::vector<double>& prob,
                                                   const std::vector<Vector>* points,
                                                   const Vector& dir) {
    std::vector<std::pair<double, double>> out;
    out.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (prob[i] <= 0.0) continue;
        Vector p = points ? (*points)[i] : g.point(i);
        out.emplace_back(p.dot(dir), prob[i]);
    }
    return out;
}

std::vector<Vector> slice_directions(int d) {
    std::vector<Vector> dirs;
    if (d == 1) {
        dirs.push_back(Vector::Ones(1));
    } else if (d == 2) {
        for (int k = 0; k < 16; ++k) {
            double th = std::numbers::pi * k / 16.0;
            Vector v(2);
            v << std::cos(th), std::sin(th);
            dirs.push_back(v);
        }
    } else {
        // Fibonacci points on the upper half sphere.
        const int n = 32;
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < n; ++k) {
            double z = 1.0 - (k + 0.5) / n;
            double r = std::sqrt(1.0 - z * z);
            Vector v(3);
            v << r * std::cos(golden * k), r * std::sin(golden * k), z;
            dirs.push_back(v);
        }
    }
    return dirs;
}

double push_forward_distance(const GridSpec& mu_grid, const std::vector<double>& a,
                             const std::vector<Vector>& image, const GridSpec& nu_grid,
                             const std::vector<double>& b) {
    auto dirs = slice_directions(mu_grid.dim());
    double acc = 0.0;
    for (const auto& dir : dirs)
        acc += wasserstein1_1d(atoms_along(mu_grid, a, &image, dir), atoms_along(nu_grid, b, nullptr, dir));
    return acc / double(dirs.size());
}

}  // namespace

double wasserstein1_1d(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
    std::vector<std::pair<double, double>> ev;
    ev.reserve(a.size() + b.size());
    for (auto& p : a) ev.emplace_back(p.first, p.second);
    for (auto& p : b) ev.emplace_back(p.first, -p.second);
    std::sort(ev.begin(), ev.end());
    double cum = 0.0, w1 = 0.0;
    for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
        cum += ev[k].second;
        w1 += std::abs(cum) * (ev[k + 1].first - ev[k].first);
    }
    return w1;
}

// ---------------------------------------------------------------------------
// Exact 1D rearrangement

namespace {

// Piecewise-linear density on a uniform grid with its exact, piecewise
// quadratic, cumulative integrals from both ends.
struct Cdf1d {
    std::vector<double> x, rho, left, right;
    double h = 0.0, total = 0.0;

    Cdf1d(const GridSpec& g, const std::vector<double>& density) : rho(density) {
        const std::size_t n = g.n(0);
        h = g.h(0);
        x.resize(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = g.coord(0, i);
        left.assign(n, 0.0);
        right.assign(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) left[i] = left[i - 1] + 0.5 * h * (rho[i - 1] + rho[i]);
        for (std::size_t i = n - 1; i-- > 0;) right[i] = right[i + 1] + 0.5 * h * (rho[i] + rho[i + 1]);
        total = left[n - 1];
    }

    // Offset s in [0, h] from x[k-1] with mass `need` accumulated from x[k-1].
    double solve_cell(std::size_t k, double need) const {
        double a = 0.5 * (rho[k] - rho[k - 1]) / h, b = rho[k - 1];
        double s;
        if (need <= 0.0) return 0.0;
        double disc = b * b + 4.0 * a * need;
        if (disc < 0.0) disc = 0.0;
        s = 2.0 * need / (b + std::sqrt(disc));
        if (!std::isfinite(s)) s = h;
        return std::clamp(s, 0.0, h);
    }

    // Left-most y with F(y) = u * total.
    double inverse_left(double mass) const {
        auto it = std::lower_bound(left.begin(), left.end(), mass);
        if (it == left.begin()) return x.front();
        if (it == left.end()) return x.back();
        std::size_t k = static_cast<std::size_t>(it - left.begin());
        if (*it == mass) return x[k];
        return x[k - 1] + solve_cell(k, mass - left[k - 1]);
    }

    // Left-most y with survival S(y) = mass, S decreasing.
    double inverse_right(double mass) const {
        // smallest k with right[k] <= mass
        auto it = std::lower_bound(right.begin(), right.end(), mass,
                                   [](double r, double m) { return r > m; });
        if (it == right.begin()) return x.front();
        if (it == right.end()) return x.back();
        std::size_t k = static_cast<std::size_t>(it - right.begin());
        if (*it == mass) return x[k];
        return x[k - 1] + solve_cell(k, right[k - 1] - mass);
    }
};

GridField potential_from_map_1d(const GridSpec& g, const std::vector<double>& t) {
    const std::size_t n = g.n(0);
    std::vector<double> phi(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) phi[i] = phi[i - 1] + 0.5 * g.h(0) * (t[i - 1] + t[i]);
    double mid = phi[n / 2];
    for (double& v : phi) v -= mid;
    return GridField(g, std::move(phi));
}

void fill_hessians(BrenierSolution& sol) {
    sol.hessian.assign(sol.grid.size(), std::nullopt);
    for (std::size_t i = 0; i < sol.grid.size(); ++i)
        if (sol.potential.hessian_stencil_ok(i)) sol.hessian[i] = sol.potential.hessian_fd(i);
}

}  // namespace

BrenierSolution brenier_1d(const TransportProblem& problem) {
    require(problem.dim() == 1 && problem.nu.dim() == 1, "brenier_1d: problem must be one-dimensional");
    const GridSpec& gm = problem.mu_grid;
    const GridSpec& gn = problem.nu_grid;
    Marginal a = discretize(problem.mu, gm, "mu");
    Marginal b = discretize(problem.nu, gn, "nu");
    std::vector<double> rho_a(a.prob), rho_b(b.prob);
    for (auto& v : rho_a) v /= gm.h(0);
    for (auto& v : rho_b) v /= gn.h(0);
    Cdf1d fa(gm, rho_a), fb(gn, rho_b);
    if (!(fa.total > 0.0) || !(fb.total > 0.0)) throw MassError("brenier_1d: zero mass on the grid");

    const std::size_t n = gm.n(0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = fa.left[i] / fa.total;
        if (u <= 0.5) {
            t[i] = fb.inverse_left(u * fb.total);
        } else {
            double s = fa.right[i] / fa.total;
            t[i] = fb.inverse_right(s * fb.total);
        }
    }
    // Roundoff cannot be allowed to break monotonicity of a rearrangement.
    for (std::size_t i = 1; i < n; ++i) t[i] = std::max(t[i], t[i - 1]);

    BrenierSolution sol;
    sol.grid = gm;
    sol.central = gm.box().central(problem.central_fraction);
    sol.map.emplace_back(gm, t);
    sol.potential = potential_from_map_1d(gm, t);
    fill_hessians(sol);
    sol.meta.solver = "quantile1d";
    sol.meta.log_mass_mu = a.log_mass;
    sol.meta.log_mass_nu = b.log_mass;
    std::vector<std::pair<double, double>> push, target;
    for (std::size_t i = 0; i < n; ++i)
        if (a.prob[i] > 0) push.emplace_back(t[i], a.prob[i]);
    for (std::size_t j = 0; j < gn.size(); ++j)
        if (b.prob[j] > 0) target.emplace_back(gn.coord(0, j), b.prob[j]);
    sol.meta.push_tol = wasserstein1_1d(push, target);
    return sol;
}

// ---------------------------------------------------------------------------
// Entropic transport

namespace {

// out[i] = log sum_j exp(s[j] - |x_i - y_j|^2 / (2 eps)) for a separable
// quadratic cost, one axis at a time, optionally with the conditional means
// of y under the same weights.
class SeparableSoftmin {
public:
    SeparableSoftmin(const GridSpec& src, const GridSpec& dst, double eps) : src_(src), dst_(dst) {
        const int d = src.dim();
        cost_.resize(d);
        ys_.resize(d);
        for (int a = 0; a < d; ++a) {
            const std::size_t m = src.n(a), n = dst.n(a);
            cost_[a].resize(n * m);
            ys_[a].resize(m);
            for (std::size_t j = 0; j < m; ++j) ys_[a][j] = src.coord(a, j);
            for (std::size_t k = 0; k < n; ++k) {
                double x = dst.coord(a, k);
                for (std::size_t j = 0; j < m; ++j) {
                    double r = x - ys_[a][j];
                    cost_[a][k * m + j] = 0.5 * r * r / eps;
                }
            }
        }
    }

    void apply(const std::vector<double>& s, std::vector<double>& out,
               std::vector<std::vector<double>>* means) const {
        const int d = src_.dim();
        std::array<std::size_t, 3> shape{1, 1, 1};
        for (int a = 0; a < d; ++a) shape[a] = src_.n(a);
        std::vector<double> cur = s;
        // mean[b] is populated once axis b has been reduced.
        std::vector<std::vector<double>> mean(d);
        for (int a = d - 1; a >= 0; --a) {
            std::array<std::size_t, 3> next = shape;
            next[a] = dst_.n(a);
            auto stride = [&](const std::array<std::size_t, 3>& sh, int ax) {
                std::size_t st = 1;
                for (int b = ax + 1; b < d; ++b) st *= sh[b];
                return st;
            };
            std::size_t size_next = 1;
            for (int b = 0; b < d; ++b) size_next *= next[b];
            std::vector<double> nv(size_next);
            std::vector<std::vector<double>> nmean(d);
            if (means) {
                for (int b = a; b < d; ++b) nmean[b].assign(size_next, 0.0);
            }
            const std::size_t m = shape[a], n = next[a];
            const std::size_t is = stride(shape, a), os = stride(next, a);
            const std::size_t inner = is;
            std::size_t outer = 1;
            for (int b = 0; b < a; ++b) outer *= shape[b];
            const double* ya = ys_[a].data();
            std::vector<double> line(m);
            std::array<std::vector<double>, 3> mline;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t ib = o * m * inner + in;
                    const std::size_t ob = o * n * inner + in;
                    for (std::size_t j = 0; j < m; ++j) line[j] = cur[ib + j * is];
                    if (means)
                        for (int b = a + 1; b < d; ++b) {
                            mline[b].resize(m);
                            for (std::size_t j = 0; j < m; ++j) mline[b][j] = mean[b][ib + j * is];
                        }
                    for (std::size_t k = 0; k < n; ++k) {
                        const double* c = cost_[a].data() + k * m;
                        double mx = -kInf;
                        for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, line[j] - c[j]);
                        const std::size_t oi = ob + k * os;
                        if (mx == -kInf) {
                            nv[oi] = -kInf;
                            continue;
                        }
                        // Terms more than 50 below the max are below roundoff of the sum.
                        double sum = 0.0;
                        if (!means) {
                            for (std::size_t j = 0; j < m; ++j) {
                                double t = line[j] - c[j] - mx;
                                if (t > -50.0) sum += std::exp(t);
                            }
                        } else {
                            double sy = 0.0;
                            std::array<double, 3> sm{0, 0, 0};
                            for (std::size_t j = 0; j < m; ++j) {
                                double t = line[j] - c[j] - mx;
                                if (t <= -50.0) continue;
                                double e = std::exp(t);
                                sum += e;
                                sy += e * ya[j];
                                for (int b = a + 1; b < d; ++b) sm[b] += e * mline[b][j];
                            }
                            nmean[a][oi] = sy / sum;
                            for (int b = a + 1; b < d; ++b) nmean[b][oi] = sm[b] / sum;
                        }
                        nv[oi] = mx + std::log(sum);
                    }
                }
            }
            cur = std::move(nv);
            if (means)
                for (int b = a; b < d; ++b) mean[b] = std::move(nmean[b]);
            shape = next;
        }
        out = std::move(cur);
        if (means) *means = std::move(mean);
    }

private:
    GridSpec src_, dst_;
    std::vector<std::vector<double>> cost_;
    std::vector<std::vector<double>> ys_;
};

double diameter_of_union(const GridSpec& a, const GridSpec& b) {
    double s = 0.0;
    for (int k = 0; k < a.dim(); ++k) {
        double lo = std::min(a.box().low[k], b.box().low[k]);
        double hi = std::max(a.box().high[k], b.box().high[k]);
        s += (hi - lo) * (hi - lo);
    }
    return std::sqrt(s);
}

double resolution_scale(const TransportProblem& p) {
    double s = 0.0;
    for (int a = 0; a < p.dim(); ++a) s = std::max(s, p.mu_grid.h(a) * p.nu_grid.h(a));
    return s;
}

}  // namespace

std::vector<double> default_epsilon_ladder(const TransportProblem& p) {
    const auto& o = p.entropic;
    double diam = diameter_of_union(p.mu_grid, p.nu_grid);
    double floor = o.floor_factor * o.floor_factor * resolution_scale(p);
    std::vector<double> eps;
    for (int k = 0; k < o.levels; ++k) {
        double e = diam * diam * std::pow(4.0, -k);
        if (e < floor) break;
        eps.push_back(e);
    }
    return eps;
}

BrenierSolution brenier_entropic(const TransportProblem& problem) {
    const int d = problem.dim();
    require(d >= 1 && d <= 3 && problem.nu.dim() == d, "brenier_entropic: dimension must be 1, 2 or 3");
    const GridSpec& gm = problem.mu_grid;
    const GridSpec& gn = problem.nu_grid;
    const auto& opts = problem.entropic;
    require(opts.relaxation >= 1.0 && opts.relaxation < 2.0, "brenier_entropic: relaxation must be in [1, 2)");

    std::vector<double> eps = opts.epsilons.empty() ? default_epsilon_ladder(problem) : opts.epsilons;
    if (eps.empty()) throw ScheduleError("brenier_entropic: empty epsilon schedule");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] > 0.0)) throw ScheduleError("brenier_entropic: epsilon must be positive");
        if (k > 0 && !(eps[k] < eps[k - 1]))
            throw ScheduleError("brenier_entropic: epsilon schedule must be strictly decreasing");
    }
    if (std::sqrt(eps.back()) < 0.5 * std::sqrt(resolution_scale(problem)))
        throw ScheduleError("brenier_entropic: final epsilon is below what the grids resolve");
    if (opts.extrapolate && eps.size() < 2)
        throw ScheduleError("brenier_entropic: extrapolation needs at least two epsilon levels");

    Marginal a = discretize(problem.mu, gm, "mu");
    Marginal b = discretize(problem.nu, gn, "nu");

    std::vector<double> f(gm.size(), 0.0), g(gn.size(), 0.0);
    std::vector<double> s_mu(gm.size()), s_nu(gn.size()), lse_mu, lse_nu;
    SolverDiagnostics meta;
    meta.solver = "entropic";
    meta.epsilon_ladder = eps;
    meta.log_mass_mu = a.log_mass;
    meta.log_mass_nu = b.log_mass;

    std::vector<std::vector<double>> phis;
    std::vector<std::vector<std::vector<double>>> maps;
    const double w = opts.relaxation;

    for (double e : eps) {
        SeparableSoftmin to_mu(gn, gm, e), to_nu(gm, gn, e);
        double err = kInf;
        int it = 0;
        std::vector<double> fn(gm.size());
        while (it < opts.max_iters) {
            ++it;
            for (std::size_t i = 0; i < gm.size(); ++i) s_mu[i] = f[i] / e + a.logprob[i];
            to_nu.apply(s_mu, lse_nu, nullptr);
            for (std::size_t j = 0; j < gn.size(); ++j) {
                double gj = -e * lse_nu[j];
                g[j] = (w == 1.0 || !std::isfinite(g[j])) ? gj : (1 - w) * g[j] + w * gj;
            }
            for (std::size_t j = 0; j < gn.size(); ++j) s_nu[j] = g[j] / e + b.logprob[j];
            to_mu.apply(s_nu, lse_mu, nullptr);
            err = 0.0;
            for (std::size_t i = 0; i < gm.size(); ++i) {
                fn[i] = -e * lse_mu[i];
                if (a.prob[i] > 0.0) err += a.prob[i] * std::abs(std::expm1((f[i] - fn[i]) / e));
            }
            for (std::size_t i = 0; i < gm.size(); ++i) f[i] = (w == 1.0) ? fn[i] : (1 - w) * f[i] + w * fn[i];
            if (err <= opts.tol) break;
        }
        meta.iterations.push_back(it);
        meta.marginal_errors.push_back(err);
        if (!(err <= opts.tol))
            throw ConvergenceError("brenier_entropic: no convergence at epsilon=" + std::to_string(e) +
                                       " within " + std::to_string(opts.max_iters) + " iterations",
                                   err);

        // Barycentric map and c-concave potential from the final g.
        for (std::size_t j = 0; j < gn.size(); ++j) s_nu[j] = g[j] / e + b.logprob[j];
        std::vector<std::vector<double>> means;
        to_mu.apply(s_nu, lse_mu, &means);
        std::vector<double> phi(gm.size());
        for (std::size_t i = 0; i < gm.size(); ++i) {
            double fi = -e * lse_mu[i];
            phi[i] = 0.5 * gm.point(i).squaredNorm() - fi;
        }
        phis.push_back(std::move(phi));
        maps.push_back(std::move(means));
    }
    meta.marginal_error = meta.marginal_errors.back();

    BrenierSolution sol;
    sol.grid = gm;
    sol.central = gm.box().central(problem.central_fraction);
    const std::size_t K = phis.size() - 1;
    auto extrapolate = [&](std::size_t k, std::vector<double>& phi, std::vector<std::vector<double>>& t) {
        double r = eps[k - 1] / eps[k];
        phi.resize(gm.size());
        for (std::size_t i = 0; i < gm.size(); ++i) phi[i] = (r * phis[k][i] - phis[k - 1][i]) / (r - 1);
        t.assign(d, std::vector<double>(gm.size()));
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < gm.size(); ++i)
                t[c][i] = (r * maps[k][c][i] - maps[k - 1][c][i]) / (r - 1);
        return r;
    };
    std::vector<double> phi;
    std::vector<std::vector<double>> t;
    if (opts.extrapolate) {
        sol.extrapolation_ratio = extrapolate(K, phi, t);
        if (K >= 2) {
            std::vector<double> pp;
            std::vector<std::vector<double>> tp;
            extrapolate(K - 1, pp, tp);
            sol.potential_previous = GridField(gm, std::move(pp));
        }
        for (std::size_t i = 0; i < gm.size(); ++i) {
            if (!sol.central.contains(gm.point(i), 1e-12)) continue;
            for (int c = 0; c < d; ++c)
                meta.extrapolation_shift = std::max(meta.extrapolation_shift, std::abs(t[c][i] - maps[K][c][i]));
        }
    } else {
        phi = phis[K];
        t = maps[K];
    }
    sol.potential = GridField(gm, std::move(phi));
    for (int c = 0; c < d; ++c) sol.map.emplace_back(gm, std::move(t[c]));
    fill_hessians(sol);

    std::vector<Vector> image(gm.size());
    for (std::size_t i = 0; i < gm.size(); ++i) image[i] = sol.map_at(i);
    meta.push_tol = push_forward_distance(gm, a.prob, image, gn, b.prob);
    sol.meta = std::move(meta);
    return sol;
}

BrenierSolution solve_transport(const TransportProblem& problem) {
    if (problem.solver == SolverKind::Quantile1D) return brenier_1d(problem);
    return brenier_entropic(problem);
}

// ---------------------------------------------------------------------------

ResidualReport monge_ampere_residual(const BrenierSolution& sol, const TransportProblem& problem) {
    const GridSpec& g = sol.grid;
    ResidualReport rep;
    std::vector<double> r(g.size(), kInf);
    double sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!sol.admissible(i)) continue;
        const SymMatrix& h = *sol.hessian[i];
        if (h.min_eigenvalue() <= 1e-8) {
            ++rep.masked;
            continue;
        }
        Vector x = g.point(i);
        double wv = problem.nu.value(sol.map_at(i));
        if (!std::isfinite(wv)) {
            ++rep.masked;
            continue;
        }
        double logdet = 0.0;
        for (int k = 0; k < h.dim(); ++k) logdet += std::log(h.eigenvalues()(k));
        double v = (problem.mu.value(x) + sol.meta.log_mass_mu) - (wv + sol.meta.log_mass_nu) + logdet;
        r[i] = v;
        rep.sup = std::max(rep.sup, std::abs(v));
        sq += v * v * g.cell_volume();
        ++rep.evaluated;
    }
    rep.l2 = std::sqrt(sq);
    rep.residual = GridField(g, std::move(r));
    return rep;
}

HessianSup sup_good_hessian(const BrenierSolution& sol, const GoodFunction& f) {
    require(f.dim() == sol.grid.dim(), "sup_good_hessian: dimension mismatch");
    HessianSup out;
    out.value = -kInf;
    double upper = -kInf;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        if (!sol.admissible(i)) continue;
        double v = eval_good(f, *sol.hessian[i]);
        ++out.nodes;
        double unc = 0.0;
        if (sol.potential.hessian_stencil_ok(i, 2))
            unc = std::abs(v - eval_good(f, sol.potential.hessian_fd(i, 2))) / 3.0;
        upper = std::max(upper, v + unc);
        if (v > out.value) {
            out.value = v;
            out.node = i;
        }
    }
    if (out.nodes == 0) throw DegenerateSolution("sup_good_hessian: no admissible node");
    out.point = sol.grid.point(out.node);
    out.stencil_margin = upper - out.value;
    if (sol.potential_previous) {
        double prev = -kInf;
        for (std::size_t i = 0; i < sol.grid.size(); ++i)
            if (sol.admissible(i) && sol.potential_previous->hessian_stencil_ok(i))
                prev = std::max(prev, eval_good(f, sol.potential_previous->hessian_fd(i)));
        double r = sol.extrapolation_ratio;
        out.extrapolation_margin = std::abs(out.value - prev) / (r * r - 1.0);
    }
    return out;
}

}  // namespace brenier
