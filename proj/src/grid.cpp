#include "brenier/grid.hpp"

#include <algorithm>
#include <cmath>

#include "brenier/error.hpp"

namespace brenier {

Box Box::cube(int dim, double lo, double hi) {
    require(dim >= 1 && dim <= 3, "Box: dimension must be 1, 2 or 3");
    Box b;
    b.dim = dim;
    for (int a = 0; a < dim; ++a) {
        b.low[a] = lo;
        b.high[a] = hi;
    }
    return b;
}

bool Box::contains(const Vector& x, double slack) const {
    if (x.size() != dim) return false;
    for (int a = 0; a < dim; ++a)
        if (x(a) < low[a] - slack || x(a) > high[a] + slack) return false;
    return true;
}

Box Box::central(double fraction) const {
    Box b = *this;
    for (int a = 0; a < dim; ++a) {
        double mid = 0.5 * (low[a] + high[a]);
        double half = 0.5 * fraction * (high[a] - low[a]);
        b.low[a] = mid - half;
        b.high[a] = mid + half;
    }
    return b;
}

Vector Box::center() const {
    Vector c(dim);
    for (int a = 0; a < dim; ++a) c(a) = 0.5 * (low[a] + high[a]);
    return c;
}

double Box::diameter() const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += (high[a] - low[a]) * (high[a] - low[a]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------

GridSpec::GridSpec(const Box& box, std::array<std::size_t, 3> n) : box_(box), n_(n) {
    require(box.dim >= 1 && box.dim <= 3, "GridSpec: dimension must be 1, 2 or 3");
    for (int a = box.dim; a < 3; ++a) n_[a] = 1;
    for (int a = 0; a < box.dim; ++a) {
        require(n_[a] >= 5, "GridSpec: at least 5 points per axis are required");
        require(box.high[a] > box.low[a], "GridSpec: empty box");
        h_[a] = (box.high[a] - box.low[a]) / double(n_[a] - 1);
    }
    for (int a = 0; a < box.dim; ++a) {
        std::size_t st = 1;
        for (int b = a + 1; b < box.dim; ++b) st *= n_[b];
        stride_[a] = st;
    }
    size_ = 1;
    for (int a = 0; a < box.dim; ++a) size_ *= n_[a];
}

GridSpec GridSpec::cube(int dim, double lo, double hi, std::size_t n) {
    return GridSpec(Box::cube(dim, lo, hi), {n, n, n});
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= h_[a];
    return v;
}

std::array<std::size_t, 3> GridSpec::unravel(std::size_t flat) const {
    std::array<std::size_t, 3> idx{};
    for (int a = 0; a < dim(); ++a) {
        idx[a] = flat / stride_[a];
        flat -= idx[a] * stride_[a];
    }
    return idx;
}

std::size_t GridSpec::ravel(const std::array<std::size_t, 3>& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim(); ++a) flat += idx[a] * stride_[a];
    return flat;
}

Vector GridSpec::point(std::size_t flat) const {
    auto idx = unravel(flat);
    Vector x(dim());
    for (int a = 0; a < dim(); ++a) x(a) = coord(a, idx[a]);
    return x;
}

bool GridSpec::interior(std::size_t flat, std::size_t margin) const {
    auto idx = unravel(flat);
    for (int a = 0; a < dim(); ++a)
        if (idx[a] < margin || idx[a] + margin >= n_[a]) return false;
    return true;
}

bool GridSpec::operator==(const GridSpec& other) const {
    if (dim() != other.dim()) return false;
    for (int a = 0; a < dim(); ++a)
        if (n_[a] != other.n_[a] || box_.low[a] != other.box_.low[a] ||
            box_.high[a] != other.box_.high[a])
            return false;
    return true;
}

// ---------------------------------------------------------------------------

GridField::GridField(GridSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
    require(values_.size() == spec_.size(), "GridField: value count does not match the grid");
    for (double v : values_)
        if (!std::isfinite(v) && v != kInf)
            throw ContractViolation("GridField: values must be finite or +inf");
}

GridField GridField::sample(const GridSpec& spec, const std::function<double(const Vector&)>& fn) {
    std::vector<double> v(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) v[i] = fn(spec.point(i));
    return GridField(spec, std::move(v));
}

std::size_t GridField::masked_count() const {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), kInf));
}

double GridField::max_abs() const {
    double m = 0.0;
    for (double v : values_)
        if (v != kInf) m = std::max(m, std::abs(v));
    return m;
}

bool GridField::hessian_stencil_ok(std::size_t node, std::size_t stride) const {
    const int d = dim();
    auto idx = spec_.unravel(node);
    for (int a = 0; a < d; ++a)
        if (idx[a] < stride || idx[a] + stride >= spec_.n(a)) return false;
    if (masked(node)) return false;
    for (int a = 0; a < d; ++a) {
        std::size_t s = stride * spec_.stride(a);
        if (masked(node + s) || masked(node - s)) return false;
        for (int b = a + 1; b < d; ++b) {
            std::size_t t = stride * spec_.stride(b);
            if (masked(node + s + t) || masked(node + s - t) || masked(node - s + t) ||
                masked(node - s - t))
                return false;
        }
    }
    return true;
}

SymMatrix GridField::hessian_fd(std::size_t node, std::size_t stride) const {
    if (!hessian_stencil_ok(node, stride))
        throw StencilError("hessian_fd: stencil leaves the grid or touches a masked node");
    const int d = dim();
    Matrix hm(d, d);
    const double c = values_[node];
    for (int a = 0; a < d; ++a) {
        std::size_t s = stride * spec_.stride(a);
        double ha = double(stride) * spec_.h(a);
        hm(a, a) = (values_[node + s] - 2.0 * c + values_[node - s]) / (ha * ha);
        for (int b = a + 1; b < d; ++b) {
            std::size_t t = stride * spec_.stride(b);
            double hb = double(stride) * spec_.h(b);
            double v = (values_[node + s + t] - values_[node + s - t] - values_[node - s + t] +
                        values_[node - s - t]) /
                       (4.0 * ha * hb);
            hm(a, b) = v;
            hm(b, a) = v;
        }
    }
    return SymMatrix(hm);
}

Vector GridField::gradient_fd(std::size_t node) const {
    const int d = dim();
    auto idx = spec_.unravel(node);
    Vector g(d);
    for (int a = 0; a < d; ++a) {
        if (idx[a] < 1 || idx[a] + 1 >= spec_.n(a))
            throw StencilError("gradient_fd: node on the boundary");
        std::size_t s = spec_.stride(a);
        if (masked(node + s) || masked(node - s))
            throw StencilError("gradient_fd: stencil touches a masked node");
        g(a) = (values_[node + s] - values_[node - s]) / (2.0 * spec_.h(a));
    }
    return g;
}

namespace {

// Cell lower corner and fractional offsets of x; throws outside the box.
void locate(const GridSpec& spec, const Vector& x, std::array<std::size_t, 3>& base,
            std::array<double, 3>& frac) {
    if (!spec.box().contains(x, 1e-12 * (1.0 + spec.box().diameter())))
        throw DomainError("interpolate: point outside the grid box");
    for (int a = 0; a < spec.dim(); ++a) {
        double s = (x(a) - spec.box().low[a]) / spec.h(a);
        s = std::clamp(s, 0.0, double(spec.n(a) - 1));
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(s), spec.n(a) - 2);
        base[a] = i;
        frac[a] = s - double(i);
    }
}

}  // namespace

double GridField::interpolate(const Vector& x) const {
    std::array<std::size_t, 3> base{};
    std::array<double, 3> frac{};
    locate(spec_, x, base, frac);
    const int d = dim();
    double acc = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int a = 0; a < d; ++a) {
            bool up = (corner >> a) & 1;
            w *= up ? frac[a] : 1.0 - frac[a];
            flat += (base[a] + (up ? 1 : 0)) * spec_.stride(a);
        }
        if (w == 0.0) continue;
        if (masked(flat)) return kInf;
        acc += w * values_[flat];
    }
    return acc;
}

std::optional<SymMatrix> GridField::hessian_at(const Vector& x, std::size_t stride) const {
    std::array<std::size_t, 3> base{};
    std::array<double, 3> frac{};
    locate(spec_, x, base, frac);
    const int d = dim();
    Matrix acc = Matrix::Zero(d, d);
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int a = 0; a < d; ++a) {
            bool up = (corner >> a) & 1;
            w *= up ? frac[a] : 1.0 - frac[a];
            flat += (base[a] + (up ? 1 : 0)) * spec_.stride(a);
        }
        if (w == 0.0) continue;
        if (!hessian_stencil_ok(flat, stride)) return std::nullopt;
        acc += w * hessian_fd(flat, stride).dense();
    }
    return SymMatrix(acc);
}

ConvexityScan GridField::convexity_scan(double rel_tol) const {
    ConvexityScan scan;
    const int d = dim();
    const double scale = max_abs();
    for (int a = 0; a < d; ++a) {
        const std::size_t s = spec_.stride(a);
        const double tol = rel_tol * spec_.h(a) * spec_.h(a) * scale;
        scan.tolerance = std::max(scan.tolerance, tol);
        for (std::size_t i = 0; i < size(); ++i) {
            auto idx = spec_.unravel(i);
            if (idx[a] == 0 || idx[a] + 1 >= spec_.n(a)) continue;
            if (masked(i) || masked(i - s) || masked(i + s)) continue;
            ++scan.checked;
            double second = values_[i + s] + values_[i - s] - 2.0 * values_[i];
            if (second < -tol) {
                ++scan.violations;
                scan.worst = std::max(scan.worst, -second);
            }
        }
    }
    return scan;
}

std::optional<SymMatrix> interpolate_matrix(const GridSpec& spec,
                                            const std::vector<std::optional<SymMatrix>>& field,
                                            const Vector& x) {
    require(field.size() == spec.size(), "interpolate_matrix: field does not match the grid");
    std::array<std::size_t, 3> base{};
    std::array<double, 3> frac{};
    locate(spec, x, base, frac);
    const int d = spec.dim();
    Matrix acc = Matrix::Zero(d, d);
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int a = 0; a < d; ++a) {
            bool up = (corner >> a) & 1;
            w *= up ? frac[a] : 1.0 - frac[a];
            flat += (base[a] + (up ? 1 : 0)) * spec.stride(a);
        }
        if (w == 0.0) continue;
        if (!field[flat]) return std::nullopt;
        acc += w * field[flat]->dense();
    }
    return SymMatrix(acc);
}

}  // namespace brenier
