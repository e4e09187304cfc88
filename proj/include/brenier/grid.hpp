#pragma once

// Uniform tensor grids over boxes in dimension 1..3 and scalar fields on them.

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "brenier/symcalc.hpp"

namespace brenier {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Axis-aligned box [low, high] in R^d.
struct Box {
    int dim = 0;
    std::array<double, 3> low{};
    std::array<double, 3> high{};

    static Box cube(int dim, double lo, double hi);
    bool contains(const Vector& x, double slack = 0.0) const;
    /// Concentric sub-box whose side lengths are `fraction` of the original.
    Box central(double fraction) const;
    Vector center() const;
    double diameter() const;
};

/// Node layout of a uniform grid: n[a] points on axis a, both box ends
/// included, flat index with the last axis fastest.
class GridSpec {
public:
    GridSpec() = default;
    GridSpec(const Box& box, std::array<std::size_t, 3> n);
    static GridSpec cube(int dim, double lo, double hi, std::size_t n);

    int dim() const { return box_.dim; }
    const Box& box() const { return box_; }
    std::size_t n(int axis) const { return n_[axis]; }
    const std::array<std::size_t, 3>& shape() const { return n_; }
    double h(int axis) const { return h_[axis]; }
    /// Product of spacings, the volume of one cell.
    double cell_volume() const;
    std::size_t size() const { return size_; }
    std::size_t stride(int axis) const { return stride_[axis]; }

    double coord(int axis, std::size_t i) const { return box_.low[axis] + h_[axis] * double(i); }
    std::array<std::size_t, 3> unravel(std::size_t flat) const;
    std::size_t ravel(const std::array<std::size_t, 3>& idx) const;
    Vector point(std::size_t flat) const;
    /// True when every index is at least `margin` nodes away from both ends.
    bool interior(std::size_t flat, std::size_t margin = 1) const;

    bool operator==(const GridSpec& other) const;

private:
    Box box_;
    std::array<std::size_t, 3> n_{1, 1, 1};
    std::array<double, 3> h_{};
    std::array<std::size_t, 3> stride_{};
    std::size_t size_ = 0;
};

struct ConvexityScan {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst = 0.0;  // largest negative second difference, as a positive number
    double tolerance = 0.0;
    bool ok() const { return violations == 0; }
};

/// Scalar samples on a GridSpec. Nodes holding +inf are masked; every other
/// value must be finite.
class GridField {
public:
    GridField() = default;
    GridField(GridSpec spec, std::vector<double> values);
    static GridField sample(const GridSpec& spec, const std::function<double(const Vector&)>& fn);

    const GridSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim(); }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool masked(std::size_t i) const { return values_[i] == kInf; }
    std::size_t masked_count() const;
    /// Max |value| over unmasked nodes.
    double max_abs() const;

    /// Central second differences with step stride*h: 3-point stencil on the
    /// diagonal, 4-point cross stencil off it. Throws StencilError when the
    /// stencil leaves the grid or touches a masked node.
    SymMatrix hessian_fd(std::size_t node, std::size_t stride = 1) const;
    bool hessian_stencil_ok(std::size_t node, std::size_t stride = 1) const;
    /// Central first differences.
    Vector gradient_fd(std::size_t node) const;
    /// Multilinear interpolation of hessian_fd over the cell containing x;
    /// empty when a corner has no valid stencil.
    std::optional<SymMatrix> hessian_at(const Vector& x, std::size_t stride = 1) const;

    /// Multilinear interpolation. Throws DomainError outside the box; returns
    /// +inf when a corner of the cell is masked.
    double interpolate(const Vector& x) const;

    /// Midpoint convexity along every grid line, on unmasked triples. The
    /// tolerance is rel_tol * h^2 * max|values| per axis.
    ConvexityScan convexity_scan(double rel_tol = 1e-8) const;

private:
    GridSpec spec_;
    std::vector<double> values_;
};

/// Multilinear interpolation of a matrix-valued field given per node; nodes
/// without a value make the result empty.
std::optional<SymMatrix> interpolate_matrix(const GridSpec& spec,
                                            const std::vector<std::optional<SymMatrix>>& field,
                                            const Vector& x);

}  // namespace brenier
