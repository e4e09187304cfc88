#pragma once

// Legendre-Fenchel conjugates on tensor grids and the Hessian duality checks
// built on them.

#include <cstddef>
#include <vector>

#include "brenier/grid.hpp"
#include "brenier/potential.hpp"
#include "brenier/symcalc.hpp"

namespace brenier {

/// Exact discrete conjugate max_i <x_i, y> - f(x_i) of a grid field, with the
/// maximizing primal node for every dual node. Masked nodes are skipped.
struct DiscreteConjugate {
    GridField values;
    std::vector<std::size_t> argmax;
};

/// Linear-time per line (convex hull + merge), one axis at a time.
DiscreteConjugate discrete_legendre(const GridField& f, const GridSpec& dual);

struct ConjugateGrids {
    GridSpec primal;
    GridSpec dual;
};

struct ConjugateOptions {
    /// Polish each dual node with Newton's method on <x, y> - W(x) when W has
    /// closed-form derivatives.
    bool refine = true;
    /// Throw RangeError when an interior dual node is maximized on the primal
    /// boundary. Skipped for potentials with a bounded support.
    bool check_range = true;
};

struct Conjugate {
    GridField field;
    /// Maximizer per dual node, row-major with dim() entries per node.
    std::vector<double> argmax;
    /// Maximizer lies in the interior of the support of W.
    std::vector<char> interior;
    bool refined = false;
    std::size_t refine_failures = 0;

    Vector maximizer(std::size_t node) const;
};

/// W* on the dual grid. Requires W.convex().
Conjugate legendre_transform(const Potential& w, const ConjugateGrids& grids,
                             const ConjugateOptions& opts = {});

/// max |W**(x) - W(x)| over interior primal nodes whose gradient image lies
/// inside the dual box, with both transforms taken on the grids.
double conjugate_involution_gap(const Potential& w, const ConjugateGrids& grids,
                                bool refine = false);

/// ||Hess W*(grad W(x)) - Hess W(x)^-1||_F with Hess W* interpolated from
/// finite differences on the conjugate grid. Throws RangeError when grad W(x)
/// is not strictly inside the dual grid.
double hessian_duality_gap(const Potential& w, const Conjugate& conj, const Vector& x);

/// Empirical supremum with its stencil-based uncertainty.
struct ConstantEstimate {
    double value = 0.0;
    /// Absolute uncertainty of value.
    double margin = 0.0;
    double h = 0.0;
    std::size_t nodes = 0;
    std::size_t skipped = 0;
    Vector argmax;
};

/// Largest shift of a dual second difference caused by skipping the Newton
/// polish, per unit Lipschitz constant of f.
double unrefined_conjugate_margin(const Potential& w, const ConjugateGrids& grids);

/// sup over admissible interior dual nodes of f(Hess W*), i.e. 1/lambda_W.
ConstantEstimate estimate_dual_constant(const Potential& w, const GoodFunction& f,
                                        const ConjugateGrids& grids,
                                        const ConjugateOptions& opts = {});
ConstantEstimate estimate_dual_constant(const Conjugate& conj, const GoodFunction& f,
                                        double lft_margin = 0.0);

}  // namespace brenier
