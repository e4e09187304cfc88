#pragma once

// Convex potentials V, W with e^{-V} a density: closed-form families, discrete
// mollifications of them, and fields sampled on grids.

#include <optional>
#include <string>
#include <vector>

#include "brenier/grid.hpp"
#include "brenier/symcalc.hpp"

namespace brenier {

/// Smooth (or, for Abs, Lipschitz) perturbation P evaluated at z = L x + s.
enum class Perturbation { None, CosX1, Quartic, Cosh, Abs };

const char* perturbation_name(Perturbation p);
Perturbation perturbation_from_name(const std::string& name);

class Potential {
public:
    enum class Form { Analytic, Mollified, Grid };

    Potential() = default;

    /// offset + x^T Q x / 2 - q^T x.
    static Potential quadratic(const SymMatrix& q_matrix, const Vector& q_linear = Vector(),
                               double offset = 0.0);
    /// Normalized Gaussian log-density, V = (x-m)^T C^-1 (x-m)/2 + log det(2 pi C)/2.
    static Potential gaussian(const Vector& mean, const SymMatrix& cov);
    /// N(0, sigma^2 Id).
    static Potential isotropic_gaussian(int dim, double sigma);
    /// Sampled values; +inf marks points outside the support.
    static Potential grid(GridField field, bool convex);
    /// x -> sum_k weights[k] * base(x - offsets[k]) + constant, and +inf outside
    /// the closed ball of the given radius around 0 when one is given.
    static Potential mollified(const Potential& base, std::vector<Vector> offsets,
                               std::vector<double> weights, double constant,
                               std::optional<double> radius);

    /// Adds amplitude * P(L x + shift); only for the analytic form.
    Potential with_perturbation(Perturbation p, double amplitude, const Matrix& l = Matrix(),
                                const Vector& shift = Vector()) const;
    /// x -> V(M x + b) + add; only for the analytic form.
    Potential compose_linear(const Matrix& m, const Vector& b, double add = 0.0) const;
    /// c V + x^T Q x / 2 + add; only for the analytic form.
    Potential scaled_plus_quadratic(double c, const SymMatrix& q, double add = 0.0) const;
    Potential with_domain(const Box& box) const;
    Potential shifted(double add) const;

    Form form() const { return form_; }
    int dim() const { return dim_; }
    bool convex() const { return convex_; }
    /// Twice differentiable everywhere in the support with closed-form derivatives.
    bool smooth() const;
    const Box& domain() const { return domain_; }
    std::optional<double> support_radius() const { return radius_; }
    bool in_support(const Vector& x) const;

    double value(const Vector& x) const;
    /// Closed form for analytic and mollified forms; 4th-order central
    /// differences of the interpolant for grid fields.
    Vector gradient(const Vector& x) const;
    /// Closed form for analytic and mollified forms; interpolated
    /// finite-difference Hessians for grid fields.
    SymMatrix hessian(const Vector& x) const;

    GridField sample(const GridSpec& spec) const;
    std::string describe() const;

    // Accessors used by serialization.
    const SymMatrix& quad_matrix() const { return qm_; }
    const Vector& quad_linear() const { return ql_; }
    double offset() const { return offset_; }
    Perturbation perturbation() const { return pert_; }
    double amplitude() const { return amp_; }
    const Matrix& pert_matrix() const { return pl_; }
    const Vector& pert_shift() const { return ps_; }
    const GridField& field() const { return field_; }
    const std::vector<Potential>& base() const { return base_; }
    const std::vector<Vector>& offsets() const { return offsets_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    double analytic_value(const Vector& x) const;
    Vector analytic_gradient(const Vector& x) const;
    Matrix analytic_hessian(const Vector& x) const;

    Form form_ = Form::Analytic;
    int dim_ = 0;
    bool convex_ = true;
    Box domain_;

    // Analytic form.
    SymMatrix qm_;
    Vector ql_;
    double offset_ = 0.0;
    Perturbation pert_ = Perturbation::None;
    double amp_ = 0.0;
    Matrix pl_;
    Vector ps_;

    // Mollified form (base_ holds one analytic potential).
    std::vector<Potential> base_;
    std::vector<Vector> offsets_;
    std::vector<double> weights_;
    std::optional<double> radius_;

    // Grid form.
    GridField field_;
};

}  // namespace brenier
