#include "brenier/potential.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "brenier/error.hpp"

namespace brenier {

const char* perturbation_name(Perturbation p) {
    switch (p) {
        case Perturbation::None: return "none";
        case Perturbation::CosX1: return "cos_x1";
        case Perturbation::Quartic: return "quartic";
        case Perturbation::Cosh: return "cosh";
        case Perturbation::Abs: return "abs";
    }
    return "none";
}

Perturbation perturbation_from_name(const std::string& name) {
    if (name == "none") return Perturbation::None;
    if (name == "cos_x1") return Perturbation::CosX1;
    if (name == "quartic") return Perturbation::Quartic;
    if (name == "cosh") return Perturbation::Cosh;
    if (name == "abs") return Perturbation::Abs;
    throw ConfigError("unknown perturbation '" + name + "'");
}

Potential Potential::quadratic(const SymMatrix& q_matrix, const Vector& q_linear, double offset) {
    Potential p;
    p.form_ = Form::Analytic;
    p.dim_ = q_matrix.dim();
    require(p.dim_ >= 1 && p.dim_ <= 3, "Potential: dimension must be 1, 2 or 3");
    p.qm_ = q_matrix;
    p.ql_ = q_linear.size() == 0 ? Vector::Zero(p.dim_) : q_linear;
    require(p.ql_.size() == p.dim_, "Potential: linear term has wrong dimension");
    p.offset_ = offset;
    p.convex_ = q_matrix.is_psd(1e-12 * std::max(1.0, std::abs(q_matrix.max_eigenvalue())));
    p.pl_ = Matrix::Identity(p.dim_, p.dim_);
    p.ps_ = Vector::Zero(p.dim_);
    return p;
}

Potential Potential::gaussian(const Vector& mean, const SymMatrix& cov) {
    const int d = cov.dim();
    require(mean.size() == d, "gaussian: mean and covariance dimensions differ");
    if (cov.min_eigenvalue() <= 0.0) throw ContractViolation("gaussian: covariance is not positive definite");
    SymMatrix prec = cov.inverse();
    Vector lin = prec.dense() * mean;
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += std::log(2.0 * std::numbers::pi * cov.eigenvalues()(i));
    return quadratic(prec, lin, 0.5 * mean.dot(lin) + 0.5 * logdet);
}

Potential Potential::isotropic_gaussian(int dim, double sigma) {
    require(sigma > 0.0, "isotropic_gaussian: sigma must be positive");
    return gaussian(Vector::Zero(dim), SymMatrix::identity(dim) * (sigma * sigma));
}

Potential Potential::grid(GridField field, bool convex) {
    Potential p;
    p.form_ = Form::Grid;
    p.dim_ = field.dim();
    p.convex_ = convex;
    p.domain_ = field.spec().box();
    if (convex) {
        auto scan = field.convexity_scan();
        if (!scan.ok())
            throw ContractViolation("grid potential flagged convex fails the convexity scan");
    }
    p.field_ = std::move(field);
    return p;
}

Potential Potential::mollified(const Potential& base, std::vector<Vector> offsets,
                               std::vector<double> weights, double constant,
                               std::optional<double> radius) {
    require(base.form_ == Form::Analytic, "mollified: base potential must be analytic");
    require(!offsets.empty() && offsets.size() == weights.size(),
            "mollified: offsets and weights must match");
    Potential p;
    p.form_ = Form::Mollified;
    p.dim_ = base.dim_;
    p.convex_ = base.convex_;
    p.domain_ = base.domain_;
    p.base_.push_back(base);
    p.offsets_ = std::move(offsets);
    p.weights_ = std::move(weights);
    p.offset_ = constant;
    p.radius_ = radius;
    return p;
}

Potential Potential::with_perturbation(Perturbation pert, double amplitude, const Matrix& l,
                                       const Vector& shift) const {
    require(form_ == Form::Analytic, "with_perturbation: analytic potentials only");
    require(pert_ == Perturbation::None || pert == Perturbation::None,
            "with_perturbation: potential already carries a perturbation");
    Potential p = *this;
    p.pert_ = pert;
    p.amp_ = amplitude;
    p.pl_ = l.size() == 0 ? Matrix::Identity(dim_, dim_) : l;
    p.ps_ = shift.size() == 0 ? Vector::Zero(dim_) : shift;
    require(p.pl_.rows() == dim_ && p.pl_.cols() == dim_ && p.ps_.size() == dim_,
            "with_perturbation: wrong dimensions");
    if (pert == Perturbation::CosX1 && amplitude != 0.0) {
        // cos has curvature down to -|amp|; keep the flag honest.
        Matrix l0 = p.pl_.row(0).transpose() * p.pl_.row(0);
        SymMatrix worst(qm_.dense() - std::abs(amplitude) * l0);
        p.convex_ = convex_ && worst.is_psd(1e-12);
    } else if (amplitude < 0.0 && pert != Perturbation::None) {
        p.convex_ = false;
    }
    return p;
}

Potential Potential::compose_linear(const Matrix& m, const Vector& b, double add) const {
    require(form_ == Form::Analytic, "compose_linear: analytic potentials only");
    require(m.rows() == dim_ && m.cols() == dim_ && b.size() == dim_,
            "compose_linear: wrong dimensions");
    Potential p = *this;
    Matrix q = qm_.dense();
    p.qm_ = SymMatrix(m.transpose() * q * m);
    p.ql_ = m.transpose() * (ql_ - q * b);
    p.offset_ = offset_ + 0.5 * b.dot(q * b) - ql_.dot(b) + add;
    p.ps_ = pl_ * b + ps_;
    p.pl_ = pl_ * m;
    p.domain_ = Box();
    return p;
}

Potential Potential::scaled_plus_quadratic(double c, const SymMatrix& q, double add) const {
    require(form_ == Form::Analytic, "scaled_plus_quadratic: analytic potentials only");
    require(c >= 0.0 && q.dim() == dim_, "scaled_plus_quadratic: bad arguments");
    Potential p = *this;
    p.qm_ = qm_ * c + q;
    p.ql_ = ql_ * c;
    p.offset_ = offset_ * c + add;
    p.amp_ = amp_ * c;
    p.convex_ = convex_ && q.is_psd(1e-12);
    return p;
}

Potential Potential::with_domain(const Box& box) const {
    require(box.dim == dim_, "with_domain: dimension mismatch");
    Potential p = *this;
    p.domain_ = box;
    return p;
}

Potential Potential::shifted(double add) const {
    Potential p = *this;
    if (form_ == Form::Grid) {
        for (auto& v : p.field_.values())
            if (v != kInf) v += add;
    } else {
        p.offset_ += add;
    }
    return p;
}

bool Potential::smooth() const {
    switch (form_) {
        case Form::Analytic: return pert_ != Perturbation::None ? pert_ != Perturbation::Abs : true;
        case Form::Mollified: return base_[0].smooth();
        case Form::Grid: return false;
    }
    return false;
}

bool Potential::in_support(const Vector& x) const {
    switch (form_) {
        case Form::Analytic: return true;
        case Form::Mollified: return !radius_ || x.norm() <= *radius_;
        case Form::Grid:
            if (!field_.spec().box().contains(x)) return false;
            return field_.interpolate(x) != kInf;
    }
    return false;
}

double Potential::analytic_value(const Vector& x) const {
    double v = offset_ + 0.5 * x.dot(qm_.dense() * x) - ql_.dot(x);
    if (pert_ == Perturbation::None || amp_ == 0.0) return v;
    Vector z = pl_ * x + ps_;
    double p = 0.0;
    switch (pert_) {
        case Perturbation::CosX1: p = std::cos(z(0)); break;
        case Perturbation::Quartic:
            for (int i = 0; i < dim_; ++i) p += 0.25 * std::pow(z(i), 4);
            break;
        case Perturbation::Cosh:
            for (int i = 0; i < dim_; ++i) p += std::cosh(z(i)) - 1.0;
            break;
        case Perturbation::Abs:
            for (int i = 0; i < dim_; ++i) p += std::abs(z(i));
            break;
        case Perturbation::None: break;
    }
    return v + amp_ * p;
}

Vector Potential::analytic_gradient(const Vector& x) const {
    Vector g = qm_.dense() * x - ql_;
    if (pert_ == Perturbation::None || amp_ == 0.0) return g;
    Vector z = pl_ * x + ps_;
    Vector gz = Vector::Zero(dim_);
    switch (pert_) {
        case Perturbation::CosX1: gz(0) = -std::sin(z(0)); break;
        case Perturbation::Quartic:
            for (int i = 0; i < dim_; ++i) gz(i) = z(i) * z(i) * z(i);
            break;
        case Perturbation::Cosh:
            for (int i = 0; i < dim_; ++i) gz(i) = std::sinh(z(i));
            break;
        case Perturbation::Abs:
            for (int i = 0; i < dim_; ++i) gz(i) = (z(i) > 0) - (z(i) < 0);
            break;
        case Perturbation::None: break;
    }
    return g + amp_ * (pl_.transpose() * gz);
}

Matrix Potential::analytic_hessian(const Vector& x) const {
    Matrix h = qm_.dense();
    if (pert_ == Perturbation::None || amp_ == 0.0) return h;
    Vector z = pl_ * x + ps_;
    Vector hz = Vector::Zero(dim_);
    switch (pert_) {
        case Perturbation::CosX1: hz(0) = -std::cos(z(0)); break;
        case Perturbation::Quartic:
            for (int i = 0; i < dim_; ++i) hz(i) = 3.0 * z(i) * z(i);
            break;
        case Perturbation::Cosh:
            for (int i = 0; i < dim_; ++i) hz(i) = std::cosh(z(i));
            break;
        case Perturbation::Abs:
        case Perturbation::None: break;
    }
    return h + amp_ * (pl_.transpose() * hz.asDiagonal() * pl_);
}

double Potential::value(const Vector& x) const {
    require(x.size() == dim_, "Potential::value: dimension mismatch");
    switch (form_) {
        case Form::Analytic: return analytic_value(x);
        case Form::Mollified: {
            if (!in_support(x)) return kInf;
            double v = offset_;
            for (std::size_t k = 0; k < offsets_.size(); ++k)
                v += weights_[k] * base_[0].analytic_value(x - offsets_[k]);
            return v;
        }
        case Form::Grid: return field_.interpolate(x);
    }
    return kInf;
}

Vector Potential::gradient(const Vector& x) const {
    require(x.size() == dim_, "Potential::gradient: dimension mismatch");
    switch (form_) {
        case Form::Analytic: return analytic_gradient(x);
        case Form::Mollified: {
            if (!in_support(x)) throw DomainError("gradient: point outside the support");
            Vector g = Vector::Zero(dim_);
            for (std::size_t k = 0; k < offsets_.size(); ++k)
                g += weights_[k] * base_[0].analytic_gradient(x - offsets_[k]);
            return g;
        }
        case Form::Grid: {
            Vector g(dim_);
            for (int a = 0; a < dim_; ++a) {
                double h = field_.spec().h(a);
                auto at = [&](double s) {
                    Vector y = x;
                    y(a) += s;
                    return field_.interpolate(y);
                };
                double v = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
                if (!std::isfinite(v)) throw DomainError("gradient: stencil touches a masked node");
                g(a) = v;
            }
            return g;
        }
    }
    return Vector();
}

SymMatrix Potential::hessian(const Vector& x) const {
    require(x.size() == dim_, "Potential::hessian: dimension mismatch");
    switch (form_) {
        case Form::Analytic: return SymMatrix(analytic_hessian(x));
        case Form::Mollified: {
            if (!in_support(x)) throw DomainError("hessian: point outside the support");
            Matrix h = Matrix::Zero(dim_, dim_);
            for (std::size_t k = 0; k < offsets_.size(); ++k)
                h += weights_[k] * base_[0].analytic_hessian(x - offsets_[k]);
            return SymMatrix(h);
        }
        case Form::Grid: {
            auto h = field_.hessian_at(x);
            if (!h) throw StencilError("hessian: no finite-difference stencil near the point");
            return *h;
        }
    }
    return SymMatrix();
}

GridField Potential::sample(const GridSpec& spec) const {
    require(spec.dim() == dim_, "Potential::sample: dimension mismatch");
    std::vector<double> v(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        double val = value(spec.point(i));
        v[i] = std::isfinite(val) ? val : kInf;
    }
    return GridField(spec, std::move(v));
}

std::string Potential::describe() const {
    std::ostringstream os;
    switch (form_) {
        case Form::Analytic:
            os << "analytic(d=" << dim_ << ", lambda(Q)=[" << qm_.min_eigenvalue() << ", "
               << qm_.max_eigenvalue() << "]";
            if (pert_ != Perturbation::None) os << ", " << perturbation_name(pert_) << "*" << amp_;
            os << ")";
            break;
        case Form::Mollified:
            os << "mollified(" << base_[0].describe() << ", " << offsets_.size() << " taps";
            if (radius_) os << ", R=" << *radius_;
            os << ")";
            break;
        case Form::Grid: os << "grid(d=" << dim_ << ", " << field_.size() << " nodes)"; break;
    }
    return os.str();
}

}  // namespace brenier
