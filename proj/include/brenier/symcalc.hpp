#pragma once

// Calculus on symmetric matrices: spectral "good" functions, their
// subdifferentials, and the matrix inequalities used by the Hessian bounds.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace brenier {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric d x d matrix stored as its lower triangle, with the
/// eigendecomposition computed once at construction. Eigenvalues are kept in
/// non-increasing order and column i of eigenvectors() belongs to
/// eigenvalues()[i].
class SymMatrix {
public:
    SymMatrix() = default;
    /// Symmetrizes the input as (A + A^T) / 2.
    explicit SymMatrix(const Matrix& dense);

    static SymMatrix zero(int dim);
    static SymMatrix identity(int dim);
    static SymMatrix diagonal(std::span<const double> diag);
    static SymMatrix diagonal(std::initializer_list<double> diag);
    /// Packed lower triangle, row by row: (0,0), (1,0), (1,1), (2,0), ...
    static SymMatrix from_packed(int dim, std::vector<double> packed);
    /// Row-major d*d entries; throws ContractViolation when not symmetric.
    static SymMatrix from_row_major(int dim, std::span<const double> entries);
    /// U diag(lambda) U^T.
    static SymMatrix from_spectrum(const Matrix& vectors, const Vector& values);

    int dim() const { return dim_; }
    double operator()(int i, int j) const;
    const std::vector<double>& packed() const { return packed_; }
    Matrix dense() const;
    std::vector<double> row_major() const;

    const Vector& eigenvalues() const { return eigenvalues_; }
    const Matrix& eigenvectors() const { return eigenvectors_; }
    double max_eigenvalue() const { return eigenvalues_(0); }
    double min_eigenvalue() const { return eigenvalues_(dim_ - 1); }

    double trace() const;
    double frobenius_norm() const;
    bool is_psd(double tol = 0.0) const { return min_eigenvalue() >= -tol; }

    /// Throws SingularMatrix when min |eigenvalue| <= 1e-12 * max(1, |lambda|_max).
    SymMatrix inverse() const;
    /// Principal square root; negative eigenvalues are clamped to zero.
    SymMatrix sqrt() const;
    /// A^T X A for a general square A.
    SymMatrix congruence(const Matrix& a) const;

    SymMatrix operator+(const SymMatrix& other) const;
    SymMatrix operator-(const SymMatrix& other) const;
    SymMatrix operator*(double s) const;
    friend SymMatrix operator*(double s, const SymMatrix& m) { return m * s; }

private:
    void decompose();

    int dim_ = 0;
    std::vector<double> packed_;
    Vector eigenvalues_;
    Matrix eigenvectors_;
};

/// Frobenius inner product <A, B> = Tr(B^T A).
double inner(const SymMatrix& a, const SymMatrix& b);

enum class GoodKind { Trace, LambdaMax, SumTopK, PNormPositive, HkVariant, Anisotropic };

/// How to read the product formula for H_k. Multiplicative is the literal
/// product over index multisets; Additive replaces the product by the sum, i.e.
/// the complete homogeneous symmetric polynomial of the positive parts.
enum class HkNormalization { Multiplicative, Additive };

/// Tagged description of a candidate good function on d x d symmetric
/// matrices. Everything except HkVariant is a certified good function.
class GoodFunction {
public:
    static GoodFunction trace(int dim);
    static GoodFunction lambda_max(int dim);
    static GoodFunction sum_top_k(int dim, int k);
    static GoodFunction pnorm_positive(int dim, double p);
    static GoodFunction hk_variant(int dim, int k, HkNormalization norm);
    static GoodFunction anisotropic(SymMatrix weight);

    GoodKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int k() const { return k_; }
    double p() const { return p_; }
    HkNormalization normalization() const { return norm_; }
    const SymMatrix& weight() const { return weight_; }

    bool certified() const { return kind_ != GoodKind::HkVariant; }
    bool spectral() const { return kind_ != GoodKind::Anisotropic; }
    /// Same function for another dimension. Anisotropic has no such extension.
    GoodFunction with_dim(int dim) const;

    /// Symmetric gauge g with f(X) = g(lambda(X)); lambda in descending order.
    double gauge(std::span<const double> lambda) const;
    /// Short identifier such as "trace", "sum_top_k(2)", "pnorm_positive(2)".
    std::string name() const;

private:
    GoodFunction(GoodKind kind, int dim) : kind_(kind), dim_(dim) {}

    GoodKind kind_;
    int dim_;
    int k_ = 0;
    double p_ = 0.0;
    HkNormalization norm_ = HkNormalization::Multiplicative;
    SymMatrix weight_;
};

/// f(X). Throws ContractViolation on dimension mismatch. HkVariant with the
/// multiplicative reading returns 0 whenever some positive part vanishes.
double eval_good(const GoodFunction& f, const SymMatrix& x);

/// Upper bound on the Frobenius Lipschitz constant of a certified f, i.e. on
/// max ||Y||_F over Y in the subdifferential at 0.
double lipschitz_bound(const GoodFunction& f);

struct Counterexample {
    std::vector<SymMatrix> matrices;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct PropertyTally {
    int tested = 0;
    int passed = 0;
    std::optional<Counterexample> first_failure;
    bool ok() const { return passed == tested; }
};

struct GoodnessReport {
    PropertyTally convexity;
    PropertyTally monotonicity;
    PropertyTally positivity;
    PropertyTally homogeneity;
    bool all_passed() const {
        return convexity.ok() && monotonicity.ok() && positivity.ok() && homogeneity.ok();
    }
};

/// Randomized probe of the good-function axioms; a failing property is a
/// report outcome, not an error.
GoodnessReport check_goodness(const GoodFunction& f, int trials, std::uint64_t seed);

struct Subgradient {
    SymMatrix at;
    SymMatrix value;
};

/// One element of the subdifferential of f at X. Tied eigenvalues share the
/// average of the gauge subgradient, which makes the result independent of
/// the eigenbasis chosen inside each eigenspace.
Subgradient subgradient_at(const GoodFunction& f, const SymMatrix& x);

/// Largest normalized violation of the supporting inequality
/// (f(at) + <Z - at, Y> - f(Z)) / (1 + ||Z||_F) over random probes Z.
double supporting_violation(const GoodFunction& f, const Subgradient& s, int probes,
                            std::uint64_t seed);

/// max <X, Y> over sampled Y in the subdifferential at 0 (subgradients at
/// random base points). When include_self is set the sample also contains
/// subgradient_at(f, X), so the maximum equals f(X).
double support_representation_check(const GoodFunction& f, const SymMatrix& x, int samples,
                                    std::uint64_t seed, bool include_self = true);

/// min f(X) over X >= 0 with Tr X = 1. Throws GoodnessViolation when the
/// minimum is not positive or f(X) >= beta Tr X fails on random PSD probes.
double beta_min(const GoodFunction& f);

struct PdSubgradient {
    SymMatrix matrix;
    int steps = 0;
};

/// Positive definite element of the subdifferential at 0, built by averaging
/// subgradients until the kernel is empty. Throws GoodnessViolation when no
/// subgradient moves a kernel vector.
PdSubgradient construct_pd_subgradient(const GoodFunction& f);

/// Tr(H X H) Tr(X^-1) - Tr(H)^2, non-negative by Cauchy-Schwarz.
/// Throws SingularMatrix unless min eigenvalue of X exceeds 1e-12.
double frobenius_cs_gap(const SymMatrix& h, const SymMatrix& x);

// Random matrices shared by the property probes.
SymMatrix random_symmetric(int dim, std::mt19937_64& rng, double range = 10.0);
/// B B^T with B of the given rank (full rank when rank <= 0).
SymMatrix random_psd(int dim, std::mt19937_64& rng, double scale = 1.0, int rank = 0);

}  // namespace brenier
