#include "brenier/symcalc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "brenier/error.hpp"

namespace brenier {

namespace {

std::size_t packed_index(int i, int j) {
    if (i < j) std::swap(i, j);
    return static_cast<std::size_t>(i) * (i + 1) / 2 + j;
}

constexpr double kTieTol = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix::SymMatrix(const Matrix& dense) : dim_(static_cast<int>(dense.rows())) {
    require(dense.rows() == dense.cols(), "SymMatrix: matrix is not square");
    require(dim_ >= 1, "SymMatrix: empty matrix");
    packed_.resize(static_cast<std::size_t>(dim_) * (dim_ + 1) / 2);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j <= i; ++j) packed_[packed_index(i, j)] = 0.5 * (dense(i, j) + dense(j, i));
    decompose();
}

SymMatrix SymMatrix::zero(int dim) { return SymMatrix(Matrix::Zero(dim, dim)); }

SymMatrix SymMatrix::identity(int dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    Matrix m = Matrix::Zero(static_cast<int>(diag.size()), static_cast<int>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return SymMatrix(m);
}

SymMatrix SymMatrix::diagonal(std::initializer_list<double> diag) {
    return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

SymMatrix SymMatrix::from_packed(int dim, std::vector<double> packed) {
    require(dim >= 1, "SymMatrix: dimension must be positive");
    require(packed.size() == static_cast<std::size_t>(dim) * (dim + 1) / 2,
            "SymMatrix: packed storage has wrong length");
    SymMatrix m;
    m.dim_ = dim;
    m.packed_ = std::move(packed);
    m.decompose();
    return m;
}

SymMatrix SymMatrix::from_row_major(int dim, std::span<const double> entries) {
    require(dim >= 1 && entries.size() == static_cast<std::size_t>(dim) * dim,
            "SymMatrix: row-major data must have dim*dim entries");
    Matrix m(dim, dim);
    double scale = 0.0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            m(i, j) = entries[static_cast<std::size_t>(i) * dim + j];
            scale = std::max(scale, std::abs(m(i, j)));
        }
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12 * std::max(1.0, scale))
                throw ContractViolation("SymMatrix: row-major data is not symmetric");
    return SymMatrix(m);
}

SymMatrix SymMatrix::from_spectrum(const Matrix& vectors, const Vector& values) {
    return SymMatrix(vectors * values.asDiagonal() * vectors.transpose());
}

double SymMatrix::operator()(int i, int j) const { return packed_[packed_index(i, j)]; }

Matrix SymMatrix::dense() const {
    Matrix m(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = packed_[packed_index(i, j)];
    return m;
}

std::vector<double> SymMatrix::row_major() const {
    std::vector<double> out(static_cast<std::size_t>(dim_) * dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) out[static_cast<std::size_t>(i) * dim_ + j] = (*this)(i, j);
    return out;
}

void SymMatrix::decompose() {
    // Solved in extended precision and rounded, so the stored factors
    // reconstruct the matrix to within a few ulps of ||X||_F even at d = 16.
    using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::SelfAdjointEigenSolver<LongMatrix> solver(dense().cast<long double>());
    // Eigen sorts ascending; we store descending.
    eigenvalues_ = solver.eigenvalues().reverse().cast<double>();
    eigenvectors_ = solver.eigenvectors().rowwise().reverse().cast<double>();
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

double SymMatrix::frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) s += (*this)(i, j) * (*this)(i, j);
    return std::sqrt(s);
}

SymMatrix SymMatrix::inverse() const {
    const double big = std::max(std::abs(eigenvalues_(0)), std::abs(eigenvalues_(dim_ - 1)));
    const double small = eigenvalues_.cwiseAbs().minCoeff();
    if (small <= 1e-12 * std::max(1.0, big)) throw SingularMatrix("SymMatrix::inverse: matrix is singular");
    return from_spectrum(eigenvectors_, eigenvalues_.cwiseInverse());
}

SymMatrix SymMatrix::sqrt() const {
    return from_spectrum(eigenvectors_, eigenvalues_.cwiseMax(0.0).cwiseSqrt());
}

SymMatrix SymMatrix::congruence(const Matrix& a) const {
    return SymMatrix(Matrix(a.transpose() * dense() * a));
}

SymMatrix SymMatrix::operator+(const SymMatrix& other) const {
    require(dim_ == other.dim_, "SymMatrix: dimension mismatch");
    std::vector<double> p(packed_);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += other.packed_[i];
    return from_packed(dim_, std::move(p));
}

SymMatrix SymMatrix::operator-(const SymMatrix& other) const {
    require(dim_ == other.dim_, "SymMatrix: dimension mismatch");
    std::vector<double> p(packed_);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= other.packed_[i];
    return from_packed(dim_, std::move(p));
}

SymMatrix SymMatrix::operator*(double s) const {
    std::vector<double> p(packed_);
    for (double& v : p) v *= s;
    return from_packed(dim_, std::move(p));
}

double inner(const SymMatrix& a, const SymMatrix& b) {
    require(a.dim() == b.dim(), "inner: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        s += a(i, i) * b(i, i);
        for (int j = 0; j < i; ++j) s += 2.0 * a(i, j) * b(i, j);
    }
    return s;
}

// ---------------------------------------------------------------------------
// GoodFunction

GoodFunction GoodFunction::trace(int dim) {
    require(dim >= 1, "GoodFunction: dimension must be positive");
    return GoodFunction(GoodKind::Trace, dim);
}

GoodFunction GoodFunction::lambda_max(int dim) {
    require(dim >= 1, "GoodFunction: dimension must be positive");
    return GoodFunction(GoodKind::LambdaMax, dim);
}

GoodFunction GoodFunction::sum_top_k(int dim, int k) {
    require(dim >= 1, "GoodFunction: dimension must be positive");
    require(k >= 1 && k <= dim, "GoodFunction: sum_top_k needs 1 <= k <= d");
    GoodFunction f(GoodKind::SumTopK, dim);
    f.k_ = k;
    return f;
}

GoodFunction GoodFunction::pnorm_positive(int dim, double p) {
    require(dim >= 1, "GoodFunction: dimension must be positive");
    require(std::isfinite(p) && p >= 1.0, "GoodFunction: pnorm_positive needs finite p >= 1");
    GoodFunction f(GoodKind::PNormPositive, dim);
    f.p_ = p;
    return f;
}

GoodFunction GoodFunction::hk_variant(int dim, int k, HkNormalization norm) {
    require(dim >= 1, "GoodFunction: dimension must be positive");
    require(k >= 1, "GoodFunction: hk_variant needs k >= 1");
    GoodFunction f(GoodKind::HkVariant, dim);
    f.k_ = k;
    f.norm_ = norm;
    return f;
}

GoodFunction GoodFunction::anisotropic(SymMatrix weight) {
    require(weight.dim() >= 1, "GoodFunction: empty anisotropic weight");
    require(weight.is_psd(1e-12 * std::max(1.0, weight.max_eigenvalue())),
            "GoodFunction: anisotropic weight must be positive semidefinite");
    GoodFunction f(GoodKind::Anisotropic, weight.dim());
    f.weight_ = std::move(weight);
    return f;
}

GoodFunction GoodFunction::with_dim(int dim) const {
    switch (kind_) {
    case GoodKind::Trace: return trace(dim);
    case GoodKind::LambdaMax: return lambda_max(dim);
    case GoodKind::SumTopK: return sum_top_k(dim, std::min(k_, dim));
    case GoodKind::PNormPositive: return pnorm_positive(dim, p_);
    case GoodKind::HkVariant: return hk_variant(dim, k_, norm_);
    case GoodKind::Anisotropic:
        require(dim == dim_, "GoodFunction: anisotropic function has a fixed dimension");
        return *this;
    }
    return *this;
}

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Complete homogeneous symmetric polynomial h_k(x).
double complete_homogeneous(std::span<const double> x, int k) {
    std::vector<double> h(static_cast<std::size_t>(k) + 1, 0.0);
    h[0] = 1.0;
    for (double xi : x)
        for (int j = 1; j <= k; ++j) h[j] += xi * h[j - 1];
    return h[k];
}

}  // namespace

double GoodFunction::gauge(std::span<const double> lambda) const {
    switch (kind_) {
    case GoodKind::Trace: return std::accumulate(lambda.begin(), lambda.end(), 0.0);
    case GoodKind::LambdaMax: return *std::max_element(lambda.begin(), lambda.end());
    case GoodKind::SumTopK: {
        std::vector<double> sorted(lambda.begin(), lambda.end());
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        return std::accumulate(sorted.begin(), sorted.begin() + k_, 0.0);
    }
    case GoodKind::PNormPositive: {
        double big = 0.0;
        for (double l : lambda) big = std::max(big, l);
        if (big <= 0.0) return 0.0;
        double s = 0.0;
        for (double l : lambda)
            if (l > 0.0) s += std::pow(l / big, p_);
        return big * std::pow(s, 1.0 / p_);
    }
    case GoodKind::HkVariant: {
        if (norm_ == HkNormalization::Additive) {
            std::vector<double> pos(lambda.size());
            for (std::size_t i = 0; i < lambda.size(); ++i) pos[i] = std::max(lambda[i], 0.0);
            return std::pow(complete_homogeneous(pos, k_), 1.0 / k_);
        }
        // Each index appears k * C(d+k-1, k) / d times across all multisets.
        const int d = static_cast<int>(lambda.size());
        const double multiplicity = k_ * binomial(d + k_ - 1, k_) / d;
        double log_sum = 0.0;
        for (double l : lambda) {
            if (l <= 0.0) return 0.0;
            log_sum += std::log(l);
        }
        return std::exp(multiplicity * log_sum / k_);
    }
    case GoodKind::Anisotropic:
        throw UnsupportedKind("GoodFunction::gauge: anisotropic function is not spectral");
    }
    return 0.0;
}

std::string GoodFunction::name() const {
    switch (kind_) {
    case GoodKind::Trace: return "trace";
    case GoodKind::LambdaMax: return "lambda_max";
    case GoodKind::SumTopK: return "sum_top_k(" + std::to_string(k_) + ")";
    case GoodKind::PNormPositive: {
        std::string p = std::to_string(p_);
        p.erase(p.find_last_not_of('0') + 1);
        if (p.back() == '.') p.pop_back();
        return "pnorm_positive(" + p + ")";
    }
    case GoodKind::HkVariant:
        return "hk_variant(" + std::to_string(k_) + "," +
               (norm_ == HkNormalization::Additive ? "additive" : "multiplicative") + ")";
    case GoodKind::Anisotropic: return "anisotropic";
    }
    return "unknown";
}

double eval_good(const GoodFunction& f, const SymMatrix& x) {
    if (f.dim() != x.dim())
        throw ContractViolation("eval_good: function dimension " + std::to_string(f.dim()) +
                                " does not match matrix dimension " + std::to_string(x.dim()));
    if (f.kind() == GoodKind::Anisotropic) return inner(x, f.weight());
    if (f.kind() == GoodKind::Trace) return x.trace();
    const Vector& ev = x.eigenvalues();
    return f.gauge(std::span<const double>(ev.data(), static_cast<std::size_t>(ev.size())));
}

double lipschitz_bound(const GoodFunction& f) {
    const double d = f.dim();
    switch (f.kind()) {
    case GoodKind::Trace: return std::sqrt(d);
    case GoodKind::LambdaMax: return 1.0;
    case GoodKind::SumTopK: return std::sqrt(static_cast<double>(f.k()));
    case GoodKind::PNormPositive: return std::sqrt(d);
    case GoodKind::Anisotropic: return f.weight().frobenius_norm();
    case GoodKind::HkVariant:
        throw UnsupportedKind("lipschitz_bound: hk_variant is not a certified good function");
    }
    return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Random matrices

SymMatrix random_symmetric(int dim, std::mt19937_64& rng, double range) {
    std::uniform_real_distribution<double> u(-range, range);
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = u(rng);
    return SymMatrix(m);
}

SymMatrix random_psd(int dim, std::mt19937_64& rng, double scale, int rank) {
    if (rank <= 0 || rank > dim) rank = dim;
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix b(dim, rank);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < rank; ++j) b(i, j) = n(rng);
    Matrix m = (scale / rank) * b * b.transpose();
    return SymMatrix(m);
}

// ---------------------------------------------------------------------------
// Goodness probes

namespace {

void record(PropertyTally& tally, bool ok, std::vector<SymMatrix> mats, double lhs, double rhs) {
    ++tally.tested;
    if (ok) {
        ++tally.passed;
    } else if (!tally.first_failure) {
        tally.first_failure = Counterexample{std::move(mats), lhs, rhs};
    }
}

}  // namespace

GoodnessReport check_goodness(const GoodFunction& f, int trials, std::uint64_t seed) {
    require(trials >= 1, "check_goodness: trials must be positive");
    const int d = f.dim();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> rank_dist(1, d);
    GoodnessReport report;
    constexpr double kSlack = 1e-9;

    for (int t = 0; t < trials; ++t) {
        // Midpoint convexity on matrices with entries in [-10, 10].
        {
            SymMatrix x = random_symmetric(d, rng);
            SymMatrix z = random_symmetric(d, rng);
            const double mid = eval_good(f, (x + z) * 0.5);
            const double avg = 0.5 * (eval_good(f, x) + eval_good(f, z));
            record(report.convexity, mid <= avg + kSlack, {x, z}, mid, avg);
        }
        // Monotonicity: X' = X + PSD increment of random rank.
        {
            SymMatrix x = random_psd(d, rng, 5.0, rank_dist(rng));
            SymMatrix xp = x + random_psd(d, rng, 5.0, rank_dist(rng));
            const double fx = eval_good(f, x);
            const double fxp = eval_good(f, xp);
            record(report.monotonicity, fx <= fxp + kSlack, {x, xp}, fx, fxp);
        }
        // Strict positivity on non-zero PSD matrices, rank-deficient included.
        {
            SymMatrix x = random_psd(d, rng, 5.0, rank_dist(rng));
            const double fx = eval_good(f, x);
            record(report.positivity, fx > 0.0, {x}, fx, 0.0);
        }
        // Positive homogeneity.
        {
            SymMatrix x = random_symmetric(d, rng);
            const double fx = eval_good(f, x);
            bool ok = true;
            double worst_lhs = 0.0, worst_rhs = 0.0;
            for (double s : {0.5, 2.0, 10.0}) {
                const double fs = eval_good(f, x * s);
                if (std::abs(fs - s * fx) > 1e-10 * s * (1.0 + std::abs(fx))) {
                    ok = false;
                    worst_lhs = fs;
                    worst_rhs = s * fx;
                }
            }
            record(report.homogeneity, ok, {x}, worst_lhs, worst_rhs);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Subgradients

namespace {

// Subgradient of the symmetric gauge at lambda (descending).
Vector gauge_subgradient(const GoodFunction& f, const Vector& lambda) {
    const int d = static_cast<int>(lambda.size());
    Vector mu = Vector::Zero(d);
    switch (f.kind()) {
    case GoodKind::Trace: mu.setOnes(); break;
    case GoodKind::LambdaMax: mu(0) = 1.0; break;
    case GoodKind::SumTopK: mu.head(f.k()).setOnes(); break;
    case GoodKind::PNormPositive: {
        const double norm = f.gauge(std::span<const double>(lambda.data(), static_cast<std::size_t>(d)));
        if (norm <= 0.0) break;
        for (int i = 0; i < d; ++i) {
            if (lambda(i) <= 0.0) continue;
            mu(i) = f.p() == 1.0 ? 1.0 : std::pow(lambda(i) / norm, f.p() - 1.0);
        }
        break;
    }
    default: throw UnsupportedKind("gauge_subgradient: unsupported kind");
    }
    // Average over groups of tied eigenvalues.
    int start = 0;
    while (start < d) {
        int end = start + 1;
        while (end < d && std::abs(lambda(end - 1) - lambda(end)) <=
                              kTieTol * (1.0 + std::abs(lambda(end - 1))))
            ++end;
        if (end - start > 1) {
            const double avg = mu.segment(start, end - start).mean();
            mu.segment(start, end - start).setConstant(avg);
        }
        start = end;
    }
    return mu;
}

}  // namespace

Subgradient subgradient_at(const GoodFunction& f, const SymMatrix& x) {
    require(f.dim() == x.dim(), "subgradient_at: dimension mismatch");
    if (f.kind() == GoodKind::HkVariant)
        throw UnsupportedKind("subgradient_at: hk_variant carries no certified subdifferential");
    if (f.kind() == GoodKind::Anisotropic) return {x, f.weight()};
    if (f.kind() == GoodKind::Trace) return {x, SymMatrix::identity(x.dim())};
    const Vector mu = gauge_subgradient(f, x.eigenvalues());
    return {x, SymMatrix::from_spectrum(x.eigenvectors(), mu)};
}

double supporting_violation(const GoodFunction& f, const Subgradient& s, int probes,
                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(1e-3, 1.0);
    const double f_at = eval_good(f, s.at);
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < probes; ++i) {
        // Alternate far probes and probes close to the base point.
        SymMatrix z = (i % 2 == 0) ? random_symmetric(f.dim(), rng)
                                   : s.at + random_symmetric(f.dim(), rng) * scale(rng);
        const double gap = f_at + inner(z - s.at, s.value) - eval_good(f, z);
        worst = std::max(worst, gap / (1.0 + z.frobenius_norm()));
    }
    return worst;
}

double support_representation_check(const GoodFunction& f, const SymMatrix& x, int samples,
                                    std::uint64_t seed, bool include_self) {
    require(f.certified(), "support_representation_check: f must be certified good");
    std::mt19937_64 rng(seed);
    double best = -std::numeric_limits<double>::infinity();
    if (include_self) best = inner(x, subgradient_at(f, x).value);
    for (int i = 0; i < samples; ++i) {
        SymMatrix base = (i % 2 == 0) ? random_symmetric(f.dim(), rng) : random_psd(f.dim(), rng);
        best = std::max(best, inner(x, subgradient_at(f, base).value));
    }
    return best;
}

// ---------------------------------------------------------------------------
// beta = min f over {X >= 0, Tr X = 1}

namespace {

// Visits every point of the simplex lattice {k / n : k in N^d, sum k = n}.
template <class Visit>
void for_each_lattice_point(int d, int n, Visit&& visit) {
    std::vector<int> k(d, 0);
    std::vector<double> x(d, 0.0);
    auto rec = [&](auto&& self, int i, int left) -> void {
        if (i == d - 1) {
            k[i] = left;
            for (int j = 0; j < d; ++j) x[j] = static_cast<double>(k[j]) / n;
            visit(std::span<const double>(x));
            return;
        }
        for (int v = 0; v <= left; ++v) {
            k[i] = v;
            self(self, i + 1, left - v);
        }
    };
    rec(rec, 0, n);
}

double spectral_beta(const GoodFunction& f) {
    const int d = f.dim();
    if (d == 1) {
        const double one = 1.0;
        return f.gauge(std::span<const double>(&one, 1));
    }
    // Coarse lattice, resolution chosen to keep the point count modest.
    int n = 1;
    while (binomial(n + 1 + d - 1, d - 1) <= 2e5 && n < 400) ++n;
    std::vector<double> best(d, 1.0 / d);
    double best_val = std::numeric_limits<double>::infinity();
    for_each_lattice_point(d, n, [&](std::span<const double> x) {
        const double v = f.gauge(x);
        if (v < best_val) {
            best_val = v;
            best.assign(x.begin(), x.end());
        }
    });

    // Pattern search on the simplex: pairwise transfers, fixed random
    // zero-sum directions and the direction toward the barycenter.
    std::vector<Vector> dirs;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) {
                Vector e = Vector::Zero(d);
                e(i) = 1.0;
                e(j) = -1.0;
                dirs.push_back(e);
            }
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int r = 0; r < 8 * d; ++r) {
        Vector e(d);
        for (int i = 0; i < d; ++i) e(i) = g(rng);
        e.array() -= e.mean();
        dirs.push_back(e / e.lpNorm<1>());
    }
    Vector x = Eigen::Map<Vector>(best.data(), d);
    double step = 1.0 / n;
    auto value_at = [&](const Vector& y) {
        return f.gauge(std::span<const double>(y.data(), static_cast<std::size_t>(d)));
    };
    while (step > 1e-13) {
        bool improved = false;
        Vector toward = Vector::Constant(d, 1.0 / d) - x;
        std::vector<Vector> trial_dirs = dirs;
        if (toward.norm() > 0.0) trial_dirs.push_back(toward / toward.lpNorm<1>());
        for (const Vector& e : trial_dirs) {
            Vector y = x + step * e;
            if (y.minCoeff() < 0.0) continue;
            const double v = value_at(y);
            if (v < best_val - 1e-15 * std::abs(best_val)) {
                best_val = v;
                x = y;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    return best_val;
}

}  // namespace

double beta_min(const GoodFunction& f) {
    require(f.certified(), "beta_min: f must be certified good");
    const double beta = f.spectral() ? spectral_beta(f) : f.weight().min_eigenvalue();
    if (!(beta > 0.0))
        throw GoodnessViolation("beta_min: minimum over the trace-one PSD slice is not positive (" +
                                std::to_string(beta) + ")");
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> rank_dist(1, f.dim());
    for (int i = 0; i < 1000; ++i) {
        SymMatrix x = random_psd(f.dim(), rng, 1.0, rank_dist(rng));
        if (eval_good(f, x) < beta * x.trace() - 1e-8)
            throw GoodnessViolation("beta_min: f(X) >= beta Tr(X) fails on a PSD probe");
    }
    return beta;
}

// ---------------------------------------------------------------------------
// Positive definite subgradient at 0

PdSubgradient construct_pd_subgradient(const GoodFunction& f) {
    require(f.certified(), "construct_pd_subgradient: f must be certified good");
    const int d = f.dim();
    std::vector<double> base(d);
    for (int i = 0; i < d; ++i) base[i] = d - i;
    SymMatrix y = subgradient_at(f, SymMatrix::diagonal(base)).value;
    int steps = 1;
    auto kernel_tol = [](const SymMatrix& m) { return 1e-10 * std::max(1.0, m.max_eigenvalue()); };
    while (y.min_eigenvalue() <= kernel_tol(y)) {
        if (steps >= d)
            throw GoodnessViolation("construct_pd_subgradient: kernel did not shrink within d steps");
        const Vector v = y.eigenvectors().col(d - 1);
        const SymMatrix vvt(Matrix(v * v.transpose()));
        const SymMatrix yv = subgradient_at(f, vvt).value;
        if (v.dot(yv.dense() * v) <= kernel_tol(yv))
            throw GoodnessViolation("construct_pd_subgradient: no subgradient moves the kernel vector");
        y = (y + yv) * 0.5;
        ++steps;
    }
    return {y, steps};
}

// ---------------------------------------------------------------------------

double frobenius_cs_gap(const SymMatrix& h, const SymMatrix& x) {
    require(h.dim() == x.dim(), "frobenius_cs_gap: dimension mismatch");
    if (!(x.min_eigenvalue() > 1e-12)) throw SingularMatrix("frobenius_cs_gap: X is not positive definite");
    const Matrix hd = h.dense();
    const double thxh = (hd * x.dense() * hd).trace();
    const double tr_inv = x.eigenvalues().cwiseInverse().sum();
    const double tr_h = h.trace();
    return thxh * tr_inv - tr_h * tr_h;
}

}  // namespace brenier
