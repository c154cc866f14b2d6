#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fqed/error.hpp"
#include "fqed/fock.hpp"
#include "fqed/parallel.hpp"

namespace fqed {

using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultDenseLimit = 4000;

// ---------------------------------------------------------------- dense oracle

struct DenseSpectrum {
    RealVector values;
    Eigen::MatrixXd vectors;
};

inline DenseSpectrum dense_spectrum(const FockOperator& op, std::size_t dense_limit = kDefaultDenseLimit) {
    if (static_cast<std::size_t>(op.dim()) > dense_limit)
        throw ResourceError(fmt::format("dense spectrum: dimension {} exceeds the dense limit {}", op.dim(), dense_limit));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
    if (es.info() != Eigen::Success) throw SolverError("dense spectrum: eigensolver failed", NAN);
    return {es.eigenvalues(), es.eigenvectors()};
}

// ------------------------------------------------------------------- Lanczos

namespace detail {

/// Deterministic pseudo-random unit vector.
inline RealVector random_unit(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RealVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    return v.normalized();
}

/// Lanczos process with full (twice-applied) reorthogonalization.  On an
/// invariant subspace the recursion restarts from a fresh vector orthogonal
/// to everything built so far, which exposes repeated eigenvalues.
class LanczosProcess {
public:
    LanczosProcess(const SparseMatrix& A, const RealVector& start, std::uint64_t seed)
        : A_(A), rng_(seed) {
        const double n0 = start.norm();
        if (!(n0 > 0.0)) throw DomainError("lanczos: zero start vector");
        V_.push_back(start / n0);
    }

    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(alpha_.size()); }
    Eigen::Index dim() const noexcept { return A_.rows(); }
    bool exhausted() const noexcept { return size() >= dim(); }
    const RealVector& diagonal() const { return diag_cache_ = Eigen::Map<const RealVector>(alpha_.data(), size()); }
    double last_beta() const noexcept { return beta_last_; }

    /// One Lanczos step; returns false when the space is exhausted.
    bool step() {
        if (exhausted()) return false;
        const Eigen::Index k = size();
        const RealVector& v = V_[static_cast<std::size_t>(k)];
        RealVector w = A_ * v;
        const double a = v.dot(w);
        w -= a * v;
        if (k > 0) w -= offdiag_.back() * V_[static_cast<std::size_t>(k - 1)];
        for (int pass = 0; pass < 2; ++pass)
            for (const RealVector& q : V_) w -= q.dot(w) * q;
        alpha_.push_back(a);
        double b = w.norm();
        const double scale = std::max(1.0, std::abs(a));
        if (size() < dim()) {
            if (b <= 1e-13 * scale) {
                b = 0.0;
                w = detail::random_unit(dim(), rng_);
                for (int pass = 0; pass < 2; ++pass)
                    for (const RealVector& q : V_) w -= q.dot(w) * q;
                w.normalize();
            } else {
                w /= b;
            }
            offdiag_.push_back(b);
            V_.push_back(std::move(w));
        }
        beta_last_ = b;
        return true;
    }

    /// Eigen-decomposition of the current tridiagonal matrix.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz() const {
        const Eigen::Index k = size();
        RealVector d = Eigen::Map<const RealVector>(alpha_.data(), k);
        RealVector e = k > 1 ? RealVector(Eigen::Map<const RealVector>(offdiag_.data(), k - 1)) : RealVector(0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
        return es;
    }

    /// Coupling between the last basis vector and the next one (0 if the
    /// space is exhausted).
    double trailing_beta() const { return exhausted() ? 0.0 : offdiag_.back(); }

    template <typename Coeffs>
    auto combine(const Coeffs& s) const {
        using Scalar = typename Coeffs::Scalar;
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(dim());
        for (Eigen::Index i = 0; i < s.size(); ++i) x += s[i] * V_[static_cast<std::size_t>(i)].template cast<Scalar>();
        return x;
    }

    /// Tridiagonal matrix as dense (small).
    Eigen::MatrixXd tridiagonal() const {
        const Eigen::Index k = size();
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            T(i, i) = alpha_[static_cast<std::size_t>(i)];
            if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = offdiag_[static_cast<std::size_t>(i)];
        }
        return T;
    }

private:
    const SparseMatrix& A_;
    std::mt19937_64 rng_;
    std::vector<RealVector> V_;
    std::vector<double> alpha_;
    std::vector<double> offdiag_;
    double beta_last_ = 0.0;
    mutable RealVector diag_cache_;
};

inline double ritz_sign_fix(RealVector& x) {
    Eigen::Index idx = 0;
    if (std::abs(x[0]) > 1e-8) {
        idx = 0;
    } else {
        x.cwiseAbs().maxCoeff(&idx);
    }
    if (x[idx] < 0.0) x = -x;
    return x[idx];
}

}  // namespace detail

struct LanczosOptions {
    double tol = 1e-10;
    int max_iter = 4000;
    int wanted = 3;
    std::uint64_t seed = 0x5eedULL;
    double degeneracy_tol = 1e-12;
};

struct GroundStateRecord {
    double energy = 0.0;
    RealVector vector;
    double gap = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    std::string method;
    bool degenerate = false;
    RealVector low_values;
    int iterations = 0;
};

/// Lowest eigenpairs by Lanczos.  The ground vector is normalized and
/// signed so that its vacuum component (or largest component) is positive.
inline GroundStateRecord ground_state(const FockOperator& op, const LanczosOptions& opts = {}) {
    const Eigen::Index n = op.dim();
    if (n == 0) throw DomainError("ground state: empty operator");
    if (!op.symmetric()) throw DomainError("ground state: operator is not symmetric");
    GroundStateRecord rec;
    rec.method = "lanczos";
    if (n == 1) {
        rec.energy = op.matrix().coeff(0, 0);
        rec.vector = RealVector::Ones(1);
        rec.low_values = RealVector::Constant(1, rec.energy);
        rec.iterations = 1;
        return rec;
    }
    std::mt19937_64 rng(opts.seed);
    RealVector start = 0.1 * detail::random_unit(n, rng);
    start[0] += 1.0;
    detail::LanczosProcess lp(op.matrix(), start, opts.seed + 1);

    const int wanted = std::max(1, opts.wanted);
    double best = std::numeric_limits<double>::infinity();
    int next_check = std::min<int>(static_cast<int>(n), 12);
    while (true) {
        const bool progressed = lp.step();
        const int k = static_cast<int>(lp.size());
        if (k < next_check && progressed && k < opts.max_iter) continue;
        next_check = k + std::max(8, k / 8);

        auto es = lp.ritz();
        const double beta = lp.trailing_beta();
        const int count = std::min<int>(wanted, k);
        double worst = 0.0;
        for (int i = 0; i < count; ++i) worst = std::max(worst, std::abs(beta * es.eigenvectors()(k - 1, i)));
        best = std::min(best, worst);
        const bool done = worst <= 0.1 * opts.tol || lp.exhausted() || k >= opts.max_iter;
        if (!done) continue;

        RealVector x = lp.combine(RealVector(es.eigenvectors().col(0)));
        x.normalize();
        const double theta = x.dot(op.apply(x));
        const double residual = (op.apply(x) - theta * x).norm();
        if (residual > opts.tol) {
            if (!lp.exhausted() && k < opts.max_iter) continue;
            throw SolverError(fmt::format("lanczos: residual {:.3e} above tolerance after {} steps", residual, k),
                              residual);
        }
        detail::ritz_sign_fix(x);
        rec.energy = theta;
        rec.vector = std::move(x);
        rec.residual = residual;
        rec.iterations = k;
        rec.low_values = es.eigenvalues().head(count);
        rec.gap = count >= 2 ? es.eigenvalues()[1] - es.eigenvalues()[0] : std::numeric_limits<double>::infinity();
        rec.degenerate = rec.gap < opts.degeneracy_tol;
        return rec;
    }
}

/// Ground pair from the dense oracle, in the same sign convention.
inline GroundStateRecord dense_ground_state(const FockOperator& op, std::size_t dense_limit = kDefaultDenseLimit) {
    const DenseSpectrum spectrum = dense_spectrum(op, dense_limit);
    GroundStateRecord rec;
    rec.method = "dense";
    rec.energy = spectrum.values[0];
    rec.vector = spectrum.vectors.col(0);
    detail::ritz_sign_fix(rec.vector);
    rec.residual = (op.apply(rec.vector) - rec.energy * rec.vector).norm();
    rec.low_values = spectrum.values.head(std::min<Eigen::Index>(3, spectrum.values.size()));
    rec.gap = spectrum.values.size() > 1 ? spectrum.values[1] - spectrum.values[0] : std::numeric_limits<double>::infinity();
    rec.degenerate = rec.gap < 1e-12;
    rec.iterations = 0;
    return rec;
}

// ---------------------------------------------------------------- resolvents

enum class ResolventMethod { Auto, Spectral, Krylov };

struct ResolventOptions {
    ResolventMethod method = ResolventMethod::Auto;
    std::size_t dense_limit = kDefaultDenseLimit;
    /// Auto picks the spectral route up to this dimension.
    std::size_t spectral_limit = 600;
    double tol = 1e-13;
    int max_iter = 6000;
    /// Smallest admissible distance between the shift and the spectrum.
    double singular_floor = 1e-12;
};

/// Applies (op - z)^{-1}.  The spectral route factors the operator once
/// through its dense eigendecomposition; the Krylov route runs a shifted
/// Lanczos (full orthogonalization) solve and serves many shifts from one
/// Krylov space when the right-hand side is shared.
class Resolvent {
public:
    Resolvent(const FockOperator& op, ResolventOptions opts = {}) : op_(&op), opts_(opts) {
        if (!op.symmetric()) throw DomainError("resolvent: operator is not symmetric");
        if (opts_.method == ResolventMethod::Auto)
            opts_.method = static_cast<std::size_t>(op.dim()) <= std::min(opts_.spectral_limit, opts_.dense_limit)
                               ? ResolventMethod::Spectral
                                                                                   : ResolventMethod::Krylov;
        if (opts_.method == ResolventMethod::Spectral)
            spectrum_ = std::make_shared<DenseSpectrum>(dense_spectrum(op, opts_.dense_limit));
    }

    ResolventMethod method() const noexcept { return opts_.method; }
    const DenseSpectrum* spectrum() const noexcept { return spectrum_.get(); }

    ComplexVector apply(Complex z, const ComplexVector& v) const {
        if (opts_.method == ResolventMethod::Spectral) return spectral_apply(z, v);
        const RealVector re = v.real(), im = v.imag();
        ComplexVector x = ComplexVector::Zero(v.size());
        if (re.norm() > 0.0) x += krylov_many({z}, re)[0];
        if (im.norm() > 0.0) x += Complex(0.0, 1.0) * krylov_many({z}, im)[0];
        return x;
    }

    /// Solutions for several shifts with one real right-hand side.
    std::vector<ComplexVector> apply_many(const std::vector<Complex>& zs, const RealVector& v) const {
        if (opts_.method == ResolventMethod::Spectral) {
            std::vector<ComplexVector> out(zs.size());
            const ComplexVector cv = v.cast<Complex>();
            parallel_for(zs.size(), [&](std::size_t q) { out[q] = spectral_apply(zs[q], cv); });
            return out;
        }
        return krylov_many(zs, v);
    }

private:
    ComplexVector spectral_apply(Complex z, const ComplexVector& v) const {
        const auto& lam = spectrum_->values;
        const auto& V = spectrum_->vectors;
        const double dist = (lam.cast<Complex>().array() - z).abs().minCoeff();
        if (dist < opts_.singular_floor)
            throw ConditioningError(fmt::format("resolvent: shift within {:.3e} of the spectrum", dist));
        const RealVector cr = V.transpose() * v.real();
        const RealVector ci = V.transpose() * v.imag();
        ComplexVector c(lam.size());
        for (Eigen::Index i = 0; i < lam.size(); ++i) c[i] = Complex(cr[i], ci[i]) / (lam[i] - z);
        ComplexVector x(v.size());
        x.real() = V * c.real();
        x.imag() = V * c.imag();
        return x;
    }

    std::vector<ComplexVector> krylov_many(const std::vector<Complex>& zs, const RealVector& b) const {
        const double bn = b.norm();
        std::vector<ComplexVector> out(zs.size(), ComplexVector::Zero(b.size()));
        if (bn == 0.0) return out;
        detail::LanczosProcess lp(op_->matrix(), b, 0x1234ULL);
        int next_check = 16;
        double worst = std::numeric_limits<double>::infinity();
        while (true) {
            const bool progressed = lp.step();
            const int k = static_cast<int>(lp.size());
            if (progressed && k < next_check && k < opts_.max_iter) continue;
            next_check = k + std::max(8, k / 6);
            auto es = lp.ritz();
            const RealVector& theta = es.eigenvalues();
            const RealVector first_row = es.eigenvectors().row(0).transpose();
            const RealVector last_row = es.eigenvectors().row(k - 1).transpose();
            const double beta = lp.trailing_beta();
            worst = 0.0;
            std::vector<ComplexVector> ys(zs.size());
            for (std::size_t q = 0; q < zs.size(); ++q) {
                const double dist = (theta.cast<Complex>().array() - zs[q]).abs().minCoeff();
                if (dist < opts_.singular_floor)
                    throw ConditioningError(fmt::format("resolvent: shift within {:.3e} of a Ritz value", dist));
                ComplexVector c(k);
                for (int i = 0; i < k; ++i) c[i] = bn * first_row[i] / (theta[i] - zs[q]);
                const Complex last = last_row.cast<Complex>().dot(c);
                worst = std::max(worst, std::abs(beta * last) / bn);
                ys[q] = es.eigenvectors().cast<Complex>() * c;
            }
            const bool done = worst <= opts_.tol || lp.exhausted();
            if (!done && k < opts_.max_iter) continue;
            if (!done)
                throw SolverError(fmt::format("shifted Krylov solve: residual {:.3e} after {} steps", worst, k), worst);
            for (std::size_t q = 0; q < zs.size(); ++q) out[q] = lp.combine(ys[q]);
            return out;
        }
    }

    const FockOperator* op_;
    ResolventOptions opts_;
    std::shared_ptr<DenseSpectrum> spectrum_;
};

/// Single shifted solve (op - z) x = v by the Krylov route.
inline ComplexVector resolvent_apply(const FockOperator& op, Complex z, const ComplexVector& v,
                                     ResolventOptions opts = {}) {
    if (opts.method == ResolventMethod::Auto) opts.method = ResolventMethod::Krylov;
    return Resolvent(op, opts).apply(z, v);
}

// ------------------------------------------------------------------ contours

/// Circle in the energy plane with a trapezoidal rule.  Nodes sit at
/// angles 2 pi (q + 1/2) / M, so none lies on the real axis and nodes pair
/// up under complex conjugation.  weight(q) realizes the clockwise
/// orientation, for which (1/2 pi i) of the integral of dz/(z - c) is -1.
struct Contour {
    double center = 0.0;
    double radius = 1.0;
    int nodes = 64;

    void validate() const {
        if (!(radius > 0.0)) throw DomainError("contour: radius must be positive");
        if (nodes < 8 || nodes % 2 != 0) throw DomainError("contour: node count must be even and at least 8");
    }
    Complex node(int q) const {
        const double theta = 2.0 * std::numbers::pi * (q + 0.5) / nodes;
        return center + radius * std::polar(1.0, theta);
    }
    /// Weight of node q in (1/2 pi i) * integral, clockwise orientation.
    Complex weight(int q) const { return -(node(q) - center) / static_cast<double>(nodes); }
    /// Nodes in the upper half plane; the rest are their conjugates.
    std::vector<Complex> upper_nodes() const {
        std::vector<Complex> zs;
        for (int q = 0; q < nodes / 2; ++q) zs.push_back(node(q));
        return zs;
    }
    Contour with_nodes(int m) const { return {center, radius, m}; }
};

struct ProjectionOptions {
    ResolventOptions resolvent;
    double idempotence_tol = 1e-8;
    int max_nodes = 1024;
    bool adaptive = true;
    /// Relative Rayleigh residual above which the output is judged to span
    /// more than one eigenvalue.
    double single_eigen_tol = 1e-6;
};

struct ProjectionResult {
    RealVector vector;
    double idempotence_defect = 0.0;
    int nodes_used = 0;
    double rayleigh = 0.0;
    double eigen_residual = 0.0;
};

namespace detail {

/// Sum over the contour of weight * (op - z)^{-1} v, using conjugate pairing.
inline RealVector quadrature_projection(const Resolvent& R, const Contour& c, const RealVector& v) {
    const std::vector<Complex> zs = c.upper_nodes();
    const std::vector<ComplexVector> xs = R.apply_many(zs, v);
    RealVector out = RealVector::Zero(v.size());
    for (std::size_t q = 0; q < zs.size(); ++q) out += 2.0 * (c.weight(static_cast<int>(q)) * xs[q]).real();
    return out;
}

}  // namespace detail

/// Spectral projection of v onto the eigenspace enclosed by the contour.
inline ProjectionResult contour_project(const FockOperator& op, const Contour& contour, const RealVector& v,
                                        const ProjectionOptions& opts = {}) {
    contour.validate();
    if (v.size() != op.dim()) throw MismatchError("contour projection: vector/operator mismatch");
    const Resolvent R(op, opts.resolvent);
    Contour c = contour;
    const double vn = std::max(v.norm(), std::numeric_limits<double>::min());
    while (true) {
        ProjectionResult res;
        res.vector = detail::quadrature_projection(R, c, v);
        res.nodes_used = c.nodes;
        const RealVector twice = detail::quadrature_projection(R, c, res.vector);
        res.idempotence_defect = (twice - res.vector).norm() / vn;
        if (res.idempotence_defect > opts.idempotence_tol && opts.adaptive && c.nodes * 2 <= opts.max_nodes) {
            c = c.with_nodes(c.nodes * 2);
            continue;
        }
        if (res.idempotence_defect > opts.idempotence_tol)
            throw ContourError(fmt::format("contour projection: idempotence defect {:.3e} with {} nodes",
                                           res.idempotence_defect, c.nodes));
        const double pn = res.vector.norm();
        if (!(pn > 1e-12 * vn)) throw ContourError("contour projection: contour encloses no spectral weight of v");
        const RealVector Hp = op.apply(res.vector);
        res.rayleigh = res.vector.dot(Hp) / (pn * pn);
        res.eigen_residual = (Hp - res.rayleigh * res.vector).norm() / pn;
        if (std::abs(res.rayleigh - contour.center) > contour.radius)
            throw ContourError("contour projection: projected vector lies outside the contour");
        if (res.eigen_residual > opts.single_eigen_tol * std::max(1.0, contour.radius))
            throw ContourError(fmt::format("contour projection: output is not an eigenvector (residual {:.3e}); "
                                           "the contour encloses more than one eigenvalue",
                                           res.eigen_residual));
        return res;
    }
}

struct NeumannResult {
    RealVector vector;
    std::vector<double> term_norms;
    bool converged = false;
    double last_ratio = 0.0;
};

struct NeumannOptions {
    /// Every series term needs fresh solves at every node, so the default
    /// factors the operator once.
    ResolventOptions resolvent{.method = ResolventMethod::Spectral};
    int max_terms = 40;
    /// Stop once a term is smaller than this fraction of the partial sum.
    double tail_tol = 1e-14;
};

/// Partial sums of sum_n (1/2 pi i) int R(z) [-delta R(z)]^n v dz with
/// R(z) = (op_prev - z)^{-1}, clockwise contour.
inline NeumannResult neumann_project(const FockOperator& op_prev, const FockOperator& delta, const Contour& contour,
                                     const RealVector& v, const NeumannOptions& opts = {}) {
    contour.validate();
    if (!delta.symmetric()) throw DomainError("neumann projection: perturbation must be symmetric");
    const Resolvent R(op_prev, opts.resolvent);
    const std::vector<Complex> zs = contour.upper_nodes();
    std::vector<ComplexVector> xs = R.apply_many(zs, v);
    NeumannResult res;
    res.vector = RealVector::Zero(v.size());
    for (int n = 0; n < opts.max_terms; ++n) {
        RealVector term = RealVector::Zero(v.size());
        for (std::size_t q = 0; q < zs.size(); ++q) term += 2.0 * (contour.weight(static_cast<int>(q)) * xs[q]).real();
        res.vector += term;
        const double tn = term.norm();
        res.term_norms.push_back(tn);
        if (res.term_norms.size() >= 2 && res.term_norms[res.term_norms.size() - 2] > 0.0)
            res.last_ratio = tn / res.term_norms[res.term_norms.size() - 2];
        if (delta.matrix().nonZeros() == 0 || tn <= opts.tail_tol * std::max(res.vector.norm(), 1e-300)) {
            res.converged = true;
            break;
        }
        if (n + 1 == opts.max_terms) break;
        parallel_for(zs.size(), [&](std::size_t q) { xs[q] = R.apply(zs[q], -1.0 * delta.apply(xs[q])); });
    }
    if (!res.converged && res.last_ratio < 1.0) res.converged = res.term_norms.back() <= 1e-10 * res.vector.norm();
    return res;
}

}  // namespace fqed
