#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "fqed/error.hpp"
#include "fqed/modes.hpp"

namespace fqed {

using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Default ceiling on the number of basis states.
inline constexpr std::size_t kDefaultBasisLimit = 250000;

/// Truncated bosonic occupation basis over the first M modes of a grid.
///
/// States are ordered by total occupation, and within a fixed total in
/// descending lexicographic order of the occupation vector, so (1,0)
/// precedes (0,1).  The vacuum is always state 0.
class FockBasis {
public:
    static constexpr std::size_t kMaxModes = 254;
    static constexpr int kMaxOccupation = 8;

    FockBasis(std::size_t modes, int n_max, int c_max, std::size_t limit = kDefaultBasisLimit)
        : modes_(modes), n_max_(n_max), c_max_(c_max) {
        if (n_max < 0) throw ParameterError("fock basis: n_max must be non-negative");
        if (c_max < 1) throw ParameterError("fock basis: c_max must be at least 1");
        if (modes > kMaxModes) throw ResourceError("fock basis: more than 254 modes are not supported");
        if (n_max > kMaxOccupation) throw ResourceError("fock basis: total occupation above 8 is not supported");
        const std::size_t count = count_states(modes, n_max, c_max, limit);
        if (count > limit)
            throw ResourceError(fmt::format("fock basis: {} modes with n_max={} exceed the limit of {} states",
                                            modes, n_max, limit));
        occupations_.reserve(count * modes_);
        std::vector<std::uint8_t> current(modes_, 0);
        for (int total = 0; total <= n_max_; ++total) enumerate(current, 0, total);
        index_.reserve(size());
        for (std::size_t s = 0; s < size(); ++s) index_.emplace(key_of(state(s)), s);
    }

    std::size_t mode_count() const noexcept { return modes_; }
    int n_max() const noexcept { return n_max_; }
    int c_max() const noexcept { return c_max_; }
    std::size_t size() const noexcept { return modes_ == 0 ? 1 : occupations_.size() / modes_; }

    /// Occupation vector of state s.
    const std::uint8_t* state(std::size_t s) const { return occupations_.data() + s * modes_; }
    int occupation(std::size_t s, std::size_t m) const { return state(s)[m]; }
    int total(std::size_t s) const {
        int n = 0;
        for (std::size_t m = 0; m < modes_; ++m) n += state(s)[m];
        return n;
    }

    /// Ordinal of an occupation vector, or -1 if it is outside the basis.
    std::ptrdiff_t find(const std::uint8_t* occ) const {
        int n = 0;
        for (std::size_t m = 0; m < modes_; ++m) {
            if (occ[m] > c_max_) return -1;
            n += occ[m];
        }
        if (n > n_max_) return -1;
        auto it = index_.find(key_of(occ));
        return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    }

    /// Number of admissible occupation vectors, counted without enumeration.
    static std::size_t count_states(std::size_t modes, int n_max, int c_max, std::size_t cap) {
        std::vector<std::size_t> ways(static_cast<std::size_t>(n_max) + 1, 0);
        ways[0] = 1;
        for (std::size_t m = 0; m < modes; ++m) {
            std::vector<std::size_t> next(ways.size(), 0);
            for (std::size_t t = 0; t < ways.size(); ++t)
                for (int c = 0; c <= c_max && t + static_cast<std::size_t>(c) < ways.size(); ++c)
                    next[t + static_cast<std::size_t>(c)] = std::min(cap + 1, next[t + static_cast<std::size_t>(c)] + ways[t]);
            ways = std::move(next);
        }
        std::size_t total = 0;
        for (auto w : ways) total = std::min(cap + 1, total + w);
        return total;
    }

private:
    void enumerate(std::vector<std::uint8_t>& current, std::size_t m, int remaining) {
        if (m + 1 >= modes_) {
            if (modes_ == 0) {
                if (remaining == 0) occupations_.insert(occupations_.end(), current.begin(), current.end());
                return;
            }
            if (remaining <= c_max_) {
                current[m] = static_cast<std::uint8_t>(remaining);
                occupations_.insert(occupations_.end(), current.begin(), current.end());
                current[m] = 0;
            }
            return;
        }
        for (int c = std::min(c_max_, remaining); c >= 0; --c) {
            current[m] = static_cast<std::uint8_t>(c);
            enumerate(current, m + 1, remaining - c);
        }
        current[m] = 0;
    }

    std::uint64_t key_of(const std::uint8_t* occ) const {
        std::uint64_t key = 0;
        int slot = 0;
        for (std::size_t m = 0; m < modes_; ++m)
            for (int c = 0; c < occ[m]; ++c) key |= static_cast<std::uint64_t>(m + 1) << (8 * slot++);
        return key;
    }

    std::size_t modes_;
    int n_max_;
    int c_max_;
    std::vector<std::uint8_t> occupations_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

inline BasisPtr enumerate_basis(std::size_t modes, int n_max, int c_max,
                                std::size_t limit = kDefaultBasisLimit) {
    return std::make_shared<const FockBasis>(modes, n_max, c_max, limit);
}

/// Ordinals in `parent` of the states of `child`, where the child covers the
/// leading modes of the parent with identical caps.  The map is increasing,
/// so the child basis is a literal subspace of the parent.
inline std::vector<std::size_t> embedding(const FockBasis& child, const FockBasis& parent) {
    if (child.mode_count() > parent.mode_count() || child.n_max() != parent.n_max() ||
        child.c_max() != parent.c_max())
        throw MismatchError("embedding: child basis is not a leading-mode restriction of the parent");
    std::vector<std::size_t> map(child.size());
    std::vector<std::uint8_t> occ(parent.mode_count(), 0);
    for (std::size_t s = 0; s < child.size(); ++s) {
        std::copy_n(child.state(s), child.mode_count(), occ.begin());
        const auto p = parent.find(occ.data());
        if (p < 0) throw MismatchError("embedding: state missing from parent basis");
        map[s] = static_cast<std::size_t>(p);
    }
    return map;
}

template <typename Vector>
Vector embed(const Vector& v, const std::vector<std::size_t>& map, std::size_t parent_size) {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(parent_size));
    for (std::size_t s = 0; s < map.size(); ++s) out[static_cast<Eigen::Index>(map[s])] = v[static_cast<Eigen::Index>(s)];
    return out;
}

template <typename Vector>
Vector restrict_vector(const Vector& v, const std::vector<std::size_t>& map) {
    Vector out(static_cast<Eigen::Index>(map.size()));
    for (std::size_t s = 0; s < map.size(); ++s) out[static_cast<Eigen::Index>(s)] = v[static_cast<Eigen::Index>(map[s])];
    return out;
}

/// Sparse operator on a FockBasis.
class FockOperator {
public:
    FockOperator() = default;
    FockOperator(BasisPtr basis, SparseMatrix matrix, bool symmetric)
        : basis_(std::move(basis)), matrix_(std::move(matrix)), symmetric_(symmetric) {
        const auto n = static_cast<Eigen::Index>(basis_->size());
        if (matrix_.rows() != n || matrix_.cols() != n)
            throw MismatchError("fock operator: matrix dimension does not match basis");
        matrix_.makeCompressed();
    }

    static FockOperator zero(BasisPtr basis) {
        const auto n = static_cast<Eigen::Index>(basis->size());
        return FockOperator(std::move(basis), SparseMatrix(n, n), true);
    }
    static FockOperator identity(BasisPtr basis, double scale = 1.0) {
        const auto n = static_cast<Eigen::Index>(basis->size());
        SparseMatrix m(n, n);
        m.setIdentity();
        m *= scale;
        return FockOperator(std::move(basis), std::move(m), true);
    }

    const BasisPtr& basis() const noexcept { return basis_; }
    const SparseMatrix& matrix() const noexcept { return matrix_; }
    bool symmetric() const noexcept { return symmetric_; }
    Eigen::Index dim() const noexcept { return matrix_.rows(); }

    RealVector apply(const RealVector& v) const { return matrix_ * v; }
    ComplexVector apply(const ComplexVector& v) const {
        ComplexVector out(v.size());
        out.real() = matrix_ * v.real();
        out.imag() = matrix_ * v.imag();
        return out;
    }

    double expectation(const RealVector& v) const { return v.dot(matrix_ * v) / v.squaredNorm(); }

    FockOperator transpose() const { return FockOperator(basis_, SparseMatrix(matrix_.transpose()), symmetric_); }

    /// Spot-check symmetry on up to `samples` stored entries.
    bool check_symmetric(double tol = 1e-12, std::size_t samples = 2000) const {
        std::size_t seen = 0;
        const auto stride = std::max<Eigen::Index>(1, matrix_.nonZeros() / static_cast<Eigen::Index>(samples));
        Eigen::Index counter = 0;
        for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r) {
            for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it, ++counter) {
                if (counter % stride != 0) continue;
                if (std::abs(it.value() - matrix_.coeff(it.col(), it.row())) > tol * (1.0 + std::abs(it.value())))
                    return false;
                if (++seen >= samples) return true;
            }
        }
        return true;
    }

    FockOperator& operator+=(const FockOperator& o) {
        same_basis(o);
        matrix_ += o.matrix_;
        symmetric_ = symmetric_ && o.symmetric_;
        return *this;
    }
    FockOperator& operator-=(const FockOperator& o) {
        same_basis(o);
        matrix_ -= o.matrix_;
        symmetric_ = symmetric_ && o.symmetric_;
        return *this;
    }
    FockOperator& operator*=(double s) {
        matrix_ *= s;
        return *this;
    }
    /// Adds s times the identity.
    FockOperator& shift(double s) {
        if (s == 0.0) return *this;
        SparseMatrix id(dim(), dim());
        id.setIdentity();
        matrix_ += s * id;
        return *this;
    }

    friend FockOperator operator+(FockOperator a, const FockOperator& b) { return a += b; }
    friend FockOperator operator-(FockOperator a, const FockOperator& b) { return a -= b; }
    friend FockOperator operator*(double s, FockOperator a) { return a *= s; }
    friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
        a.same_basis(b);
        SparseMatrix p = (a.matrix_ * b.matrix_).pruned();
        return FockOperator(a.basis_, std::move(p), false);
    }

    /// Restriction to the subspace spanned by the listed ordinals.
    FockOperator restricted(BasisPtr sub, const std::vector<std::size_t>& map) const {
        std::vector<std::ptrdiff_t> inverse(static_cast<std::size_t>(dim()), -1);
        for (std::size_t s = 0; s < map.size(); ++s) inverse[map[s]] = static_cast<std::ptrdiff_t>(s);
        std::vector<Triplet> trips;
        for (std::size_t s = 0; s < map.size(); ++s) {
            for (SparseMatrix::InnerIterator it(matrix_, static_cast<Eigen::Index>(map[s])); it; ++it) {
                const auto c = inverse[static_cast<std::size_t>(it.col())];
                if (c >= 0) trips.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c), it.value());
            }
        }
        const auto n = static_cast<Eigen::Index>(map.size());
        SparseMatrix m(n, n);
        m.setFromTriplets(trips.begin(), trips.end());
        return FockOperator(std::move(sub), std::move(m), symmetric_);
    }

    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

    /// Coordinate-format dump for debugging: "row col value" per entry.
    void write_coordinates(std::ostream& out) const {
        out << dim() << ' ' << dim() << ' ' << matrix_.nonZeros() << '\n';
        for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it)
                out << fmt::format("{} {} {:.17g}\n", it.row(), it.col(), it.value());
    }

private:
    void same_basis(const FockOperator& o) const {
        if (basis_ != o.basis_ && (basis_->size() != o.basis_->size() || basis_->mode_count() != o.basis_->mode_count()))
            throw MismatchError("fock operator: operands live on different bases");
    }

    BasisPtr basis_;
    SparseMatrix matrix_;
    bool symmetric_ = true;
};

/// Sum over modes of u_m b*_m + v_m b_m, with amplitudes that would leave
/// the caps dropped.  Modes with both coefficients zero are skipped.
inline FockOperator linear_form(const BasisPtr& basis, const std::vector<double>& create,
                                const std::vector<double>& annihilate) {
    const std::size_t M = basis->mode_count();
    if (create.size() < M || annihilate.size() < M)
        throw MismatchError("linear form: coefficient vectors shorter than the mode count");
    std::vector<Triplet> trips;
    std::vector<std::uint8_t> occ(M);
    for (std::size_t s = 0; s < basis->size(); ++s) {
        if (basis->total(s) >= basis->n_max()) continue;
        std::copy_n(basis->state(s), M, occ.begin());
        for (std::size_t m = 0; m < M; ++m) {
            if (create[m] == 0.0 && annihilate[m] == 0.0) continue;
            if (occ[m] >= basis->c_max()) continue;
            ++occ[m];
            const auto t = basis->find(occ.data());
            const double amp = std::sqrt(static_cast<double>(occ[m]));
            --occ[m];
            if (t < 0) continue;
            // <t| b*_m |s> = sqrt(n_m + 1) and <s| b_m |t> is the same number
            if (create[m] != 0.0) trips.emplace_back(t, static_cast<Eigen::Index>(s), create[m] * amp);
            if (annihilate[m] != 0.0) trips.emplace_back(static_cast<Eigen::Index>(s), t, annihilate[m] * amp);
        }
    }
    const auto n = static_cast<Eigen::Index>(basis->size());
    SparseMatrix mat(n, n);
    mat.setFromTriplets(trips.begin(), trips.end());
    bool symmetric = true;
    for (std::size_t m = 0; m < M; ++m) symmetric = symmetric && create[m] == annihilate[m];
    return FockOperator(basis, std::move(mat), symmetric);
}

/// Annihilation and creation operators of a single mode.
struct Ladder {
    FockOperator annihilate;
    FockOperator create;
};

inline Ladder ladder(const BasisPtr& basis, std::size_t m) {
    if (m >= basis->mode_count()) throw DomainError("ladder: mode index out of range");
    std::vector<double> one(basis->mode_count(), 0.0), none(basis->mode_count(), 0.0);
    one[m] = 1.0;
    FockOperator create = linear_form(basis, one, none);
    return {create.transpose(), create};
}

/// Diagonal operator sum_m f(mode m) n_m.  Number-type sums carry no
/// quadrature weight.
inline FockOperator weighted_number_sum(const BasisPtr& basis, const ModeGrid& grid,
                                        const std::function<double(const PhotonMode&)>& f) {
    const std::size_t M = basis->mode_count();
    if (M > grid.size()) throw MismatchError("weighted number sum: basis has more modes than the grid");
    std::vector<double> coeff(M);
    for (std::size_t m = 0; m < M; ++m) {
        coeff[m] = f(grid[m]);
        if (!std::isfinite(coeff[m])) throw DomainError("weighted number sum: non-finite coefficient");
    }
    const auto n = static_cast<Eigen::Index>(basis->size());
    SparseMatrix mat(n, n);
    mat.reserve(Eigen::VectorXi::Constant(n, 1));
    for (std::size_t s = 0; s < basis->size(); ++s) {
        double value = 0.0;
        const auto* occ = basis->state(s);
        for (std::size_t m = 0; m < M; ++m)
            if (occ[m] != 0) value += coeff[m] * occ[m];
        mat.insert(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = value;
    }
    return FockOperator(basis, std::move(mat), true);
}

/// Vector with unit amplitude on the vacuum.
inline RealVector vacuum(const FockBasis& basis) {
    RealVector v = RealVector::Zero(static_cast<Eigen::Index>(basis.size()));
    v[0] = 1.0;
    return v;
}

/// Squared norm of the part of v in the top occupation sector.
inline double top_sector_weight(const FockBasis& basis, const RealVector& v) {
    double w = 0.0;
    for (std::size_t s = 0; s < basis.size(); ++s)
        if (basis.total(s) == basis.n_max()) w += v[static_cast<Eigen::Index>(s)] * v[static_cast<Eigen::Index>(s)];
    return w;
}

}  // namespace fqed
