#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "fqed/error.hpp"

namespace fqed {

using Vec3 = Eigen::Vector3d;

/// Geometric cutoff ladder sigma(j) = Lambda * epsilon^j for j = 0..J.
class CutoffSequence {
public:
    CutoffSequence(double lambda, double epsilon, int scales)
        : lambda_(lambda), epsilon_(epsilon), scales_(scales) {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw ParameterError("cutoff sequence: Lambda must be positive and finite");
        if (!(epsilon > 0.0 && epsilon < 0.5))
            throw ParameterError("cutoff sequence: epsilon must lie in (0, 1/2)");
        if (scales <= 0) throw ParameterError("cutoff sequence: J must be positive");
    }

    double lambda() const noexcept { return lambda_; }
    double epsilon() const noexcept { return epsilon_; }
    int scales() const noexcept { return scales_; }

    /// Cutoff at scale j, computed by repeated multiplication so that
    /// sigma(j+1) / sigma(j) reproduces epsilon bit for bit.
    double sigma(int j) const {
        if (j < 0 || j > scales_) throw DomainError("cutoff sequence: scale index out of range");
        double s = lambda_;
        for (int i = 0; i < j; ++i) s *= epsilon_;
        return s;
    }

private:
    double lambda_;
    double epsilon_;
    int scales_;
};

enum class AngularSet { Octahedral6, Icosahedral12 };

inline std::string to_string(AngularSet set) {
    return set == AngularSet::Octahedral6 ? "octahedral6" : "icosahedral12";
}

inline AngularSet parse_angular_set(const std::string& name) {
    if (name == "octahedral6" || name == "6") return AngularSet::Octahedral6;
    if (name == "icosahedral12" || name == "12") return AngularSet::Icosahedral12;
    throw ParameterError("unknown angular set '" + name + "' (expected octahedral6 or icosahedral12)");
}

/// Points on the unit sphere with weights summing to one.
struct AngularRule {
    std::vector<Vec3> directions;
    std::vector<double> weights;
};

inline AngularRule angular_rule(AngularSet set) {
    AngularRule rule;
    if (set == AngularSet::Octahedral6) {
        for (int axis = 0; axis < 3; ++axis) {
            for (double sign : {1.0, -1.0}) {
                Vec3 d = Vec3::Zero();
                d[axis] = sign;
                rule.directions.push_back(d);
            }
        }
    } else {
        const double phi = std::numbers::phi;
        for (double a : {1.0, -1.0}) {
            for (double b : {phi, -phi}) {
                rule.directions.push_back(Vec3(0.0, a, b).normalized());
                rule.directions.push_back(Vec3(a, b, 0.0).normalized());
                rule.directions.push_back(Vec3(b, 0.0, a).normalized());
            }
        }
    }
    rule.weights.assign(rule.directions.size(), 1.0 / static_cast<double>(rule.directions.size()));
    return rule;
}

/// Right-handed orthonormal transverse pair for a propagation direction.
///
/// Away from the z axis the first vector is z x khat normalized; within
/// 1e-6 of the axis the frame is seeded by x instead, taking the component
/// of x orthogonal to khat.  The second vector is always khat x eps1.
inline std::pair<Vec3, Vec3> polarization_frame(const Vec3& khat) {
    const double n = khat.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("polarization frame: zero or non-finite direction");
    if (std::abs(n - 1.0) > 1e-12) throw DomainError("polarization frame: direction is not a unit vector");
    const Vec3 zhat(0.0, 0.0, 1.0);
    Vec3 eps1 = zhat.cross(khat);
    if (eps1.norm() < 1e-6) {
        const Vec3 xhat(1.0, 0.0, 0.0);
        eps1 = xhat - xhat.dot(khat) * khat;
    }
    eps1.normalize();
    Vec3 eps2 = khat.cross(eps1);
    return {eps1, eps2};
}

/// One discrete photon mode (momentum cell times polarization).
struct PhotonMode {
    Vec3 k;
    double knorm = 0.0;
    Vec3 khat;
    int shell = 0;
    double weight = 0.0;
    int lambda = 1;
    Vec3 eps;
};

/// Photon momenta in B_Lambda split into the cutoff shells, ordered by
/// shell, then radial cell (inner to outer), then angular point, then
/// polarization.
class ModeGrid {
public:
    ModeGrid(CutoffSequence cutoffs, int n_radial, AngularSet angular, std::vector<PhotonMode> modes)
        : cutoffs_(cutoffs), n_radial_(n_radial), angular_(angular), modes_(std::move(modes)) {
        shell_begin_.assign(static_cast<std::size_t>(cutoffs_.scales()) + 1, modes_.size());
        for (std::size_t m = modes_.size(); m-- > 0;)
            shell_begin_[static_cast<std::size_t>(modes_[m].shell)] = m;
        for (std::size_t s = shell_begin_.size() - 1; s-- > 0;)
            shell_begin_[s] = std::min(shell_begin_[s], shell_begin_[s + 1]);
    }

    const CutoffSequence& cutoffs() const noexcept { return cutoffs_; }
    int n_radial() const noexcept { return n_radial_; }
    AngularSet angular_set() const noexcept { return angular_; }
    std::size_t size() const noexcept { return modes_.size(); }
    const PhotonMode& operator[](std::size_t m) const { return modes_[m]; }
    const std::vector<PhotonMode>& modes() const noexcept { return modes_; }
    auto begin() const noexcept { return modes_.begin(); }
    auto end() const noexcept { return modes_.end(); }

    /// Index of the first mode of shell s (s may equal J, giving size()).
    std::size_t shell_begin(int s) const { return shell_begin_.at(static_cast<std::size_t>(s)); }
    /// Number of modes in shells 0..s-1, i.e. modes with |k| > sigma(s).
    std::size_t modes_above(int s) const { return shell_begin(s); }

    /// Sum of cell weights of shell s, counting each momentum once.
    double shell_weight_sum(int s) const {
        double total = 0.0;
        for (const auto& m : modes_)
            if (m.shell == s && m.lambda == 1) total += m.weight;
        return total;
    }

    void write_csv(std::ostream& out) const {
        out << "index,j,kx,ky,kz,knorm,weight,lambda,ex,ey,ez\n";
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            const auto& m = modes_[i];
            out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g}\n", i,
                               m.shell, m.k.x(), m.k.y(), m.k.z(), m.knorm, m.weight, m.lambda, m.eps.x(),
                               m.eps.y(), m.eps.z());
        }
    }

private:
    CutoffSequence cutoffs_;
    int n_radial_;
    AngularSet angular_;
    std::vector<PhotonMode> modes_;
    std::vector<std::size_t> shell_begin_;
};

/// Radial cells of shell j: geometric subdivision of [sigma(j+1), sigma(j)]
/// into n_radial cells, node at the arithmetic midpoint of each cell.
struct RadialCell {
    double lower;
    double upper;
    double node;
    double volume;
};

inline std::vector<RadialCell> radial_cells(const CutoffSequence& cutoffs, int j, int n_radial) {
    const double inner = cutoffs.sigma(j + 1);
    const double outer = cutoffs.sigma(j);
    const double ratio = outer / inner;
    std::vector<RadialCell> cells;
    cells.reserve(static_cast<std::size_t>(n_radial));
    for (int i = 0; i < n_radial; ++i) {
        const double lo = (i == 0) ? inner : inner * std::pow(ratio, static_cast<double>(i) / n_radial);
        const double hi = (i + 1 == n_radial) ? outer : inner * std::pow(ratio, static_cast<double>(i + 1) / n_radial);
        const double vol = 4.0 * std::numbers::pi / 3.0 * (hi * hi * hi - lo * lo * lo);
        cells.push_back({lo, hi, 0.5 * (lo + hi), vol});
    }
    return cells;
}

inline ModeGrid build_grid(const CutoffSequence& cutoffs, int n_radial, AngularSet angular) {
    if (n_radial < 1) throw ParameterError("build_grid: n_radial must be at least 1");
    const AngularRule rule = angular_rule(angular);
    std::vector<PhotonMode> modes;
    for (int j = 0; j < cutoffs.scales(); ++j) {
        for (const RadialCell& cell : radial_cells(cutoffs, j, n_radial)) {
            for (std::size_t a = 0; a < rule.directions.size(); ++a) {
                const Vec3& dir = rule.directions[a];
                const auto [e1, e2] = polarization_frame(dir);
                for (int lambda = 1; lambda <= 2; ++lambda) {
                    PhotonMode m;
                    m.khat = dir;
                    m.knorm = cell.node;
                    m.k = cell.node * dir;
                    m.shell = j;
                    m.weight = cell.volume * rule.weights[a];
                    m.lambda = lambda;
                    m.eps = (lambda == 1) ? e1 : e2;
                    modes.push_back(m);
                }
            }
        }
    }
    return ModeGrid(cutoffs, n_radial, angular, std::move(modes));
}

}  // namespace fqed
