#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fqed/fock.hpp"
#include "fqed/modes.hpp"

namespace fqed {

/// Physical and control parameters of one model instance.
struct ModelParams {
    double Lambda = 1.0;
    double alpha = 0.0;
    double epsilon = 0.3;
    double mu = 0.2;
    double rho_minus = 0.1;
    double rho_plus = 0.4;
    double C_alpha_assumed = 0.35;
    Vec3 P = Vec3::Zero();
    int J = 4;
    double ir_floor_C = 10.0;

    CutoffSequence cutoffs() const { return CutoffSequence(Lambda, epsilon, J); }
    double sigma(int j) const { return cutoffs().sigma(j); }
};

using VectorOperator = std::array<FockOperator, 3>;

/// Half-open range of shells [first, last).
struct ShellRange {
    int first = 0;
    int last = 0;
    bool contains(int s) const noexcept { return s >= first && s < last; }
    bool empty() const noexcept { return last <= first; }
};

/// Shells carrying the interaction at scale j: all momenta with |k| > sigma(j).
inline ShellRange interacting_shells(int j) { return {0, j}; }

/// Field coupling coefficient sqrt(w/|k|) of a mode.
inline double field_coupling(const PhotonMode& m) { return std::sqrt(m.weight / m.knorm); }

inline void check_grid_basis(const ModeGrid& grid, const FockBasis& basis) {
    if (basis.mode_count() > grid.size()) throw MismatchError("basis has more modes than the grid");
}

/// A^i = sum over modes in `shells` of sqrt(w/|k|) eps^i (b* + b).
inline VectorOperator assemble_field(const ModeGrid& grid, const BasisPtr& basis, ShellRange shells) {
    check_grid_basis(grid, *basis);
    VectorOperator out;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> c(basis->mode_count(), 0.0);
        for (std::size_t m = 0; m < c.size(); ++m)
            if (shells.contains(grid[m].shell)) c[m] = field_coupling(grid[m]) * grid[m].eps[i];
        out[static_cast<std::size_t>(i)] = linear_form(basis, c, c);
    }
    return out;
}

/// Photon momentum components P^f_i = sum k_i n.
inline VectorOperator assemble_photon_momentum(const ModeGrid& grid, const BasisPtr& basis) {
    VectorOperator out;
    for (int i = 0; i < 3; ++i)
        out[static_cast<std::size_t>(i)] =
            weighted_number_sum(basis, grid, [i](const PhotonMode& m) { return m.k[i]; });
    return out;
}

/// Free photon energy H^f = sum |k| n.
inline FockOperator assemble_photon_energy(const ModeGrid& grid, const BasisPtr& basis) {
    return weighted_number_sum(basis, grid, [](const PhotonMode& m) { return m.knorm; });
}

/// Effective dispersion factor 1 - khat . gradE.
inline double dispersion_factor(const Vec3& khat, const Vec3& gradE) { return 1.0 - khat.dot(gradE); }

/// Sum_i a_i b_i as an operator product.
inline FockOperator dot_product(const VectorOperator& a, const VectorOperator& b) {
    FockOperator out = a[0] * b[0];
    out += a[1] * b[1];
    out += a[2] * b[2];
    return out;
}

/// Sum_i (a_i b_i + b_i a_i) / 2, symmetric whenever a and b are.
inline FockOperator symmetric_dot(const VectorOperator& a, const VectorOperator& b) {
    FockOperator out = a[0] * b[0];
    for (std::size_t i = 1; i < 3; ++i) out += a[i] * b[i];
    FockOperator sym = 0.5 * (out + out.transpose());
    return FockOperator(sym.basis(), sym.matrix(), a[0].symmetric() && b[0].symmetric());
}

/// Sum_i a_i^2 / 2, marked symmetric when the components are.
inline FockOperator half_square(const VectorOperator& a) {
    FockOperator out = a[0] * a[0];
    out += a[1] * a[1];
    out += a[2] * a[2];
    out *= 0.5;
    const bool sym = a[0].symmetric() && a[1].symmetric() && a[2].symmetric();
    return FockOperator(out.basis(), out.matrix(), sym);
}

}  // namespace fqed
