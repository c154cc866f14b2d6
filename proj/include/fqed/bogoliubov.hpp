#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fqed/field.hpp"
#include "fqed/fock.hpp"

namespace fqed {

/// Real per-mode displacement amplitudes f_m; zero outside `active`.
struct DisplacementField {
    std::vector<double> amplitude;
    ShellRange active;

    double norm() const {
        double s = 0.0;
        for (double f : amplitude) s += f * f;
        return std::sqrt(s);
    }
    DisplacementField operator-(const DisplacementField& o) const {
        DisplacementField d{amplitude, {std::min(active.first, o.active.first), std::max(active.last, o.active.last)}};
        d.amplitude.resize(std::max(amplitude.size(), o.amplitude.size()), 0.0);
        for (std::size_t m = 0; m < o.amplitude.size(); ++m) d.amplitude[m] -= o.amplitude[m];
        return d;
    }
};

/// f_m = alpha^{1/2} sqrt(w_m) (gradE . eps_m) / (|k_m|^{3/2} delta(khat_m))
/// for modes of `shells` among the first `mode_count` grid modes.
inline DisplacementField displacement_coeffs(const Vec3& gradE, const ModeGrid& grid, ShellRange shells,
                                             double alpha, std::size_t mode_count) {
    if (!(gradE.norm() < 1.0)) throw DomainError("displacement field: |gradE| must be below 1");
    if (mode_count > grid.size()) throw MismatchError("displacement field: more modes than the grid holds");
    DisplacementField field{std::vector<double>(mode_count, 0.0), shells};
    const double root_alpha = std::sqrt(alpha);
    for (std::size_t m = 0; m < mode_count; ++m) {
        const PhotonMode& mode = grid[m];
        if (!shells.contains(mode.shell)) continue;
        const double delta = dispersion_factor(mode.khat, gradE);
        if (!(delta > 0.0)) throw DomainError("displacement field: non-positive dispersion factor");
        field.amplitude[m] =
            root_alpha * std::sqrt(mode.weight) * gradE.dot(mode.eps) / (std::pow(mode.knorm, 1.5) * delta);
    }
    return field;
}

/// Generator G = sum f_m (b*_m - b_m), real antisymmetric on the truncated basis.
inline FockOperator weyl_generator(const BasisPtr& basis, const DisplacementField& field) {
    std::vector<double> create(basis->mode_count(), 0.0), annihilate(basis->mode_count(), 0.0);
    for (std::size_t m = 0; m < std::min(create.size(), field.amplitude.size()); ++m) {
        create[m] = field.amplitude[m];
        annihilate[m] = -field.amplitude[m];
    }
    return linear_form(basis, create, annihilate);
}

enum class WeylDirection { Forward, Inverse };

struct WeylResult {
    RealVector vector;
    /// | |v| - |W v| |; at rounding level because the truncated generator
    /// is exactly antisymmetric.
    double norm_defect = 0.0;
    /// Fraction of |W v|^2 in the top occupation sector, the weight that the
    /// untruncated map would partly push beyond the cap.
    double top_sector_fraction = 0.0;
};

struct WeylOptions {
    double top_sector_bound = 1e-2;
    double series_tol = 1e-17;
};

/// exp(+-G) v by a scaled Taylor expansion in the Krylov space of G.
inline WeylResult weyl_apply(const BasisPtr& basis, const DisplacementField& field, const RealVector& v,
                             WeylDirection direction = WeylDirection::Forward, const WeylOptions& opts = {}) {
    if (v.size() != static_cast<Eigen::Index>(basis->size())) throw MismatchError("weyl: vector/basis mismatch");
    FockOperator G = weyl_generator(basis, field);
    if (direction == WeylDirection::Inverse) G *= -1.0;

    double one_norm = 0.0;
    {
        RealVector colsum = RealVector::Zero(G.dim());
        for (Eigen::Index r = 0; r < G.matrix().outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(G.matrix(), r); it; ++it) colsum[it.col()] += std::abs(it.value());
        one_norm = colsum.size() ? colsum.maxCoeff() : 0.0;
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(one_norm / 0.5)));
    const double tau = 1.0 / steps;

    RealVector x = v;
    for (int s = 0; s < steps; ++s) {
        RealVector term = x;
        RealVector sum = x;
        for (int n = 1; n <= 80; ++n) {
            term = (tau / n) * G.apply(term);
            sum += term;
            if (term.norm() <= opts.series_tol * sum.norm()) break;
        }
        x = std::move(sum);
    }

    WeylResult result;
    result.norm_defect = std::abs(v.norm() - x.norm());
    const double total = x.squaredNorm();
    result.top_sector_fraction = total > 0.0 ? top_sector_weight(*basis, x) / total : 0.0;
    result.vector = std::move(x);
    if (result.top_sector_fraction > opts.top_sector_bound)
        throw TruncationError("weyl: top occupation sector holds too much weight; raise n_max");
    return result;
}

/// Pi^i = W beta^i W* - <W beta^i W*>_Omega in closed form, together with the
/// subtracted vacuum expectation.
struct PiOperators {
    VectorOperator components;
    Vec3 vacuum_expectation = Vec3::Zero();
};

/// Closed-form conjugation of beta = P^f - alpha^{1/2} A[interaction] under
/// b -> b - g.  The result is
///   P^f - alpha^{1/2} A - sum_m k_m g_m (b_m + b*_m)
/// and the vacuum expectation sum k g^2 + 2 alpha^{1/2} sum sqrt(w/|k|) eps g.
inline PiOperators pi_from_field(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis,
                                 ShellRange interaction, const DisplacementField& g) {
    check_grid_basis(grid, *basis);
    const std::size_t M = basis->mode_count();
    const double root_alpha = std::sqrt(params.alpha);
    const VectorOperator pf = assemble_photon_momentum(grid, basis);
    PiOperators out;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> c(M, 0.0);
        double shift = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const PhotonMode& mode = grid[m];
            const double gm = m < g.amplitude.size() ? g.amplitude[m] : 0.0;
            const double coupling = interaction.contains(mode.shell) ? field_coupling(mode) * mode.eps[i] : 0.0;
            c[m] = -root_alpha * coupling - mode.k[i] * gm;
            shift += mode.k[i] * gm * gm + 2.0 * root_alpha * coupling * gm;
        }
        out.components[static_cast<std::size_t>(i)] = pf[static_cast<std::size_t>(i)] + linear_form(basis, c, c);
        out.vacuum_expectation[i] = shift;
    }
    return out;
}

/// Pi at scale j built with displacement field from gradE on shells < j.
inline PiOperators pi_operator(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j,
                               const Vec3& gradE) {
    const ShellRange active = interacting_shells(j);
    const DisplacementField g = displacement_coeffs(gradE, grid, active, params.alpha, basis->mode_count());
    return pi_from_field(params, grid, basis, active, g);
}

struct GammaOperators {
    VectorOperator components;
    Vec3 shift = Vec3::Zero();
};

/// Gamma^i = Pi^i - <Pi^i>_phi, so that <phi, Gamma^i phi> = 0.
inline GammaOperators gamma_operator(const PiOperators& pi, const RealVector& phi) {
    const double nn = phi.squaredNorm();
    if (!(nn > 0.0)) throw DomainError("gamma operator: zero vector");
    GammaOperators out;
    for (std::size_t i = 0; i < 3; ++i) {
        out.shift[static_cast<Eigen::Index>(i)] = phi.dot(pi.components[i].apply(phi)) / nn;
        out.components[i] = pi.components[i];
        out.components[i].shift(-out.shift[static_cast<Eigen::Index>(i)]);
    }
    return out;
}

/// Gamma with an externally fixed shift vector.
inline GammaOperators gamma_with_shift(const PiOperators& pi, const Vec3& shift) {
    GammaOperators out;
    out.shift = shift;
    for (std::size_t i = 0; i < 3; ++i) {
        out.components[i] = pi.components[i];
        out.components[i].shift(-shift[static_cast<Eigen::Index>(i)]);
    }
    return out;
}

/// Largest |<phi, Gamma^i phi>| / |phi|^2 over the three components.
inline double gamma_orthogonality(const GammaOperators& gamma, const RealVector& phi) {
    double worst = 0.0;
    for (const auto& c : gamma.components) worst = std::max(worst, std::abs(phi.dot(c.apply(phi))) / phi.squaredNorm());
    return worst;
}

}  // namespace fqed
