#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fqed/bogoliubov.hpp"
#include "fqed/field.hpp"
#include "fqed/fock.hpp"

namespace fqed {

/// Operators of the fiber Hamiltonian at one scale.
struct ScaleOperators {
    int j = 0;
    FockOperator H;
    FockOperator Hf;
    VectorOperator A;
    VectorOperator Pf;
    VectorOperator beta;

    /// Momentum derivative of H at total momentum P: P - beta.
    VectorOperator velocity(const Vec3& P) const {
        VectorOperator q;
        for (std::size_t i = 0; i < 3; ++i) {
            q[i] = -1.0 * beta[i];
            q[i].shift(P[static_cast<Eigen::Index>(i)]);
        }
        return q;
    }
};

/// H(P) = P^2/2 - P.beta + (beta.beta/2 + H^f), cheap to re-evaluate at
/// shifted total momenta.
class FiberFamily {
public:
    FiberFamily(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j)
        : j_(j) {
        check_grid_basis(grid, *basis);
        if (j < 0 || j > params.J) throw DomainError("fiber family: scale index out of range");
        Hf_ = assemble_photon_energy(grid, basis);
        Pf_ = assemble_photon_momentum(grid, basis);
        A_ = assemble_field(grid, basis, interacting_shells(j));
        const double root_alpha = std::sqrt(params.alpha);
        for (std::size_t i = 0; i < 3; ++i) beta_[i] = Pf_[i] - root_alpha * A_[i];
        core_ = half_square(beta_) + Hf_;
    }

    int scale() const noexcept { return j_; }
    const VectorOperator& beta() const noexcept { return beta_; }
    const VectorOperator& field() const noexcept { return A_; }
    const VectorOperator& photon_momentum() const noexcept { return Pf_; }
    const FockOperator& photon_energy() const noexcept { return Hf_; }

    FockOperator at(const Vec3& P) const {
        FockOperator H = core_;
        for (std::size_t i = 0; i < 3; ++i) {
            const double p = P[static_cast<Eigen::Index>(i)];
            if (p != 0.0) H -= p * beta_[i];
        }
        H.shift(0.5 * P.squaredNorm());
        return FockOperator(H.basis(), H.matrix(), true);
    }

    ScaleOperators operators(const Vec3& P) const { return {j_, at(P), Hf_, A_, Pf_, beta_}; }

private:
    int j_;
    FockOperator Hf_;
    VectorOperator Pf_;
    VectorOperator A_;
    VectorOperator beta_;
    FockOperator core_;
};

inline ScaleOperators assemble_scale(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j) {
    return FiberFamily(params, grid, basis, j).operators(params.P);
}

/// H_P at scale j: 1/2 sum_i (P^i - P^f_i + alpha^{1/2} A^i)^2 + H^f with the
/// squares formed from truncated factors.
inline FockOperator assemble_H_fiber(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j) {
    return FiberFamily(params, grid, basis, j).at(params.P);
}

/// Slice interaction between scales j and j+1:
/// alpha^{1/2} (grad_P H . A_slice) + (alpha/2) A_slice^2.
inline FockOperator assemble_slice_interaction(const ModelParams& params, const ModeGrid& grid,
                                               const BasisPtr& basis, int j) {
    if (j < 0 || j + 1 > params.J) throw DomainError("slice interaction: scale index out of range");
    const FiberFamily family(params, grid, basis, j);
    const VectorOperator slice = assemble_field(grid, basis, {j, j + 1});
    const VectorOperator q = family.operators(params.P).velocity(params.P);
    FockOperator dH = std::sqrt(params.alpha) * symmetric_dot(q, slice);
    dH += params.alpha * half_square(slice);
    return FockOperator(dH.basis(), dH.matrix(), true);
}

/// c-number of the canonical form: P^2/2 - (P-gradE)^2/2 minus
/// alpha sum_active w (gradE.eps)^2 / (|k|^2 delta).
inline double script_E(const ModelParams& params, const ModeGrid& grid, ShellRange active, const Vec3& gradE,
                       std::size_t mode_count) {
    double sum = 0.0;
    for (std::size_t m = 0; m < mode_count; ++m) {
        const PhotonMode& mode = grid[m];
        if (!active.contains(mode.shell)) continue;
        const double delta = dispersion_factor(mode.khat, gradE);
        const double proj = gradE.dot(mode.eps);
        const double amp2 = mode.weight * proj * proj / (std::pow(mode.knorm, 3) * delta * delta);
        sum += mode.knorm * delta * amp2;
    }
    return 0.5 * params.P.squaredNorm() - 0.5 * (params.P - gradE).squaredNorm() - params.alpha * sum;
}

/// Sum over basis modes of |k| delta(khat) n.
inline FockOperator dressed_photon_energy(const ModeGrid& grid, const BasisPtr& basis, const Vec3& gradE) {
    return weighted_number_sum(basis, grid,
                               [&](const PhotonMode& m) { return m.knorm * dispersion_factor(m.khat, gradE); });
}

struct CanonicalK {
    FockOperator K;
    double script_E = 0.0;
};

/// K = Gamma^2/2 + sum |k| delta b*b + script_E with Gamma = Pi - shift.
inline CanonicalK assemble_K_canonical(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis,
                                       int j, const Vec3& gradE, const Vec3& gamma_shift) {
    if (!(gradE.norm() < 1.0)) throw DomainError("canonical K: |gradE| must be below 1");
    const PiOperators pi = pi_operator(params, grid, basis, j, gradE);
    const GammaOperators gamma = gamma_with_shift(pi, gamma_shift);
    CanonicalK out;
    out.script_E = script_E(params, grid, interacting_shells(j), gradE, basis->mode_count());
    out.K = half_square(gamma.components) + dressed_photon_energy(grid, basis, gradE);
    out.K.shift(out.script_E);
    out.K = FockOperator(out.K.basis(), out.K.matrix(), true);
    return out;
}

/// Per-component ladder coefficients of the slice operator L and the
/// c-number vector I for the slice of shell j-1.
struct SliceCoefficients {
    std::array<std::vector<double>, 3> ladder;
    Vec3 I = Vec3::Zero();
};

inline SliceCoefficients slice_coefficients(const ModelParams& params, const ModeGrid& grid, std::size_t mode_count,
                                            int j, const Vec3& gradE_prev) {
    if (j < 1) throw DomainError("slice operators: need j >= 1");
    const ShellRange slice{j - 1, j};
    const DisplacementField g = displacement_coeffs(gradE_prev, grid, slice, params.alpha, mode_count);
    const double root_alpha = std::sqrt(params.alpha);
    SliceCoefficients out;
    for (int i = 0; i < 3; ++i) {
        auto& c = out.ladder[static_cast<std::size_t>(i)];
        c.assign(mode_count, 0.0);
        for (std::size_t m = 0; m < mode_count; ++m) {
            const PhotonMode& mode = grid[m];
            if (!slice.contains(mode.shell)) continue;
            const double gm = g.amplitude[m];
            const double coupling = field_coupling(mode) * mode.eps[i];
            c[m] = -mode.k[i] * gm - root_alpha * coupling;
            out.I[i] += mode.k[i] * gm * gm + 2.0 * root_alpha * coupling * gm;
        }
    }
    return out;
}

/// Slice operators entering the intermediate Hamiltonian at scale j:
/// L is linear in the shell-(j-1) ladder operators, I is a c-number vector.
struct SliceOperators {
    VectorOperator L;
    Vec3 I = Vec3::Zero();
};

inline SliceOperators assemble_slice_operators(const ModelParams& params, const ModeGrid& grid,
                                               const BasisPtr& basis, int j, const Vec3& gradE_prev) {
    const SliceCoefficients coeffs = slice_coefficients(params, grid, basis->mode_count(), j, gradE_prev);
    SliceOperators out;
    for (std::size_t i = 0; i < 3; ++i) out.L[i] = linear_form(basis, coeffs.ladder[i], coeffs.ladder[i]);
    out.I = coeffs.I;
    return out;
}

/// Creation part L^(+) of the slice operator.
inline VectorOperator assemble_slice_creation(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis,
                                              int j, const Vec3& gradE_prev) {
    const SliceCoefficients coeffs = slice_coefficients(params, grid, basis->mode_count(), j, gradE_prev);
    const std::vector<double> none(basis->mode_count(), 0.0);
    VectorOperator out;
    for (std::size_t i = 0; i < 3; ++i) out[i] = linear_form(basis, coeffs.ladder[i], none);
    return out;
}

/// Gamma^{j-1} + L + I as a vector operator.
inline VectorOperator dressed_gamma(const GammaOperators& gamma_prev, const SliceOperators& slice) {
    VectorOperator out;
    for (std::size_t i = 0; i < 3; ++i) {
        out[i] = gamma_prev.components[i] + slice.L[i];
        out[i].shift(slice.I[static_cast<Eigen::Index>(i)]);
    }
    return out;
}

struct IntermediateK {
    FockOperator K_hat;
    double script_E_hat = 0.0;
    double script_E_prev = 0.0;
    FockOperator K_prev;
    /// Delta K = K_hat - script_E_hat + script_E_prev - K_prev, assembled
    /// directly as (Gamma.(L+I) + h.c.)/2 + (L+I)^2/2.
    FockOperator delta;
};

/// K_hat at scale j from gradE and Gamma-shift of scale j-1.
inline IntermediateK assemble_K_hat(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j,
                                    const Vec3& gradE_prev, const Vec3& gamma_shift_prev) {
    if (j < 1) throw DomainError("intermediate K: need j >= 1");
    if (!(gradE_prev.norm() < 1.0)) throw DomainError("intermediate K: |gradE| must be below 1");
    const PiOperators pi = pi_operator(params, grid, basis, j - 1, gradE_prev);
    const GammaOperators gamma = gamma_with_shift(pi, gamma_shift_prev);
    const SliceOperators slice = assemble_slice_operators(params, grid, basis, j, gradE_prev);
    const FockOperator dressed_energy = dressed_photon_energy(grid, basis, gradE_prev);

    IntermediateK out;
    out.script_E_prev = script_E(params, grid, interacting_shells(j - 1), gradE_prev, basis->mode_count());
    out.script_E_hat = script_E(params, grid, interacting_shells(j), gradE_prev, basis->mode_count());

    out.K_prev = half_square(gamma.components) + dressed_energy;
    out.K_prev.shift(out.script_E_prev);
    out.K_prev = FockOperator(out.K_prev.basis(), out.K_prev.matrix(), true);

    out.K_hat = half_square(dressed_gamma(gamma, slice)) + dressed_energy;
    out.K_hat.shift(out.script_E_hat);
    out.K_hat = FockOperator(out.K_hat.basis(), out.K_hat.matrix(), true);

    VectorOperator li;
    for (std::size_t i = 0; i < 3; ++i) {
        li[i] = slice.L[i];
        li[i].shift(slice.I[static_cast<Eigen::Index>(i)]);
    }
    out.delta = symmetric_dot(gamma.components, li) + half_square(li);
    out.delta = FockOperator(out.delta.basis(), out.delta.matrix(), true);
    return out;
}

}  // namespace fqed
