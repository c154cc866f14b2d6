#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fqed/cascade.hpp"

namespace fqed {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Index of the single non-zero component of an on-axis momentum.
inline int momentum_axis(const Vec3& P) {
    int axis = 0, nonzero = 0;
    for (int i = 0; i < 3; ++i)
        if (P[i] != 0.0) {
            axis = i;
            ++nonzero;
        }
    if (nonzero > 1) throw DomainError("second derivative: P must lie on a coordinate axis");
    return axis;
}

inline Vec3 unit_axis(int axis) {
    Vec3 e = Vec3::Zero();
    e[axis] = 1.0;
    return e;
}

inline double fiber_energy(const FiberFamily& family, const Vec3& P, const LanczosOptions& opts = {}) {
    return ground_state(family.at(P), opts).energy;
}

// ------------------------------------------------------------------- gradients

/// P - <P^f - alpha^{1/2} A>_psi, after checking that psi is an eigenvector.
inline Vec3 gradE_feynman_hellmann(const RealVector& psi, const ModelParams& params, const ModeGrid& grid,
                                   const BasisPtr& basis, int j, double residual_tol = 1e-8) {
    const FiberFamily family(params, grid, basis, j);
    const FockOperator H = family.at(params.P);
    const double nn = psi.squaredNorm();
    const double E = psi.dot(H.apply(psi)) / nn;
    const double residual = (H.apply(psi) - E * psi).norm() / std::sqrt(nn);
    if (residual > residual_tol)
        throw DomainError(fmt::format("Feynman-Hellmann: stale input, eigen-residual {:.3e}", residual));
    return feynman_hellmann_gradient(family, params.P, psi / std::sqrt(nn));
}

/// Central three-point differences of the ground energy, one fresh solve per point.
inline Vec3 gradE_finite_difference(const FiberFamily& family, const Vec3& P, double h,
                                    const LanczosOptions& opts = {}) {
    std::array<double, 6> E{};
    parallel_for(6, [&](std::size_t n) {
        const int i = static_cast<int>(n / 2);
        const double sign = n % 2 == 0 ? 1.0 : -1.0;
        E[n] = fiber_energy(family, P + sign * h * unit_axis(i), opts);
    });
    Vec3 g;
    for (int i = 0; i < 3; ++i) g[i] = (E[2 * i] - E[2 * i + 1]) / (2.0 * h);
    return g;
}

/// Five-point second difference along `axis`.
inline double d2E_finite_difference(const FiberFamily& family, const Vec3& P, int axis, double h,
                                    const LanczosOptions& opts = {}) {
    const std::array<double, 5> offsets{-2.0, -1.0, 0.0, 1.0, 2.0};
    std::array<double, 5> E{};
    parallel_for(5, [&](std::size_t n) { E[n] = fiber_energy(family, P + offsets[n] * h * unit_axis(axis), opts); });
    return (-E[0] + 16.0 * E[1] - 30.0 * E[2] + 16.0 * E[3] - E[4]) / (12.0 * h * h);
}

// ------------------------------------------------------ contour second derivative

namespace detail {

/// R(z_q) v for every upper-half node and every vector, each vector served
/// by one multi-shift solve.
struct NodeSolves {
    std::vector<Complex> nodes;
    std::vector<std::vector<ComplexVector>> x;

    NodeSolves(const Resolvent& R, const Contour& c, const std::vector<RealVector>& vs) : nodes(c.upper_nodes()) {
        for (const RealVector& v : vs) x.push_back(R.apply_many(nodes, v));
    }
};

/// Unconjugated bilinear form a^T b.
inline Complex bilinear(const ComplexVector& a, const ComplexVector& b) { return (a.array() * b.array()).sum(); }

/// Full-contour sum of w_q f(q) for an integrand real on the real axis.
template <typename Integrand>
double contour_sum(const Contour& c, std::size_t count, Integrand&& f) {
    double sum = 0.0;
    for (std::size_t q = 0; q < count; ++q) sum += 2.0 * (c.weight(static_cast<int>(q)) * f(q)).real();
    return sum;
}

}  // namespace detail

/// 1 - 2 <dH psi, (1/2 pi i) contour-integral R dH R dz psi> / |psi|^2 with
/// dH = P^i - beta^i along the axis of P.  Since R(z) is complex symmetric,
/// the integrand equals (R dH psi)^T dH (R psi).
inline double d2E_H_contour(const RealVector& psi, const ModelParams& params, const ModeGrid& grid,
                            const BasisPtr& basis, int j, const Contour& contour,
                            const ResolventOptions& ropts = {}) {
    contour.validate();
    const int axis = momentum_axis(params.P);
    const FiberFamily family(params, grid, basis, j);
    const FockOperator H = family.at(params.P);
    const FockOperator dH = family.operators(params.P).velocity(params.P)[static_cast<std::size_t>(axis)];
    const Resolvent R(H, ropts);
    const detail::NodeSolves s(R, contour, {psi, dH.apply(psi)});
    const double integral = detail::contour_sum(contour, s.nodes.size(), [&](std::size_t q) {
        return detail::bilinear(s.x[1][q], dH.apply(s.x[0][q]));
    });
    return 1.0 - 2.0 * integral / psi.squaredNorm();
}

struct KContourResult {
    /// Double-resolvent form.
    double value = 0.0;
    /// Single-resolvent reduced form.
    double reduced = 0.0;
    /// Contribution of the dE x Gamma mixed terms to the second derivative.
    double cross_term = 0.0;
    /// Contribution of the (dE)^2 term.
    double square_term = 0.0;
    double orthogonality = 0.0;
    double energy = 0.0;
};

/// Second derivative in the transformed picture for normalized phi:
/// 1 - 2 <Gamma phi, (1/2 pi i) int R Gamma R dz phi>, together with the
/// single-resolvent form 1 - (1/pi i) int <Gamma phi, R Gamma phi> / (E - z) dz
/// and the terms of the expansion of [dE - Gamma] that carry dE.
inline KContourResult d2E_K_contour(const RealVector& phi, const GammaOperators& gamma, const FockOperator& K,
                                    int axis, double dE, const Contour& contour, const ResolventOptions& ropts = {},
                                    double orthogonality_tol = 1e-10) {
    contour.validate();
    KContourResult out;
    const RealVector u = phi.normalized();
    const FockOperator& G = gamma.components[static_cast<std::size_t>(axis)];
    out.orthogonality = gamma_orthogonality(gamma, u);
    if (out.orthogonality > orthogonality_tol)
        throw DomainError(fmt::format("K-route second derivative: <Gamma> = {:.3e} violates orthogonality",
                                      out.orthogonality));
    out.energy = u.dot(K.apply(u));
    const Resolvent R(K, ropts);
    const RealVector gu = G.apply(u);
    const detail::NodeSolves s(R, contour, {u, gu});
    const auto& Ru = s.x[0];
    const auto& RGu = s.x[1];
    const std::size_t n = s.nodes.size();

    out.value = 1.0 - 2.0 * detail::contour_sum(contour, n, [&](std::size_t q) {
                    return detail::bilinear(RGu[q], G.apply(Ru[q]));
                });
    out.reduced = 1.0 - 2.0 * detail::contour_sum(contour, n, [&](std::size_t q) {
                      return gu.cast<Complex>().dot(RGu[q]) / (out.energy - s.nodes[q]);
                  });
    out.cross_term = 2.0 * dE * detail::contour_sum(contour, n, [&](std::size_t q) {
                         return detail::bilinear(Ru[q], G.apply(Ru[q])) + detail::bilinear(Ru[q], RGu[q]);
                     });
    out.square_term = -2.0 * dE * dE * detail::contour_sum(contour, n, [&](std::size_t q) {
                          return detail::bilinear(Ru[q], Ru[q]);
                      });
    return out;
}

/// Convenience: K-route at a cascade scale, with K and Gamma rebuilt on the sector.
inline KContourResult d2E_K_at_scale(const CascadeState& state, const ModeGrid& grid, int j, const Contour& contour,
                                     const ResolventOptions& ropts = {}) {
    const ScaleRecord& rec = state.at(j);
    const BasisPtr& basis = (*state.sectors)[j];
    const CanonicalK K = assemble_K_canonical(state.params, grid, basis, j, rec.gradE, rec.gamma_shift);
    const GammaOperators gamma =
        gamma_with_shift(pi_operator(state.params, grid, basis, j, rec.gradE), rec.gamma_shift);
    const int axis = momentum_axis(state.params.P);
    return d2E_K_contour(rec.phi, gamma, K.K, axis, rec.gradE[axis], contour, ropts);
}

/// Final-scale contour: centred at E with radius rho^- sigma_j / 2.
inline Contour final_contour(const ModelParams& params, int j, double E, int nodes = 64) {
    return {E, 0.5 * params.rho_minus * params.sigma(j), nodes};
}

// ------------------------------------------------------------------ mass scan

struct MassScanRow {
    double alpha = 0.0;
    int j = 0;
    double sigma = 0.0;
    Vec3 P = Vec3::Zero();
    double E = kNaN;
    Vec3 gradE_FH = Vec3::Constant(kNaN);
    Vec3 gradE_FD = Vec3::Constant(kNaN);
    double d2E_FD = kNaN;
    double d2E_H = kNaN;
    double d2E_K = kNaN;
    double m_r = kNaN;
    double delta_HK = kNaN;
    double delta_HF = kNaN;
    std::string error;
};

struct MassScanFamily {
    double alpha = 0.0;
    Vec3 P = Vec3::Zero();
    /// Last-scale d2E and a geometric tail estimate from successive differences.
    double limit_estimate = kNaN;
    double tail_estimate = kNaN;
    std::vector<double> successive_differences;
};

struct MassScanOptions {
    CascadeOptions cascade;
    ResolventOptions resolvent;
    double gradient_step = 1e-3;
    double curvature_step = 5e-3;
    bool k_route = true;
};

struct MassScanResult {
    std::vector<MassScanRow> rows;
    std::vector<MassScanFamily> families;
};

inline std::vector<MassScanRow> mass_scan_rows(const CascadeState& state, const ModeGrid& grid,
                                               const MassScanOptions& opts) {
    const ModelParams& p = state.params;
    const int axis = momentum_axis(p.P);
    std::vector<MassScanRow> rows;
    for (const ScaleRecord& rec : state.scales) {
        MassScanRow row;
        row.alpha = p.alpha;
        row.j = rec.j;
        row.sigma = rec.sigma;
        row.P = p.P;
        try {
            const BasisPtr& basis = (*state.sectors)[rec.j];
            const FiberFamily family(p, grid, basis, rec.j);
            row.E = rec.E;
            row.gradE_FH = rec.gradE;
            row.gradE_FD = gradE_finite_difference(family, p.P, opts.gradient_step, opts.cascade.lanczos);
            row.d2E_FD = d2E_finite_difference(family, p.P, axis, opts.curvature_step, opts.cascade.lanczos);
            const Contour c = final_contour(p, rec.j, rec.E);
            row.d2E_H = d2E_H_contour(rec.psi, p, grid, basis, rec.j, c, opts.resolvent);
            if (opts.k_route) {
                row.d2E_K = d2E_K_at_scale(state, grid, rec.j, c, opts.resolvent).value;
                row.delta_HK = std::abs(row.d2E_H - row.d2E_K);
            }
            row.delta_HF = std::abs(row.d2E_H - row.d2E_FD);
            row.m_r = 1.0 / row.d2E_H;
        } catch (const Error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MassScanFamily summarize_family(const std::vector<MassScanRow>& rows) {
    MassScanFamily fam;
    if (rows.empty()) return fam;
    fam.alpha = rows.front().alpha;
    fam.P = rows.front().P;
    fam.limit_estimate = rows.back().d2E_H;
    for (std::size_t j = 1; j < rows.size(); ++j)
        fam.successive_differences.push_back(std::abs(rows[j].d2E_H - rows[j - 1].d2E_H));
    const auto& d = fam.successive_differences;
    if (!d.empty()) {
        const double last = d.back();
        const double ratio = d.size() >= 2 && d[d.size() - 2] > 0.0 ? last / d[d.size() - 2] : 1.0;
        fam.tail_estimate = ratio < 1.0 ? last * ratio / (1.0 - ratio) : last;
    }
    return fam;
}

/// Cascades for every (alpha, P) pair with rows at every scale.  A failing
/// pair yields one annotated row and the scan moves on.
inline MassScanResult mass_scan(const std::vector<double>& alphas, const std::vector<Vec3>& momenta,
                                const ModelParams& base, const ModeGrid& grid, const BasisPtr& basis,
                                const MassScanOptions& opts = {}) {
    if (alphas.empty() || momenta.empty()) throw ParameterError("mass scan: empty alpha or P list");
    MassScanResult out;
    for (double alpha : alphas)
        for (const Vec3& P : momenta) {
            ModelParams p = base;
            p.alpha = alpha;
            p.P = P;
            std::vector<MassScanRow> rows;
            try {
                rows = mass_scan_rows(run_cascade(p, grid, basis, opts.cascade), grid, opts);
            } catch (const Error& e) {
                MassScanRow row;
                row.alpha = alpha;
                row.P = P;
                row.j = -1;
                row.error = e.what();
                rows.push_back(std::move(row));
            }
            out.families.push_back(summarize_family(rows));
            out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        }
    return out;
}

inline void write_mass_scan_csv(std::ostream& out, const MassScanResult& scan, const std::string& config_hash) {
    out << "alpha,j,sigma,Px,Py,Pz,E,gE_FH_x,gE_FH_y,gE_FH_z,gE_FD_x,gE_FD_y,gE_FD_z,d2E_fd,d2E_H,d2E_K,m_r,"
           "delta_HK,delta_HF,error\n";
    for (const auto& r : scan.rows) {
        out << format_double(r.alpha) << ',' << r.j;
        for (double v : {r.sigma, r.P[0], r.P[1], r.P[2], r.E, r.gradE_FH[0], r.gradE_FH[1], r.gradE_FH[2],
                         r.gradE_FD[0], r.gradE_FD[1], r.gradE_FD[2], r.d2E_FD, r.d2E_H, r.d2E_K, r.m_r, r.delta_HK,
                         r.delta_HF})
            out << ',' << format_double(v);
        std::string err = r.error;
        for (char& ch : err)
            if (ch == ',' || ch == '\n') ch = ';';
        out << ',' << err << '\n';
    }
    for (const auto& f : scan.families)
        out << fmt::format("# family alpha={} P=({},{},{}) limit={:.12g} tail={:.3e}\n", f.alpha, f.P[0], f.P[1],
                           f.P[2], f.limit_estimate, f.tail_estimate);
    out << "# config_hash=" << config_hash << '\n';
    out << "# artifact_version=" << kArtifactVersion << '\n';
}

// ------------------------------------------------------------ soft photons

struct SoftPhotonEntry {
    std::size_t mode = 0;
    double knorm = 0.0;
    double occupation_norm = 0.0;
    double bound_factor = 0.0;
    double ratio = 0.0;
};

struct SoftPhotonTable {
    std::vector<SoftPhotonEntry> entries;
    double constant = 0.0;
};

/// Per active mode: |b_m psi| |k|^{3/2} / (alpha^{1/2} sqrt(w)) for normalized psi.
inline SoftPhotonTable soft_photon_probe(const RealVector& psi, const ModelParams& params, const ModeGrid& grid,
                                         const BasisPtr& basis, int j) {
    SoftPhotonTable table;
    const RealVector u = psi.normalized();
    const ShellRange active = interacting_shells(j);
    for (std::size_t m = 0; m < basis->mode_count(); ++m) {
        const PhotonMode& mode = grid[m];
        if (!active.contains(mode.shell)) continue;
        SoftPhotonEntry e;
        e.mode = m;
        e.knorm = mode.knorm;
        e.occupation_norm = ladder(basis, m).annihilate.apply(u).norm();
        e.bound_factor = std::sqrt(params.alpha * mode.weight) / std::pow(mode.knorm, 1.5);
        e.ratio = e.bound_factor > 0.0 ? e.occupation_norm / e.bound_factor : 0.0;
        table.constant = std::max(table.constant, e.ratio);
        table.entries.push_back(e);
    }
    return table;
}

// ------------------------------------------------------------- pull-through

/// |b_m psi - rhs| / |b_m psi| where
/// rhs = -alpha^{1/2} sqrt(w/|k|) (H_{P-k} + |k| - E)^{-1} eps.(P - beta) psi.
inline double pull_through_probe(const RealVector& psi, double E, const ModelParams& params, const ModeGrid& grid,
                                 const BasisPtr& basis, int j, std::size_t m,
                                 const ResolventOptions& ropts = {}) {
    if (m >= basis->mode_count()) throw DomainError("pull-through: mode outside the basis");
    const PhotonMode& mode = grid[m];
    if (!interacting_shells(j).contains(mode.shell)) throw DomainError("pull-through: mode is not active at scale j");
    if (params.alpha == 0.0) return 0.0;
    const RealVector u = psi.normalized();
    const FiberFamily family(params, grid, basis, j);
    const RealVector lhs = ladder(basis, m).annihilate.apply(u);

    const VectorOperator v = family.operators(params.P).velocity(params.P);
    RealVector source = RealVector::Zero(u.size());
    for (int i = 0; i < 3; ++i) source += mode.eps[i] * v[static_cast<std::size_t>(i)].apply(u);
    source *= -std::sqrt(params.alpha) * field_coupling(mode);

    const FockOperator shifted = family.at(params.P - mode.k);
    const ComplexVector x = Resolvent(shifted, ropts).apply(Complex(E - mode.knorm, 0.0), source.cast<Complex>());
    const RealVector rhs = x.real();
    const double ln = lhs.norm();
    return ln > 0.0 ? (lhs - rhs).norm() / ln : (lhs - rhs).norm();
}

/// Largest pull-through residual over the active modes.
inline double pull_through_max(const RealVector& psi, double E, const ModelParams& params, const ModeGrid& grid,
                               const BasisPtr& basis, int j, const ResolventOptions& ropts = {}) {
    std::vector<std::size_t> active;
    for (std::size_t m = 0; m < basis->mode_count(); ++m)
        if (interacting_shells(j).contains(grid[m].shell)) active.push_back(m);
    std::vector<double> res(active.size(), 0.0);
    parallel_for(active.size(),
                 [&](std::size_t n) { res[n] = pull_through_probe(psi, E, params, grid, basis, j, active[n], ropts); });
    double worst = 0.0;
    for (double r : res) worst = std::max(worst, r);
    return worst;
}

// ------------------------------------------------------------------ C_alpha

struct CAlphaResult {
    double value = -std::numeric_limits<double>::infinity();
    Vec3 P = Vec3::Zero();
    std::size_t mode = 0;
};

/// Sup over distinct grid momenta k of (E_P - E_{P-k}) / |k| at scale j.
inline CAlphaResult c_alpha_probe(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j,
                                  const LanczosOptions& opts = {}) {
    const FiberFamily family(params, grid, basis, j);
    const double EP = fiber_energy(family, params.P, opts);
    std::vector<std::size_t> momenta;
    for (std::size_t m = 0; m < grid.size(); ++m)
        if (grid[m].lambda == 1) momenta.push_back(m);
    std::vector<double> q(momenta.size());
    parallel_for(momenta.size(), [&](std::size_t n) {
        const PhotonMode& mode = grid[momenta[n]];
        q[n] = (EP - fiber_energy(family, params.P - mode.k, opts)) / mode.knorm;
    });
    CAlphaResult best;
    best.P = params.P;
    for (std::size_t n = 0; n < q.size(); ++n)
        if (q[n] > best.value) {
            best.value = q[n];
            best.mode = momenta[n];
        }
    return best;
}

/// Largest probe value over a list of total momenta.
inline CAlphaResult c_alpha_sup(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis, int j,
                                const std::vector<Vec3>& momenta, const LanczosOptions& opts = {}) {
    CAlphaResult best;
    for (const Vec3& P : momenta) {
        ModelParams p = params;
        p.P = P;
        const CAlphaResult r = c_alpha_probe(p, grid, basis, j, opts);
        if (r.value > best.value) best = r;
    }
    return best;
}

/// Decoupled value: sup over momenta and grid modes of P.khat - |k|/2.
inline double c_alpha_free(const ModeGrid& grid, const std::vector<Vec3>& momenta) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec3& P : momenta)
        for (const PhotonMode& m : grid) best = std::max(best, P.dot(m.khat) - 0.5 * m.knorm);
    return best;
}

// --------------------------------------------------------------- bound probes

struct BoundsScale {
    int j = 0;
    double energy_shift = kNaN;
    double C1 = kNaN;
    double grad_shift = kNaN;
    double C2 = kNaN;
    double C3 = kNaN;
    double C4 = kNaN;
    double C5 = kNaN;
    /// |<Gamma Phi, R^2 Gamma Phi>| on the contour and the implied R0.
    double theorem_lhs = kNaN;
    double R0 = kNaN;
    bool resolvent_bounds_skipped = false;
};

struct BoundsReport {
    std::vector<BoundsScale> scales;
    double delta = 0.2;
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0, C5 = 0.0, R0 = 0.0;

    void print(std::ostream& out) const {
        out << "[B1] |E_j - E_j+1| <= C1 alpha eps^j\n";
        for (const auto& s : scales) out << fmt::format("  j={} shift={:.6e} C1_j={:.6g}\n", s.j, s.energy_shift, s.C1);
        out << fmt::format("  fitted C1={:.6g}\n", C1);
        out << "[B2] |dgradE| <= C2 (|Phi_hat - Phi| + alpha^(1/4) eps^(j+1))\n";
        for (const auto& s : scales) out << fmt::format("  j={} shift={:.6e} C2_j={:.6g}\n", s.j, s.grad_shift, s.C2);
        out << fmt::format("  fitted C2={:.6g}\n", C2);
        out << "[B3-B5] absolute-value resolvent expectations\n";
        for (const auto& s : scales) {
            if (s.resolvent_bounds_skipped)
                out << fmt::format("  j={} skipped: sector above the dense limit\n", s.j);
            else
                out << fmt::format("  j={} C3={:.6g} C4={:.6g} C5={:.6g}\n", s.j, s.C3, s.C4, s.C5);
        }
        out << fmt::format("  fitted C3={:.6g} C4={:.6g} C5={:.6g}\n", C3, C4, C5);
        out << fmt::format("[Induction] |<Gamma Phi, R^2 Gamma Phi>| <= R0 alpha^(-1/2) eps^(-2 j delta), delta={}\n",
                           delta);
        for (const auto& s : scales)
            out << fmt::format("  j={} lhs={:.6e} R0_j={:.6g}\n", s.j, s.theorem_lhs, s.R0);
        out << fmt::format("  fitted R0={:.6g}\n", R0);
    }
};

struct BoundsOptions {
    double delta = 0.2;
    int sample_nodes = 16;
    std::size_t dense_limit = kDefaultDenseLimit;
};

/// Measured sides of the energy, gradient and resolvent bounds along a cascade.
inline BoundsReport bounds_probe_B(const CascadeState& state, const ModeGrid& grid, const BoundsOptions& opts = {}) {
    const ModelParams& p = state.params;
    BoundsReport report;
    report.delta = opts.delta;
    auto fold = [](double& acc, double v) {
        if (std::isfinite(v)) acc = std::max(acc, v);
    };
    for (int j = 0; j < state.last(); ++j) {
        const ScaleRecord& rec = state.at(j);
        BoundsScale s;
        s.j = j;
        const double ej = std::pow(p.epsilon, j);
        s.energy_shift = rec.energy_shift;
        s.grad_shift = rec.grad_shift;
        s.C1 = p.alpha > 0.0 ? std::abs(rec.energy_shift) / (p.alpha * ej) : 0.0;
        s.C2 = rec.grad_shift / (rec.step_norm + std::pow(p.alpha, 0.25) * ej * p.epsilon);
        if (!std::isfinite(s.C2)) s.C2 = 0.0;

        const BasisPtr& sector = (*state.sectors)[j + 1];
        if (sector->size() > opts.dense_limit) {
            s.resolvent_bounds_skipped = true;
        } else {
            const RealVector phi = state.sectors->lift(rec.phi, j, j + 1);
            const CanonicalK K = assemble_K_canonical(p, grid, sector, j, rec.gradE, rec.gamma_shift);
            const GammaOperators gamma = gamma_with_shift(pi_operator(p, grid, sector, j, rec.gradE), rec.gamma_shift);
            const VectorOperator Lplus = assemble_slice_creation(p, grid, sector, j + 1, rec.gradE);
            const DenseSpectrum spectrum = dense_spectrum(K.K, opts.dense_limit);
            const Contour contour{rec.E, p.mu * p.sigma(j + 1), opts.sample_nodes};

            std::vector<RealVector> gv, lv;
            for (std::size_t i = 0; i < 3; ++i) {
                gv.push_back(spectrum.vectors.transpose() * gamma.components[i].apply(phi));
                for (std::size_t l = 0; l < 3; ++l)
                    lv.push_back(spectrum.vectors.transpose() * Lplus[l].apply(gamma.components[i].apply(phi)));
            }
            auto ratio = [&](const RealVector& c, Complex z, int kind) {
                double abs_side = 0.0;
                Complex plain = 0.0;
                for (Eigen::Index n = 0; n < c.size(); ++n) {
                    const double c2 = c[n] * c[n];
                    const Complex r = 1.0 / (spectrum.values[n] - z);
                    if (kind == 2) {
                        abs_side += c2 * std::norm(r);
                        plain += c2 * r * r;
                    } else {
                        abs_side += c2 * std::abs(r);
                        plain += c2 * r;
                    }
                }
                return std::pair<double, double>{abs_side, std::abs(plain)};
            };
            double c3 = 0.0, c4 = 0.0, c5 = 0.0, lhs = 0.0;
            const double floor = 1e-300;
            for (int q = 0; q < contour.nodes; ++q) {
                const Complex z = contour.node(q);
                for (const RealVector& c : gv) {
                    if (c.squaredNorm() < floor) continue;
                    const auto [a3, p3] = ratio(c, z, 1);
                    const auto [a5, p5] = ratio(c, z, 2);
                    c3 = std::max(c3, a3 / p3);
                    c5 = std::max(c5, a5 / p5);
                    lhs = std::max(lhs, p5);
                }
                for (const RealVector& c : lv) {
                    if (c.squaredNorm() < floor) continue;
                    const auto [a4, p4] = ratio(c, z, 1);
                    c4 = std::max(c4, a4 / p4);
                }
            }
            s.C3 = c3;
            s.C4 = c4;
            s.C5 = c5;
            s.theorem_lhs = lhs;
            s.R0 = lhs * std::sqrt(p.alpha) * std::pow(p.epsilon, 2.0 * j * opts.delta);
        }
        fold(report.C1, s.C1);
        fold(report.C2, s.C2);
        fold(report.C3, s.C3);
        fold(report.C4, s.C4);
        fold(report.C5, s.C5);
        fold(report.R0, s.R0);
        report.scales.push_back(s);
    }
    return report;
}

}  // namespace fqed
