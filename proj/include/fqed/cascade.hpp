#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fqed/bogoliubov.hpp"
#include "fqed/hamiltonian.hpp"
#include "fqed/spectral.hpp"

namespace fqed {

inline constexpr const char* kArtifactVersion = "1.0.0";

// ------------------------------------------------------------ parameter checks

struct ConstraintCheck {
    std::string name;
    std::string detail;
    bool passed = false;
    /// Distance to the boundary of the admissible region (negative on failure).
    double slack = 0.0;
    /// Domain checks guard the model definition; the rest relate the
    /// cascade control parameters to each other.
    bool domain = false;
};

struct ConstraintReport {
    std::vector<ConstraintCheck> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    const ConstraintCheck* first_failure() const {
        for (const auto& c : checks)
            if (!c.passed) return &c;
        return nullptr;
    }
    void print(std::ostream& out) const {
        for (const auto& c : checks)
            out << fmt::format("{:<7} {:<6} {:<34} slack={:+.6g}  {}\n", c.domain ? "domain" : "relation",
                               c.passed ? "PASS" : "FAIL", c.name, c.slack, c.detail);
    }
};

inline ConstraintReport validate_params(const ModelParams& p) {
    ConstraintReport r;
    auto add = [&](std::string name, double slack, std::string detail, bool domain) {
        r.checks.push_back({std::move(name), std::move(detail), slack > 0.0, slack, domain});
    };
    add("0 < epsilon < 1/2", std::min(p.epsilon, 0.5 - p.epsilon), fmt::format("epsilon={}", p.epsilon), true);
    add("|P| < 1/3", 1.0 / 3.0 - p.P.norm(), fmt::format("|P|={:.6g}", p.P.norm()), true);
    add("alpha >= 0", p.alpha >= 0.0 ? 1.0 : p.alpha, fmt::format("alpha={}", p.alpha), true);
    add("1/3 < C_alpha < 1", std::min(p.C_alpha_assumed - 1.0 / 3.0, 1.0 - p.C_alpha_assumed),
        fmt::format("C_alpha={}", p.C_alpha_assumed), true);
    add("J >= 1 and Lambda > 0", std::min<double>(p.J, p.Lambda), fmt::format("J={} Lambda={}", p.J, p.Lambda), true);

    const double chain = std::min({p.rho_minus, p.mu - p.rho_minus, p.rho_plus - p.mu,
                                   (1.0 - p.C_alpha_assumed) - p.rho_plus, 2.0 / 3.0 - (1.0 - p.C_alpha_assumed)});
    add("0 < rho- < mu < rho+ < 1-C_a < 2/3", chain,
        fmt::format("{} < {} < {} < {:.6g}", p.rho_minus, p.mu, p.rho_plus, 1.0 - p.C_alpha_assumed), false);
    add("epsilon < rho-/rho+", p.rho_minus / p.rho_plus - p.epsilon,
        fmt::format("{} < {:.6g}", p.epsilon, p.rho_minus / p.rho_plus), false);
    add("epsilon > C sqrt(alpha)", p.epsilon - p.ir_floor_C * std::sqrt(std::max(p.alpha, 0.0)),
        fmt::format("{} > {:.6g}", p.epsilon, p.ir_floor_C * std::sqrt(std::max(p.alpha, 0.0))), false);
    add("rho- > 3 mu epsilon", p.rho_minus - 3.0 * p.mu * p.epsilon,
        fmt::format("{} > {:.6g}", p.rho_minus, 3.0 * p.mu * p.epsilon), false);
    return r;
}

// --------------------------------------------------------------------- sectors

/// Bases of the nested sectors: sector j spans the modes of shells < j with
/// the caps of the full basis, so sector 0 is the vacuum line and sector J
/// is the full basis.
struct SectorLadder {
    std::vector<BasisPtr> bases;

    SectorLadder(const ModeGrid& grid, const FockBasis& full) {
        const int J = grid.cutoffs().scales();
        if (full.mode_count() != grid.size())
            throw MismatchError("sectors: the basis must span every mode of the grid");
        for (int j = 0; j <= J; ++j)
            bases.push_back(enumerate_basis(grid.modes_above(j), full.n_max(), full.c_max(),
                                            std::max<std::size_t>(full.size(), 1)));
    }

    const BasisPtr& operator[](int j) const { return bases.at(static_cast<std::size_t>(j)); }
    int top() const noexcept { return static_cast<int>(bases.size()) - 1; }

    /// Embeds a sector-`from` vector into sector `to` (to >= from).
    RealVector lift(const RealVector& v, int from, int to) const {
        if (from == to) return v;
        return embed(v, embedding(*(*this)[from], *(*this)[to]), (*this)[to]->size());
    }
};

// ----------------------------------------------------------------------- state

struct ScaleRecord {
    int j = 0;
    double sigma = 0.0;
    std::size_t dim = 0;
    double E = 0.0;
    Vec3 gradE = Vec3::Zero();
    RealVector psi;
    RealVector phi;
    RealVector phi_hat;
    double gap_Fsigma = 0.0;
    double gap_Fnext = std::numeric_limits<double>::quiet_NaN();
    double psi_residual = 0.0;
    Vec3 gamma_shift = Vec3::Zero();
    double gamma_orth = 0.0;
    double K_energy_delta = std::numeric_limits<double>::quiet_NaN();
    double weyl_norm_defect = 0.0;
    double weyl_top_fraction = 0.0;

    // The step from this scale to the next one (NaN on the last row).
    double step_norm = std::numeric_limits<double>::quiet_NaN();
    double energy_shift = std::numeric_limits<double>::quiet_NaN();
    double grad_shift = std::numeric_limits<double>::quiet_NaN();
    double neumann_delta = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> neumann_terms;
    int projection_nodes = 0;
    double idempotence_defect = std::numeric_limits<double>::quiet_NaN();

    double phi_norm() const { return phi.norm(); }
    double phi_hat_norm() const { return phi_hat.norm(); }
};

struct CascadeState {
    ModelParams params;
    std::vector<ScaleRecord> scales;
    std::shared_ptr<const SectorLadder> sectors;

    const ScaleRecord& at(int j) const { return scales.at(static_cast<std::size_t>(j)); }
    int last() const noexcept { return static_cast<int>(scales.size()) - 1; }
};

struct CascadeOptions {
    LanczosOptions lanczos;
    ProjectionOptions projection;
    NeumannOptions neumann;
    WeylOptions weyl;
    int contour_nodes = 64;
    bool neumann_check = true;
    bool gap_next = true;
    bool check_K_energy = true;
    /// Run even when validate_params reports a violated relation.
    bool override_constraints = false;
    /// Stop after this scale (defaults to J).
    std::optional<int> last_scale;
};

/// P - <beta^{sigma_j}>_psi for a normalized ground vector of H^{sigma_j}.
inline Vec3 feynman_hellmann_gradient(const FiberFamily& family, const Vec3& P, const RealVector& psi) {
    Vec3 g;
    for (int i = 0; i < 3; ++i) g[i] = P[i] - family.beta()[static_cast<std::size_t>(i)].expectation(psi);
    return g;
}

namespace detail {

inline double gap_of(const FockOperator& H, const LanczosOptions& opts) {
    if (H.dim() == 1) return std::numeric_limits<double>::infinity();
    return ground_state(H, opts).gap;
}

inline void check_degenerate(const GroundStateRecord& rec, int j) {
    if (rec.degenerate) throw CascadeError(j, fmt::format("degenerate ground state (gap {:.3e})", rec.gap));
}

}  // namespace detail

/// Scale-by-scale construction of E, gradE and the dressed vectors.
inline CascadeState run_cascade(const ModelParams& params, const ModeGrid& grid, const BasisPtr& basis,
                                const CascadeOptions& opts = {}) {
    const ConstraintReport report = validate_params(params);
    for (const auto& c : report.checks)
        if (!c.passed && (c.domain || !opts.override_constraints))
            throw ParameterError(fmt::format("cascade refused: constraint '{}' violated ({})", c.name, c.detail));
    if (grid.cutoffs().scales() != params.J) throw MismatchError("cascade: grid and parameters disagree on J");

    CascadeState state;
    state.params = params;
    auto sectors = std::make_shared<const SectorLadder>(grid, *basis);
    state.sectors = sectors;
    const int last = std::min(params.J, opts.last_scale.value_or(params.J));
    const Vec3& P = params.P;

    auto solve_scale = [&](int j, ScaleRecord& rec) {
        const FiberFamily family(params, grid, (*sectors)[j], j);
        const FockOperator H = family.at(P);
        const GroundStateRecord gs = ground_state(H, opts.lanczos);
        detail::check_degenerate(gs, j);
        rec.j = j;
        rec.sigma = params.sigma(j);
        rec.dim = (*sectors)[j]->size();
        rec.E = gs.energy;
        rec.psi = gs.vector;
        rec.psi_residual = gs.residual;
        rec.gap_Fsigma = gs.gap;
        rec.gradE = feynman_hellmann_gradient(family, P, gs.vector);
        if (!(rec.gradE.norm() < 1.0)) throw CascadeError(j, "|gradE| reached 1");
        if (opts.gap_next && j < sectors->top()) {
            const FiberFamily wide(params, grid, (*sectors)[j + 1], j);
            rec.gap_Fnext = detail::gap_of(wide.at(P), opts.lanczos);
        }
    };

    auto set_gamma = [&](int j, ScaleRecord& rec) {
        const PiOperators pi = pi_operator(params, grid, (*sectors)[j], j, rec.gradE);
        const GammaOperators gamma = gamma_operator(pi, rec.phi);
        rec.gamma_shift = gamma.shift;
        rec.gamma_orth = gamma_orthogonality(gamma, rec.phi);
        if (opts.check_K_energy) {
            const CanonicalK K = assemble_K_canonical(params, grid, (*sectors)[j], j, rec.gradE, rec.gamma_shift);
            rec.K_energy_delta = ground_state(K.K, opts.lanczos).energy - rec.E;
        }
    };

    ScaleRecord first;
    solve_scale(0, first);
    first.phi = vacuum(*(*sectors)[0]);
    first.phi_hat = first.phi;
    set_gamma(0, first);
    state.scales.push_back(std::move(first));

    for (int j = 0; j < last; ++j) {
        ScaleRecord& prev = state.scales.back();
        const BasisPtr& sector = (*sectors)[j + 1];
        try {
            const IntermediateK kh = assemble_K_hat(params, grid, sector, j + 1, prev.gradE, prev.gamma_shift);
            const FockOperator target = FockOperator(sector, (kh.K_prev + kh.delta).matrix(), true);
            const Contour contour{prev.E, params.mu * params.sigma(j + 1), opts.contour_nodes};
            const RealVector start = sectors->lift(prev.phi, j, j + 1);

            const ProjectionResult proj = contour_project(target, contour, start, opts.projection);
            prev.projection_nodes = proj.nodes_used;
            prev.idempotence_defect = proj.idempotence_defect;
            prev.step_norm = (proj.vector - start).norm();
            if (opts.neumann_check) {
                const NeumannResult series = neumann_project(kh.K_prev, kh.delta, contour, start, opts.neumann);
                prev.neumann_delta = (series.vector - proj.vector).norm();
                prev.neumann_terms = series.term_norms;
            }

            ScaleRecord next;
            solve_scale(j + 1, next);
            next.phi_hat = proj.vector;
            const DisplacementField dg =
                displacement_coeffs(next.gradE, grid, interacting_shells(j + 1), params.alpha, sector->mode_count()) -
                displacement_coeffs(prev.gradE, grid, interacting_shells(j + 1), params.alpha, sector->mode_count());
            const WeylResult w = weyl_apply(sector, dg, proj.vector, WeylDirection::Forward, opts.weyl);
            next.phi = w.vector;
            next.weyl_norm_defect = w.norm_defect;
            next.weyl_top_fraction = w.top_sector_fraction;
            set_gamma(j + 1, next);

            prev.energy_shift = prev.E - next.E;
            prev.grad_shift = (next.gradE - prev.gradE).norm();
            state.scales.push_back(std::move(next));
        } catch (const CascadeError&) {
            throw;
        } catch (const Error& e) {
            throw CascadeError(j + 1, e.what());
        }
    }
    return state;
}

// ------------------------------------------------------------ convergence fits

struct LogLinearFit {
    /// y_j ~ prefactor * exp(-exponent * j); infinite exponent when all y vanish.
    double exponent = std::numeric_limits<double>::infinity();
    double prefactor = 0.0;
    int points = 0;
    bool skipped = true;
};

inline LogLinearFit fit_log_linear(const std::vector<double>& y, double floor = 1e-300) {
    LogLinearFit fit;
    std::vector<double> xs, ls;
    for (std::size_t j = 0; j < y.size(); ++j)
        if (std::isfinite(y[j]) && std::abs(y[j]) > floor) {
            xs.push_back(static_cast<double>(j));
            ls.push_back(std::log(std::abs(y[j])));
        }
    fit.points = static_cast<int>(xs.size());
    if (xs.size() < 2) return fit;
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ls[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ls[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.exponent = -slope;
    fit.prefactor = std::exp((sy - slope * sx) / n);
    fit.skipped = false;
    return fit;
}

struct ConvergenceReport {
    LogLinearFit step_norm;
    LogLinearFit energy_shift;
    LogLinearFit grad_shift;
    double delta = 0.2;
    /// (1 - delta) ln(1/epsilon): decay rate of alpha^{1/4} eps^{j(1-delta)}.
    double required_exponent = 0.0;
    bool step_exponent_ok = false;
    /// step_norm_j / (alpha^{1/4} eps^{j(1-delta)}) per step.
    std::vector<double> step_bound_ratio;
    /// |energy_shift_j| / (alpha eps^j) per step and its running maximum.
    std::vector<double> energy_constant;
    std::vector<double> energy_constant_running;
    /// Consecutive ratios energy_shift_{j+1}/energy_shift_j.
    std::vector<double> energy_ratio;

    void print(std::ostream& out) const {
        auto line = [&](const char* name, const LogLinearFit& f) {
            if (f.skipped)
                out << fmt::format("{:<13} fit skipped (all shifts vanish), exponent = inf\n", name);
            else
                out << fmt::format("{:<13} exponent={:.6g} prefactor={:.6g} points={}\n", name, f.exponent,
                                   f.prefactor, f.points);
        };
        line("step_norm", step_norm);
        line("energy_shift", energy_shift);
        line("grad_shift", grad_shift);
        out << fmt::format("required step exponent (delta={}) = {:.6g}: {}\n", delta, required_exponent,
                           step_exponent_ok ? "PASS" : "FAIL");
        for (std::size_t j = 0; j < energy_constant.size(); ++j)
            out << fmt::format("  j={} step/bound={:.4g} |dE|/(alpha eps^j)={:.4g} running C={:.4g}\n", j,
                               j < step_bound_ratio.size() ? step_bound_ratio[j] : NAN, energy_constant[j],
                               energy_constant_running[j]);
    }
};

inline ConvergenceReport convergence_report(const CascadeState& state, double delta = 0.2) {
    if (state.scales.size() < 3) throw DomainError("convergence report: need at least 3 completed scales");
    const ModelParams& p = state.params;
    std::vector<double> steps, shifts, grads;
    for (const auto& rec : state.scales) {
        if (!std::isfinite(rec.step_norm)) continue;
        steps.push_back(rec.step_norm);
        shifts.push_back(rec.energy_shift);
        grads.push_back(rec.grad_shift);
    }
    ConvergenceReport r;
    r.delta = delta;
    const double floor = 1e-15;
    r.step_norm = fit_log_linear(steps, floor);
    r.energy_shift = fit_log_linear(shifts, floor);
    r.grad_shift = fit_log_linear(grads, floor);
    r.required_exponent = (1.0 - delta) * std::log(1.0 / p.epsilon);
    r.step_exponent_ok = r.step_norm.exponent >= r.required_exponent;
    double running = 0.0;
    for (std::size_t j = 0; j < steps.size(); ++j) {
        const double ej = std::pow(p.epsilon, static_cast<double>(j));
        const double bound = std::pow(p.alpha, 0.25) * std::pow(ej, 1.0 - delta);
        r.step_bound_ratio.push_back(bound > 0.0 ? steps[j] / bound : 0.0);
        const double c = p.alpha > 0.0 ? std::abs(shifts[j]) / (p.alpha * ej) : 0.0;
        running = std::max(running, c);
        r.energy_constant.push_back(c);
        r.energy_constant_running.push_back(running);
        if (j > 0) r.energy_ratio.push_back(shifts[j - 1] != 0.0 ? shifts[j] / shifts[j - 1] : 0.0);
    }
    return r;
}

// --------------------------------------------------------------------- output

inline std::string format_double(double x) { return fmt::format("{:.17g}", x); }

inline void write_trace_csv(std::ostream& out, const CascadeState& state, const std::string& config_hash) {
    out << "j,sigma,dim,E,gradE_x,gradE_y,gradE_z,psi_norm,phi_norm,phi_hat_norm,gap_Fsigma,gap_Fnext,"
           "step_norm,energy_shift,grad_shift,gamma_orth,gamma_shift_x,gamma_shift_y,gamma_shift_z,"
           "neumann_delta,K_energy_delta,weyl_norm_defect,weyl_top_fraction,projection_nodes\n";
    for (const auto& r : state.scales) {
        const std::vector<double> cols{r.sigma,          r.E,           r.gradE[0],         r.gradE[1],
                                       r.gradE[2],       r.psi.norm(),  r.phi_norm(),       r.phi_hat_norm(),
                                       r.gap_Fsigma,     r.gap_Fnext,   r.step_norm,        r.energy_shift,
                                       r.grad_shift,     r.gamma_orth,  r.gamma_shift[0],   r.gamma_shift[1],
                                       r.gamma_shift[2], r.neumann_delta, r.K_energy_delta, r.weyl_norm_defect,
                                       r.weyl_top_fraction};
        out << r.j << ',' << format_double(cols[0]) << ',' << r.dim;
        for (std::size_t c = 1; c < cols.size(); ++c) out << ',' << format_double(cols[c]);
        out << ',' << r.projection_nodes << '\n';
    }
    out << "# config_hash=" << config_hash << '\n';
    out << "# artifact_version=" << kArtifactVersion << '\n';
    out << "# rows=" << state.scales.size() << '\n';
}

/// Binary vector dump: "FQED", u32 version, u64 dimension, f64 entries,
/// all little-endian.
inline void write_vector_sidecar(std::ostream& out, const RealVector& v) {
    static_assert(std::endian::native == std::endian::little, "sidecar writer assumes a little-endian host");
    const std::uint32_t version = 1;
    const std::uint64_t dim = static_cast<std::uint64_t>(v.size());
    out.write("FQED", 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

inline RealVector read_vector_sidecar(std::istream& in) {
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t dim = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    if (!in || std::string(magic, 4) != "FQED" || version != 1) throw ParseError("sidecar: bad header");
    RealVector v(static_cast<Eigen::Index>(dim));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * dim));
    if (!in) throw ParseError("sidecar: truncated payload");
    return v;
}

}  // namespace fqed
