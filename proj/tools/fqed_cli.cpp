// Command-line driver: validate, cascade, mass-scan, verify, grid-dump.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fqed/config.hpp"

namespace fs = std::filesystem;
using namespace fqed;

namespace {

enum Exit : int { kOk = 0, kAssertion = 1, kUsage = 2, kNumerical = 3 };

struct Options {
    std::string config;
    std::string out;
    unsigned threads = 1;
    bool strict = false;
    std::string suite = "identities";
};

fs::path output_dir(const Options& opts, const RunConfig& cfg) {
    fs::path dir = opts.out.empty() ? fs::path(cfg.out_dir) : fs::path(opts.out);
    fs::create_directories(dir);
    return dir;
}

/// Writes text in one go so a failing command leaves no half-written file.
void write_file(const fs::path& path, const std::string& text, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

int cmd_validate(const RunConfig& cfg) {
    const ConstraintReport report = validate_params(cfg.params);
    report.print(std::cout);
    if (const ConstraintCheck* bad = report.first_failure()) {
        std::cout << fmt::format("first failing constraint: {}\n", bad->name);
        return kAssertion;
    }
    std::cout << "all constraints hold\n";
    return kOk;
}

int cmd_cascade(const RunConfig& cfg, const Options& opts) {
    const ModeGrid grid = cfg.grid();
    const BasisPtr basis = cfg.basis(grid);
    const CascadeState state = run_cascade(cfg.params, grid, basis, cfg.cascade_options());
    const fs::path dir = output_dir(opts, cfg);

    std::ostringstream csv;
    write_trace_csv(csv, state, cfg.hash);
    write_file(dir / "cascade_trace.csv", csv.str());

    std::ostringstream report;
    if (state.scales.size() >= 3)
        convergence_report(state, cfg.delta).print(report);
    else
        report << "convergence report skipped: fewer than 3 scales\n";
    write_file(dir / "convergence_report.txt", report.str());
    std::cout << report.str();

    if (cfg.dump_vectors)
        for (const auto& rec : state.scales) {
            std::ostringstream bin(std::ios::binary);
            write_vector_sidecar(bin, rec.phi);
            write_file(dir / fmt::format("phi_{}.bin", rec.j), bin.str(), std::ios::binary);
        }
    std::cout << fmt::format("wrote {} rows to {}\n", state.scales.size(), (dir / "cascade_trace.csv").string());
    return kOk;
}

std::string gnuplot_script(int J) {
    return fmt::format(R"(# m_r against alpha at the last scale, and d2E against the scale index
set datafile separator ','
set datafile commentschars '#'
set key autotitle columnhead
set terminal pngcairo size 900,600
set output 'mass_vs_alpha.png'
set logscale x
set xlabel 'alpha'
set ylabel 'm_r'
plot 'mass_scan.csv' using (column(2) == {0} ? column(1) : 1/0):(column(17)) with linespoints title 'm_r (j={0})'
unset logscale x
set output 'd2E_vs_j.png'
set xlabel 'j'
set ylabel 'd2E'
plot 'mass_scan.csv' using 2:15 with linespoints title 'H contour', \
     'mass_scan.csv' using 2:16 with points title 'K contour', \
     'mass_scan.csv' using 2:14 with points title 'finite difference'
)",
                       J);
}

int cmd_mass_scan(const RunConfig& cfg, const Options& opts) {
    if (cfg.alphas.empty() || cfg.momenta.empty()) {
        std::cerr << "usage error: mass-scan needs non-empty 'alphas' and 'P_list'\n";
        return kUsage;
    }
    const ModeGrid grid = cfg.grid();
    const BasisPtr basis = cfg.basis(grid);
    const MassScanResult scan = mass_scan(cfg.alphas, cfg.momenta, cfg.params, grid, basis, cfg.scan_options());
    const fs::path dir = output_dir(opts, cfg);
    std::ostringstream csv;
    write_mass_scan_csv(csv, scan, cfg.hash);
    write_file(dir / "mass_scan.csv", csv.str());
    write_file(dir / "mass_scan.gp", gnuplot_script(cfg.params.J));
    int failed = 0;
    for (const auto& row : scan.rows)
        if (!row.error.empty()) {
            ++failed;
            std::cerr << fmt::format("alpha={} j={}: {}\n", row.alpha, row.j, row.error);
        }
    for (const auto& f : scan.families)
        std::cout << fmt::format("alpha={:<8g} P=({:g},{:g},{:g})  d2E(last)={:.12g}  m_r={:.12g}  tail={:.3e}\n",
                                 f.alpha, f.P[0], f.P[1], f.P[2], f.limit_estimate, 1.0 / f.limit_estimate,
                                 f.tail_estimate);
    std::cout << fmt::format("wrote {} rows ({} with errors) to {}\n", scan.rows.size(), failed,
                             (dir / "mass_scan.csv").string());
    return kOk;
}

// ------------------------------------------------------------------ verify

struct Verdicts {
    bool strict = false;
    int hard_failures = 0;
    int soft_failures = 0;

    void hard(bool ok, const std::string& what) {
        std::cout << fmt::format("{} {}\n", ok ? "PASS" : "FAIL", what);
        if (!ok) ++hard_failures;
    }
    void soft(bool ok, const std::string& what) {
        std::cout << fmt::format("{} {}\n", ok ? "PASS" : (strict ? "FAIL" : "WARN"), what);
        if (!ok) ++soft_failures;
    }
    int exit_code() const { return hard_failures > 0 || (strict && soft_failures > 0) ? kAssertion : kOk; }
};

struct VerifyContext {
    const RunConfig& cfg;
    const ModeGrid& grid;
    const CascadeState& state;
    Verdicts& v;
};

void suite_identities(VerifyContext& c) {
    const ModelParams& p = c.state.params;
    for (const auto& rec : c.state.scales)
        c.v.hard(rec.gamma_orth <= 1e-10, fmt::format("j={} Gamma orthogonality {:.3e} <= 1e-10", rec.j, rec.gamma_orth));
    if ((p.P.array() != 0.0).count() > 1) {
        std::cout << "note: P is off-axis; second-derivative routes skipped\n";
        return;
    }
    const std::vector<MassScanRow> rows = mass_scan_rows(c.state, c.grid, c.cfg.scan_options());
    for (const auto& row : rows) {
        if (!row.error.empty()) {
            c.v.hard(false, fmt::format("j={} second-derivative routes: {}", row.j, row.error));
            continue;
        }
        c.v.hard(row.delta_HK <= 1e-5, fmt::format("j={} |d2E_H - d2E_K| = {:.3e} <= 1e-5", row.j, row.delta_HK));
        c.v.hard(row.delta_HF <= 1e-4, fmt::format("j={} |d2E_H - d2E_FD| = {:.3e} <= 1e-4", row.j, row.delta_HF));
        const KContourResult k = d2E_K_at_scale(c.state, c.grid, row.j, final_contour(p, row.j, row.E));
        c.v.hard(std::abs(k.reduced - k.value) <= 1e-6,
                 fmt::format("j={} single vs double resolvent form {:.3e} <= 1e-6", row.j, std::abs(k.reduced - k.value)));
        c.v.hard(std::abs(k.cross_term) <= 1e-8,
                 fmt::format("j={} mixed contour term {:.3e} <= 1e-8", row.j, std::abs(k.cross_term)));
    }
}

void suite_neumann(VerifyContext& c) {
    for (const auto& rec : c.state.scales) {
        if (!std::isfinite(rec.neumann_delta)) continue;
        c.v.hard(rec.neumann_delta <= 1e-6,
                 fmt::format("j={} Neumann vs direct projection {:.3e} <= 1e-6", rec.j, rec.neumann_delta));
    }
}

void suite_gaps(VerifyContext& c) {
    const ModelParams& p = c.state.params;
    for (const auto& rec : c.state.scales) {
        c.v.soft(rec.gap_Fsigma >= p.rho_minus * rec.sigma,
                 fmt::format("j={} gap {:.6g} >= rho- sigma_j = {:.6g}", rec.j, rec.gap_Fsigma, p.rho_minus * rec.sigma));
        if (std::isfinite(rec.gap_Fnext))
            c.v.soft(rec.gap_Fnext >= p.rho_plus * p.sigma(rec.j + 1),
                     fmt::format("j={} next-sector gap {:.6g} >= rho+ sigma_j+1 = {:.6g}", rec.j, rec.gap_Fnext,
                                 p.rho_plus * p.sigma(rec.j + 1)));
    }
}

void suite_convergence(VerifyContext& c) {
    if (c.state.scales.size() < 3) {
        c.v.soft(false, "convergence: fewer than 3 scales");
        return;
    }
    const ConvergenceReport r = convergence_report(c.state, c.cfg.delta);
    r.print(std::cout);
    c.v.soft(r.step_exponent_ok, fmt::format("step-norm exponent {:.4g} >= {:.4g}", r.step_norm.exponent,
                                            r.required_exponent));
    if (!r.energy_constant_running.empty() && r.energy_constant_running.front() > 0.0) {
        const double growth = r.energy_constant_running.back() / r.energy_constant_running.front();
        c.v.soft(growth <= 3.0, fmt::format("energy-shift constant growth {:.4g} <= 3", growth));
    }
}

void suite_soft_photon(VerifyContext& c) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& rec : c.state.scales) {
        if (rec.j == 0) continue;
        const SoftPhotonTable t =
            soft_photon_probe(rec.psi, c.state.params, c.grid, (*c.state.sectors)[rec.j], rec.j);
        std::cout << fmt::format("  j={} soft-photon constant {:.6g}\n", rec.j, t.constant);
        lo = std::min(lo, t.constant);
        hi = std::max(hi, t.constant);
    }
    if (hi > 0.0) c.v.soft(hi <= 2.0 * lo, fmt::format("soft-photon constant spread {:.4g} <= 2", hi / lo));
}

void suite_pull_through(VerifyContext& c) {
    const ScaleRecord& rec = c.state.at(c.state.last());
    if (rec.j == 0) return;
    const double r = pull_through_max(rec.psi, rec.E, c.state.params, c.grid, (*c.state.sectors)[rec.j], rec.j);
    c.v.soft(r <= 0.05, fmt::format("j={} pull-through residual {:.4g} <= 0.05", rec.j, r));
}

void suite_bounds(VerifyContext& c) {
    BoundsOptions bo;
    bo.delta = c.cfg.delta;
    bo.dense_limit = c.cfg.dense_limit;
    const BoundsReport r = bounds_probe_B(c.state, c.grid, bo);
    r.print(std::cout);
    const bool any = r.C3 > 0.0;
    c.v.soft(!any || (r.C3 >= 1.0 && r.C4 >= 1.0 && r.C5 >= 1.0), "absolute-value constants are at least 1");
}

void suite_c_alpha(VerifyContext& c) {
    const int j = c.state.last();
    const std::vector<Vec3> momenta{{0.1, 0, 0}, {0.2, 0, 0}, {0.3, 0, 0}, {0.33, 0, 0}};
    const CAlphaResult r = c_alpha_sup(c.state.params, c.grid, (*c.state.sectors)[j], j, momenta);
    const double free = c_alpha_free(c.grid, momenta);
    std::cout << fmt::format("  empirical C_alpha {:.6g} (decoupled value {:.6g})\n", r.value, free);
    c.v.soft(free <= 1.0 / 3.0 + 1e-10, "decoupled value <= 1/3");
    c.v.soft(r.value < 1.0 - c.state.params.rho_plus, "empirical C_alpha below 1 - rho+");
}

const std::map<std::string, std::function<void(VerifyContext&)>>& suites() {
    static const std::map<std::string, std::function<void(VerifyContext&)>> table{
        {"identities", suite_identities}, {"neumann", suite_neumann},         {"gaps", suite_gaps},
        {"convergence", suite_convergence}, {"soft-photon", suite_soft_photon}, {"pull-through", suite_pull_through},
        {"bounds", suite_bounds},         {"c-alpha", suite_c_alpha},
    };
    return table;
}

std::string suite_names() {
    std::string names = "all";
    for (const auto& [name, _] : suites()) names += ", " + name;
    return names;
}

int cmd_verify(const RunConfig& cfg, const Options& opts) {
    if (opts.suite != "all" && !suites().count(opts.suite)) {
        std::cerr << fmt::format("usage error: unknown suite '{}'; available: {}\n", opts.suite, suite_names());
        return kUsage;
    }
    const ModeGrid grid = cfg.grid();
    const BasisPtr basis = cfg.basis(grid);
    const CascadeState state = run_cascade(cfg.params, grid, basis, cfg.cascade_options());
    Verdicts v;
    v.strict = opts.strict;
    VerifyContext ctx{cfg, grid, state, v};
    for (const auto& [name, run] : suites()) {
        if (opts.suite != "all" && opts.suite != name) continue;
        std::cout << fmt::format("== suite {}\n", name);
        run(ctx);
    }
    std::cout << fmt::format("summary: {} hard failures, {} soft failures{}\n", v.hard_failures, v.soft_failures,
                             opts.strict ? " (strict)" : "");
    return v.exit_code();
}

int cmd_grid_dump(const RunConfig& cfg, const Options& opts) {
    const ModeGrid grid = cfg.grid();
    if (opts.out.empty()) {
        grid.write_csv(std::cout);
        return kOk;
    }
    fs::create_directories(opts.out);
    std::ostringstream csv;
    grid.write_csv(csv);
    write_file(fs::path(opts.out) / "grid.csv", csv.str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fiber QED cutoff-cascade laboratory"};
    app.require_subcommand(1);
    Options opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out, "output directory (overrides out_dir)");
        sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
    };
    CLI::App* validate = app.add_subcommand("validate", "check the parameter constraints");
    CLI::App* cascade = app.add_subcommand("cascade", "run the cutoff cascade and write the trace");
    CLI::App* scan = app.add_subcommand("mass-scan", "second derivatives and masses over alpha and P");
    CLI::App* verify = app.add_subcommand("verify", "run probe suites on a fresh cascade");
    CLI::App* dump = app.add_subcommand("grid-dump", "write the photon mode grid as CSV");
    for (CLI::App* sub : {validate, cascade, scan, verify, dump}) add_common(sub);
    verify->add_option("--suite", opts.suite, "suite name: " + suite_names());
    verify->add_flag("--strict", opts.strict, "fail on soft probes too");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        set_worker_count(opts.threads);
        const RunConfig cfg = load_config(opts.config);
        if (validate->parsed()) return cmd_validate(cfg);
        if (cascade->parsed()) return cmd_cascade(cfg, opts);
        if (scan->parsed()) return cmd_mass_scan(cfg, opts);
        if (verify->parsed()) return cmd_verify(cfg, opts);
        if (dump->parsed()) return cmd_grid_dump(cfg, opts);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ParameterError& e) {
        std::cerr << "constraint failure: " << e.what() << '\n';
        return kAssertion;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}
