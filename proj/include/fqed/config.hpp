#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fqed/observables.hpp"

namespace fqed {

/// Everything a command needs: model, discretization, solver controls and
/// scan lists, parsed from flat `key = value` text.
struct RunConfig {
    ModelParams params;
    int n_radial = 1;
    AngularSet angular_set = AngularSet::Octahedral6;
    int n_max = 2;
    int c_max = 2;
    std::size_t dense_limit = kDefaultDenseLimit;
    std::size_t basis_limit = kDefaultBasisLimit;
    double tol = 1e-10;
    int max_iter = 4000;
    int contour_nodes = 64;
    bool override_constraints = false;
    bool neumann_check = true;
    bool dump_vectors = false;
    double delta = 0.2;
    double gradient_step = 1e-3;
    double curvature_step = 5e-3;
    std::vector<double> alphas;
    std::vector<Vec3> momenta;
    std::string out_dir = "fqed_out";
    std::string hash;

    ModeGrid grid() const { return build_grid(params.cutoffs(), n_radial, angular_set); }
    BasisPtr basis(const ModeGrid& g) const { return enumerate_basis(g.size(), n_max, c_max, basis_limit); }

    CascadeOptions cascade_options() const {
        CascadeOptions o;
        o.lanczos.tol = tol;
        o.lanczos.max_iter = max_iter;
        o.contour_nodes = contour_nodes;
        o.override_constraints = override_constraints;
        o.neumann_check = neumann_check;
        o.neumann.resolvent.dense_limit = dense_limit;
        o.projection.resolvent.dense_limit = dense_limit;
        return o;
    }
    MassScanOptions scan_options() const {
        MassScanOptions o;
        o.cascade = cascade_options();
        o.cascade.neumann_check = false;
        o.resolvent.dense_limit = dense_limit;
        o.gradient_step = gradient_step;
        o.curvature_step = curvature_step;
        return o;
    }
};

/// 64-bit FNV-1a digest, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

class ValueReader {
public:
    ValueReader(std::string key, std::string value, int line) : key_(std::move(key)), value_(std::move(value)), line_(line) {}

    double number(const std::string& text) const {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            fail(fmt::format("'{}' is not a number", text));
        }
        if (used != text.size()) fail(fmt::format("'{}' is not a number", text));
        return v;
    }
    double real() const { return number(value_); }
    int integer() const {
        const double v = real();
        if (v != static_cast<int>(v)) fail("expected an integer");
        return static_cast<int>(v);
    }
    bool boolean() const {
        if (value_ == "true" || value_ == "1" || value_ == "yes") return true;
        if (value_ == "false" || value_ == "0" || value_ == "no") return false;
        fail("expected true or false");
    }
    Vec3 vector(const std::string& text) const {
        const auto parts = split(text, ',');
        if (parts.size() != 3) fail(fmt::format("'{}' is not a 3-vector", text));
        return {number(parts[0]), number(parts[1]), number(parts[2])};
    }
    Vec3 vector() const { return vector(value_); }
    std::vector<double> reals() const {
        std::vector<double> out;
        if (value_.empty()) return out;
        for (const auto& p : split(value_, ',')) out.push_back(number(p));
        return out;
    }
    std::vector<Vec3> vectors() const {
        std::vector<Vec3> out;
        if (value_.empty()) return out;
        for (const auto& p : split(value_, ';'))
            if (!p.empty()) out.push_back(vector(p));
        return out;
    }
    const std::string& text() const { return value_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(fmt::format("line {}: key '{}': {}", line_, key_, what));
    }

private:
    std::string key_;
    std::string value_;
    int line_;
};

}  // namespace detail

/// Parses configuration text.  `source` names the input in diagnostics.
inline RunConfig parse_config(std::istream& in, const std::string& source = "config") {
    static const std::set<std::string> required{"alpha", "epsilon", "J", "P"};
    RunConfig cfg;
    std::map<std::string, std::string> seen;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(fmt::format("{}: line {}: expected 'key = value'", source, line_no));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(fmt::format("{}: line {}: empty key", source, line_no));
        if (seen.count(key)) throw ParseError(fmt::format("{}: line {}: duplicate key '{}'", source, line_no, key));
        seen[key] = value;
        const detail::ValueReader r(key, value, line_no);
        ModelParams& p = cfg.params;
        if (key == "Lambda") p.Lambda = r.real();
        else if (key == "alpha") p.alpha = r.real();
        else if (key == "epsilon") p.epsilon = r.real();
        else if (key == "mu") p.mu = r.real();
        else if (key == "rho_minus") p.rho_minus = r.real();
        else if (key == "rho_plus") p.rho_plus = r.real();
        else if (key == "C_alpha_assumed") p.C_alpha_assumed = r.real();
        else if (key == "P") p.P = r.vector();
        else if (key == "J") p.J = r.integer();
        else if (key == "ir_floor_C") p.ir_floor_C = r.real();
        else if (key == "n_radial") cfg.n_radial = r.integer();
        else if (key == "angular_set") {
            try {
                cfg.angular_set = parse_angular_set(value);
            } catch (const Error& e) {
                r.fail(e.what());
            }
        } else if (key == "n_max") cfg.n_max = r.integer();
        else if (key == "c_max") cfg.c_max = r.integer();
        else if (key == "dense_limit") cfg.dense_limit = static_cast<std::size_t>(r.integer());
        else if (key == "basis_limit") cfg.basis_limit = static_cast<std::size_t>(r.integer());
        else if (key == "tol") cfg.tol = r.real();
        else if (key == "max_iter") cfg.max_iter = r.integer();
        else if (key == "contour_nodes") cfg.contour_nodes = r.integer();
        else if (key == "override_constraints") cfg.override_constraints = r.boolean();
        else if (key == "neumann_check") cfg.neumann_check = r.boolean();
        else if (key == "dump_vectors") cfg.dump_vectors = r.boolean();
        else if (key == "delta") cfg.delta = r.real();
        else if (key == "fd_gradient_step") cfg.gradient_step = r.real();
        else if (key == "fd_curvature_step") cfg.curvature_step = r.real();
        else if (key == "alphas") cfg.alphas = r.reals();
        else if (key == "P_list") cfg.momenta = r.vectors();
        else if (key == "out_dir") cfg.out_dir = value;
        else throw ParseError(fmt::format("{}: line {}: unknown key '{}'", source, line_no, key));
    }
    for (const auto& key : required)
        if (!seen.count(key)) throw ParseError(fmt::format("{}: missing required key '{}'", source, key));
    if (cfg.c_max < 1 || cfg.n_max < 0 || cfg.n_radial < 1 || cfg.params.J < 1)
        throw ParseError(fmt::format("{}: n_radial, J and c_max must be at least 1; n_max at least 0", source));

    std::string canonical;
    for (const auto& [k, v] : seen) canonical += k + "=" + v + "\n";
    cfg.hash = fnv1a_hex(canonical);
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("cannot open config '{}'", path.string()));
    return parse_config(in, path.string());
}

}  // namespace fqed
