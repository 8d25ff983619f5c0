#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fbmps/errors.hpp"

namespace fbmps {

/// All physical and numerical knobs of one simulation.
///
/// Units: hbar = 1; decay_gamma is the Lindblad rate of the boundary site
/// (no-feedback population decays as exp(-gamma t)); feedback_phase is the
/// roundtrip phase in radians, treated as a knob independent of delay_tau.
struct SimulationConfig {
    int n_sites = 4;
    double coupling_j = 0.1;
    double decay_gamma = 0.24;
    double delay_tau = 0.0;
    double feedback_phase = 0.0;
    double dt = 0.05;
    long n_steps = 0;
    int bin_dim = 2;
    double svd_cutoff = 1e-10;
    long max_bond = 64;
    bool feedback_enabled = false;
};

/// tau/dt as an exact integer; throws if the ratio is not integral.
inline long delay_steps(const SimulationConfig& cfg) {
    if (cfg.dt <= 0.0) throw config_error("dt must be > 0");
    const double ratio = cfg.delay_tau / cfg.dt;
    const long l = static_cast<long>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(l)) > 1e-9 * std::max(1.0, std::abs(ratio)))
        throw config_error("delay_tau must be an integer multiple of dt (tau/dt = " +
                           std::to_string(ratio) + ")");
    return l;
}

/// Validates a config; returns human-readable warnings (non-fatal findings).
inline std::vector<std::string> validate(const SimulationConfig& cfg) {
    std::vector<std::string> warnings;
    if (cfg.n_sites < 1) throw config_error("n_sites must be >= 1");
    if (cfg.decay_gamma < 0.0) throw config_error("decay_gamma must be >= 0");
    if (cfg.delay_tau < 0.0) throw config_error("delay_tau must be >= 0");
    if (cfg.dt <= 0.0) throw config_error("dt must be > 0");
    if (cfg.bin_dim < 2) throw config_error("bin_dim must be >= 2");
    if (cfg.svd_cutoff < 0.0) throw config_error("svd_cutoff must be >= 0");
    if (cfg.max_bond < 1) throw config_error("max_bond must be >= 1");
    const double gdt = cfg.decay_gamma * cfg.dt;
    if (gdt > 0.5)
        throw config_error("decay_gamma*dt = " + std::to_string(gdt) +
                           " exceeds 0.5; the per-step expansion is uncontrolled");
    if (gdt > 0.1)
        warnings.push_back("decay_gamma*dt = " + std::to_string(gdt) +
                           " exceeds 0.1; expect visible discretization error");
    const long l = delay_steps(cfg);
    if (cfg.feedback_enabled && l < 1)
        throw config_error("feedback requires delay_tau >= dt (the kernel assumes a roundtrip)");
    return warnings;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("expected a boolean, got '" + v + "'", line);
}

template <typename T>
T parse_number(const std::string& v, int line) {
    std::istringstream ss(v);
    T out;
    ss >> out;
    if (ss.fail() || !(ss >> std::ws).eof())
        throw config_error("expected a number, got '" + v + "'", line);
    return out;
}

} // namespace detail

/// Parses the flat `key = value` config document. Keys are exactly the
/// SimulationConfig field names; unknown keys are rejected with their line.
inline SimulationConfig parse_config(std::istream& in) {
    SimulationConfig cfg;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        const auto hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw config_error("expected 'key = value': '" + raw + "'", line);
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string val = detail::trim(s.substr(eq + 1));
        if (val.empty()) throw config_error("missing value for key '" + key + "'", line);

        if (key == "n_sites") cfg.n_sites = detail::parse_number<int>(val, line);
        else if (key == "coupling_j") cfg.coupling_j = detail::parse_number<double>(val, line);
        else if (key == "decay_gamma") cfg.decay_gamma = detail::parse_number<double>(val, line);
        else if (key == "delay_tau") cfg.delay_tau = detail::parse_number<double>(val, line);
        else if (key == "feedback_phase") cfg.feedback_phase = detail::parse_number<double>(val, line);
        else if (key == "dt") cfg.dt = detail::parse_number<double>(val, line);
        else if (key == "n_steps") cfg.n_steps = detail::parse_number<long>(val, line);
        else if (key == "bin_dim") cfg.bin_dim = detail::parse_number<int>(val, line);
        else if (key == "svd_cutoff") cfg.svd_cutoff = detail::parse_number<double>(val, line);
        else if (key == "max_bond") cfg.max_bond = detail::parse_number<long>(val, line);
        else if (key == "feedback_enabled") cfg.feedback_enabled = detail::parse_bool(val, line);
        else throw config_error("unknown key '" + key + "'", line);
    }
    return cfg;
}

inline SimulationConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file '" + path + "'");
    return parse_config(f);
}

} // namespace fbmps
