#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "fbmps/observables.hpp"
#include "fbmps/scan.hpp"

namespace fbmps {

inline nlohmann::json verdict_to_json(const TrappingVerdict& v, const ClassifyTolerances& tol) {
    nlohmann::json j;
    j["class"] = to_string(v.cls);
    j["trapped_total"] = v.trapped_total;
    j["oscillation_amplitude"] = v.oscillation_amplitude;
    if (v.oscillation_period)
        j["oscillation_period"] = *v.oscillation_period;
    else
        j["oscillation_period"] = nullptr;
    j["amplitude_decay_per_period"] = v.amplitude_decay_per_period;
    j["total_relative_spread"] = v.total_relative_spread;
    j["thresholds"] = {{"loss_threshold", tol.loss_threshold},
                       {"amp_threshold", tol.amp_threshold},
                       {"decay_threshold", tol.decay_threshold},
                       {"total_spread_threshold", tol.total_spread_threshold}};
    return j;
}

/// Map CSV: one row per (phi, tau) cell.
inline void write_map_csv(const StabilityMap& map, std::ostream& os) {
    os << "phi,tau,survival\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        os << buf;
    };
    for (std::size_t it = 0; it < map.tau_grid.size(); ++it)
        for (std::size_t ip = 0; ip < map.phi_grid.size(); ++ip) {
            num(map.phi_grid[ip]);
            os << ',';
            num(map.tau_grid[it]);
            os << ',';
            num(map.survival[it][ip]);
            os << '\n';
        }
}

inline nlohmann::json map_sidecar_json(const StabilityMap& map,
                                       const std::vector<DegeneracyPoint>& points,
                                       double threshold) {
    nlohmann::json j;
    j["phi_grid"] = map.phi_grid;
    j["tau_grid"] = map.tau_grid;
    j["integration_time"] = map.integration_time;
    j["threshold"] = threshold;
    nlohmann::json errs = nlohmann::json::array();
    for (std::size_t it = 0; it < map.tau_grid.size(); ++it)
        for (std::size_t ip = 0; ip < map.phi_grid.size(); ++ip)
            if (!map.errors[it][ip].empty())
                errs.push_back({{"phi", map.phi_grid[ip]},
                                {"tau", map.tau_grid[it]},
                                {"error", map.errors[it][ip]}});
    j["point_errors"] = errs;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points)
        pts.push_back({{"phi", p.phi}, {"tau", p.tau}, {"survival", p.survival}});
    j["degeneracy_points"] = pts;
    return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw usage_error("cannot write " + path);
    f << content;
}

} // namespace fbmps
