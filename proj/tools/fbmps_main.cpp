// Command-line front end: evolve / benchmark / scan / oracle.
//
// Exit codes: 0 ok, 2 configuration problem, 3 capacity exceeded,
// 4 benchmark gate failed, 1 anything else.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbmps/config.hpp"
#include "fbmps/evolution.hpp"
#include "fbmps/io.hpp"
#include "fbmps/observables.hpp"
#include "fbmps/oracles.hpp"
#include "fbmps/scan.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;
namespace fs = std::filesystem;
using namespace fbmps;

std::vector<int> parse_pattern(const std::string& spec, int n_sites) {
    if (spec == "none") return {};
    if (spec.empty()) return {n_sites}; // boundary site excited
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (...) {
            throw config_error("bad --pattern entry '" + tok + "'");
        }
    }
    return out;
}

struct Manifest {
    std::string mode;
    std::string config_path;
    std::string output_dir;
    std::vector<std::string> outputs;
    double wall_clock_seconds = 0.0;
    long peak_bond = 0;

    json to_json() const {
        json j;
        j["mode"] = mode;
        j["config_path"] = config_path;
        j["output_dir"] = output_dir;
        j["tool_version"] = kVersion;
        j["deterministic"] = true; // the engine holds no random number generator
        j["outputs"] = outputs;
        j["wall_clock_seconds"] = wall_clock_seconds;
        j["peak_bond"] = peak_bond;
        return j;
    }
};

void write_manifest(const Manifest& m) {
    write_text_file((fs::path(m.output_dir) / "manifest.json").string(),
                    m.to_json().dump(2) + "\n");
}

void print_warnings(const SimulationConfig& cfg) {
    for (const auto& w : validate(cfg)) std::cerr << "warning: " << w << "\n";
}

int cmd_evolve(const std::string& config_path, const std::string& pattern_spec,
               const std::string& out_dir) {
    SimulationConfig cfg = load_config(config_path);
    print_warnings(cfg);
    const std::vector<int> pattern = parse_pattern(pattern_spec, cfg.n_sites);

    fs::create_directories(out_dir);
    Manifest man{"evolve", config_path, out_dir, {"trajectory.csv", "verdict.json"}, 0.0, 0};
    write_manifest(man);

    const auto t0 = std::chrono::steady_clock::now();
    Trajectory traj = run(cfg, pattern);

    std::ostringstream csv;
    write_trajectory_csv(traj, csv);
    write_text_file((fs::path(out_dir) / "trajectory.csv").string(), csv.str());

    json vj;
    try {
        TrappingVerdict verdict = classify_steady_state(traj);
        vj = verdict_to_json(verdict, ClassifyTolerances{});
    } catch (const insufficient_data_error& e) {
        vj["class"] = nullptr;
        vj["error"] = e.what();
    }
    vj["detector_final"] =
        detector_signal(traj, std::max<int>(1, traj.initial_excitations)).back();
    vj["convergence_time"] = convergence_time(traj);
    write_text_file((fs::path(out_dir) / "verdict.json").string(), vj.dump(2) + "\n");

    man.wall_clock_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    man.peak_bond = traj.max_bond_seen;
    write_manifest(man);
    return 0;
}

int cmd_benchmark(const std::string& config_path, double gate_tol, const std::string& out_dir) {
    SimulationConfig cfg = load_config(config_path);
    print_warnings(cfg);
    const std::vector<int> pattern = {cfg.n_sites};

    fs::create_directories(out_dir);
    Manifest man{"benchmark", config_path, out_dir, {"mps.csv", "oracle.csv", "report.json"},
                 0.0, 0};
    write_manifest(man);

    const auto t0 = std::chrono::steady_clock::now();
    Trajectory traj = run(cfg, pattern);

    std::string arm;
    std::vector<std::vector<double>> reference;
    if (cfg.decay_gamma == 0.0) {
        arm = "dense_unitary";
        reference = dense_unitary_densities(cfg, pattern, traj.times);
    } else if (cfg.feedback_enabled && cfg.n_sites == 1) {
        arm = "delay_equation";
        std::vector<double> pop = single_emitter_delay_run(cfg.decay_gamma, cfg.delay_tau,
                                                           cfg.feedback_phase, traj.times);
        for (double v : pop) reference.push_back({v});
    } else if (!cfg.feedback_enabled && cfg.n_sites <= 8) {
        arm = "lindblad";
        reference = lindblad_run(cfg, pattern, traj.times);
    } else {
        throw capacity_error("benchmark: no oracle covers this configuration "
                             "(need gamma=0, or N=1 with feedback, or N<=8 without)");
    }

    double max_dev = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        for (std::size_t s = 0; s < reference[i].size(); ++s)
            max_dev = std::max(max_dev,
                               std::abs(traj.site_densities[i][s] - reference[i][s]));

    std::ostringstream mps_csv;
    write_trajectory_csv(traj, mps_csv);
    write_text_file((fs::path(out_dir) / "mps.csv").string(), mps_csv.str());

    std::ostringstream oracle_csv;
    oracle_csv << "t";
    for (std::size_t s = 1; s <= reference.front().size(); ++s) oracle_csv << ",n" << s;
    oracle_csv << "\n";
    char buf[64];
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", traj.times[i]);
        oracle_csv << buf;
        for (double v : reference[i]) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            oracle_csv << ',' << buf;
        }
        oracle_csv << '\n';
    }
    write_text_file((fs::path(out_dir) / "oracle.csv").string(), oracle_csv.str());

    json rep;
    rep["arm"] = arm;
    rep["max_deviation"] = max_dev;
    rep["gate"] = gate_tol;
    rep["passed"] = max_dev <= gate_tol;
    write_text_file((fs::path(out_dir) / "report.json").string(), rep.dump(2) + "\n");

    man.wall_clock_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    man.peak_bond = traj.max_bond_seen;
    write_manifest(man);

    std::cout << "benchmark arm=" << arm << " max_deviation=" << max_dev
              << (max_dev <= gate_tol ? " (pass)" : " (FAIL)") << "\n";
    return max_dev <= gate_tol ? 0 : 4;
}

int cmd_scan(const std::string& config_path, int phi_count, double phi_min, double phi_max,
             const std::string& tau_spec, unsigned workers, double threshold, bool verify,
             const std::string& out_dir) {
    SimulationConfig cfg = load_config(config_path);
    print_warnings(cfg);

    std::vector<double> taus;
    {
        std::stringstream ss(tau_spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) taus.push_back(std::stod(tok));
    }
    if (taus.empty()) throw config_error("scan: --tau list is empty");
    if (phi_count < 2) throw config_error("scan: --phi-count must be >= 2");
    std::vector<double> phis;
    for (int i = 0; i < phi_count; ++i)
        phis.push_back(phi_min + (phi_max - phi_min) * i / static_cast<double>(phi_count));

    fs::create_directories(out_dir);
    Manifest man{"scan", config_path, out_dir, {"map.csv", "map.json"}, 0.0, 0};
    write_manifest(man);

    const auto t0 = std::chrono::steady_clock::now();
    StabilityMap map = stability_map(cfg, phis, taus, workers);
    std::vector<DegeneracyPoint> points = find_degeneracy_points(map);
    if (verify) points = verify_degeneracy_points(cfg, points);

    std::ostringstream csv;
    write_map_csv(map, csv);
    write_text_file((fs::path(out_dir) / "map.csv").string(), csv.str());

    json sidecar = map_sidecar_json(map, points, threshold);
    json counts = json::array();
    for (std::size_t it = 0; it < map.tau_grid.size(); ++it) {
        std::vector<bool> above(map.phi_grid.size());
        for (std::size_t ip = 0; ip < map.phi_grid.size(); ++ip)
            above[ip] = map.survival[it][ip] > threshold;
        TrappingCount c = detail::count_cyclic_intervals(above, map.phi_grid);
        counts.push_back({{"tau", map.tau_grid[it]},
                          {"n_phi_c", c.count},
                          {"resolution_warning", c.resolution_warning}});
    }
    sidecar["trapping_counts"] = counts;
    write_text_file((fs::path(out_dir) / "map.json").string(), sidecar.dump(2) + "\n");

    man.wall_clock_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    write_manifest(man);

    std::cout << "scan wrote " << map.phi_grid.size() << "x" << map.tau_grid.size()
              << " map; " << points.size() << " degeneracy point(s)\n";
    for (const auto& p : points)
        std::cout << "  degeneracy candidate phi=" << p.phi << " tau=" << p.tau
                  << " survival=" << p.survival << "\n";
    return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& pattern_spec,
               const std::string& out_dir) {
    SimulationConfig cfg = load_config(config_path);
    print_warnings(cfg);
    const std::vector<int> pattern = parse_pattern(pattern_spec, cfg.n_sites);
    if (cfg.n_steps < 1) throw config_error("oracle: n_steps must be >= 1");

    fs::create_directories(out_dir);
    Manifest man{"oracle", config_path, out_dir, {"oracle.csv"}, 0.0, 0};
    write_manifest(man);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> t_grid;
    for (long k = 1; k <= cfg.n_steps; ++k) t_grid.push_back(cfg.dt * static_cast<double>(k));

    std::string arm;
    std::vector<std::vector<double>> dens;
    if (cfg.feedback_enabled && cfg.n_sites == 1) {
        arm = "delay_equation";
        std::vector<double> pop = single_emitter_delay_run(cfg.decay_gamma, cfg.delay_tau,
                                                           cfg.feedback_phase, t_grid);
        for (double v : pop) dens.push_back({v});
    } else if (!cfg.feedback_enabled) {
        arm = "lindblad";
        dens = lindblad_run(cfg, pattern, t_grid);
    } else {
        throw capacity_error("oracle: no oracle covers feedback with N > 1");
    }

    std::ostringstream csv;
    csv << "t";
    for (std::size_t s = 1; s <= dens.front().size(); ++s) csv << ",n" << s;
    csv << "\n";
    char buf[64];
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", t_grid[i]);
        csv << buf;
        for (double v : dens[i]) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            csv << ',' << buf;
        }
        csv << '\n';
    }
    write_text_file((fs::path(out_dir) / "oracle.csv").string(), csv.str());

    man.wall_clock_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    write_manifest(man);
    std::cout << "oracle arm=" << arm << " wrote " << t_grid.size() << " rows\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-bin MPS simulator for a dissipative Heisenberg chain "
                 "with coherent delayed feedback"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", pattern_spec, tau_spec;
    double gate_tol = 1e-3, phi_min = 0.0, phi_max = 2.0 * M_PI, threshold = 0.02;
    int phi_count = 32;
    unsigned workers = 2;
    bool verify = false;

    CLI::App* evolve = app.add_subcommand("evolve", "run one trajectory, classify the steady state");
    evolve->add_option("--config", config_path, "config file")->required();
    evolve->add_option("--pattern", pattern_spec, "excited sites i,j,... ('none' for vacuum; default: boundary site)");
    evolve->add_option("--out", out_dir, "output directory");

    CLI::App* bench = app.add_subcommand("benchmark", "run MPS against the matching exact oracle");
    bench->add_option("--config", config_path, "config file")->required();
    bench->add_option("--gate", gate_tol, "max allowed deviation");
    bench->add_option("--out", out_dir, "output directory");

    CLI::App* scan = app.add_subcommand("scan", "survival map over the phi-tau plane");
    scan->add_option("--config", config_path, "config file")->required();
    scan->add_option("--phi-count", phi_count, "number of phi samples");
    scan->add_option("--phi-min", phi_min, "phi window start");
    scan->add_option("--phi-max", phi_max, "phi window end (exclusive)");
    scan->add_option("--tau", tau_spec, "comma list of tau values")->required();
    scan->add_option("--workers", workers, "worker threads");
    scan->add_option("--threshold", threshold, "survival threshold for trapping counts");
    scan->add_flag("--verify", verify, "re-simulate degeneracy candidates and keep oscillating ones");
    scan->add_option("--out", out_dir, "output directory");

    CLI::App* oracle = app.add_subcommand("oracle", "run the exact reference alone");
    oracle->add_option("--config", config_path, "config file")->required();
    oracle->add_option("--pattern", pattern_spec, "excited sites i,j,...");
    oracle->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (evolve->parsed()) return cmd_evolve(config_path, pattern_spec, out_dir);
        if (bench->parsed()) return cmd_benchmark(config_path, gate_tol, out_dir);
        if (scan->parsed())
            return cmd_scan(config_path, phi_count, phi_min, phi_max, tau_spec, workers,
                            threshold, verify, out_dir);
        if (oracle->parsed()) return cmd_oracle(config_path, pattern_spec, out_dir);
    } catch (const config_error& e) {
        std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
        return 2;
    } catch (const validation_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const capacity_error& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
