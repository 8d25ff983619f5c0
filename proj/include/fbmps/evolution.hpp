#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <string>
#include <vector>

#include "fbmps/config.hpp"
#include "fbmps/errors.hpp"
#include "fbmps/model.hpp"
#include "fbmps/mps.hpp"

namespace fbmps {

/// Per-step record of one run.
///
/// detector_cumulative is the raw sum of detected bin occupations (divide by
/// the initial excitation count for the normalized I(t)); loop_total is the
/// occupation still travelling inside the feedback loop; norm_deficit is
/// 1 - <psi|psi> and tracks the truncation ledger.
struct Trajectory {
    SimulationConfig config;
    int initial_excitations = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> site_densities; // [step][site-1]
    std::vector<double> detector_increments;
    std::vector<double> detector_cumulative;
    std::vector<double> chain_total;
    std::vector<double> loop_total;
    std::vector<double> norm_deficit;
    std::vector<double> discarded_cumulative; // truncation ledger
    std::vector<long> bond_max;
    long max_bond_seen = 1;
};

/// Builds the start state: listed chain sites excited, everything else in
/// vacuum. With feedback enabled the train already carries the l pre-loop
/// vacuum bins (time indices -l..-1) that realize the empty loop at t=0.
inline MatrixProductState initial_state(const SimulationConfig& cfg,
                                        const std::vector<int>& pattern) {
    validate(cfg);
    std::vector<bool> excited(static_cast<std::size_t>(cfg.n_sites), false);
    for (int site : pattern) {
        if (site < 1 || site > cfg.n_sites)
            throw validation_error("initial_state: site index " + std::to_string(site) +
                                   " out of range 1.." + std::to_string(cfg.n_sites));
        if (excited[static_cast<std::size_t>(site - 1)])
            throw validation_error("initial_state: duplicate site index " + std::to_string(site));
        excited[static_cast<std::size_t>(site - 1)] = true;
    }

    std::vector<SiteLabel> labels;
    std::vector<std::vector<cplx>> locals;
    const long l = cfg.feedback_enabled ? delay_steps(cfg) : 0;
    std::vector<cplx> vacuum_bin(static_cast<std::size_t>(cfg.bin_dim), cplx(0.0, 0.0));
    vacuum_bin[0] = 1.0;
    for (long b = -l; b < 0; ++b) {
        labels.push_back({SiteKind::time_bin, b});
        locals.push_back(vacuum_bin);
    }
    for (int n = 1; n <= cfg.n_sites; ++n) {
        labels.push_back({SiteKind::spin, n});
        locals.push_back(excited[static_cast<std::size_t>(n - 1)]
                             ? std::vector<cplx>{0.0, 1.0}
                             : std::vector<cplx>{1.0, 0.0});
    }
    labels.push_back({SiteKind::sink, 0});
    locals.push_back({1.0});
    return MatrixProductState::from_product_state(std::move(labels), locals);
}

struct StepResult {
    double detector_increment = 0.0; // occupation of the bin that left the loop
    double bin_fill = 0.0;           // occupation written into the fresh bin
    double discarded = 0.0;
};

namespace detail {

inline void check_layout(const MatrixProductState& psi, const SimulationConfig& cfg, long k) {
    const long l = cfg.feedback_enabled ? delay_steps(cfg) : 0;
    const std::size_t expect = static_cast<std::size_t>(l + cfg.n_sites + 1);
    if (psi.size() != expect)
        throw usage_error("step: train has " + std::to_string(psi.size()) + " sites, expected " +
                          std::to_string(expect));
    if (cfg.feedback_enabled) {
        const SiteLabel& oldest = psi.label(0);
        if (oldest.kind != SiteKind::time_bin || oldest.index != k - l)
            throw usage_error("step: window out of order (expected bin " + std::to_string(k - l) +
                              " first)");
    }
    for (int n = 1; n <= cfg.n_sites; ++n) {
        const SiteLabel& lab = psi.label(static_cast<std::size_t>(l + n - 1));
        if (lab.kind != SiteKind::spin || lab.index != n)
            throw usage_error("step: chain block out of place");
    }
    if (psi.label(psi.size() - 1).kind != SiteKind::sink)
        throw usage_error("step: train must end with the sink register");
}

} // namespace detail

/// Advances the state by one full step: half chain sweep, bin stage
/// (three-body feedback block or two-body emission), half chain sweep.
/// Bin choreography follows the fixed documented path; any gauge deviation
/// throws from the engine layer.
inline StepResult step(MatrixProductState& psi, long k, const GateSet& gates,
                       const SimulationConfig& cfg) {
    detail::check_layout(psi, cfg, k);
    const double cutoff = cfg.svd_cutoff;
    const std::size_t max_bond = static_cast<std::size_t>(cfg.max_bond);
    const std::size_t n = static_cast<std::size_t>(cfg.n_sites);
    const std::size_t l =
        cfg.feedback_enabled ? static_cast<std::size_t>(delay_steps(cfg)) : 0;
    const double discarded_before = psi.discarded_total();
    const ComplexTensor n_op = bin_number_operator(cfg.bin_dim);
    std::vector<cplx> vacuum_bin(static_cast<std::size_t>(cfg.bin_dim), cplx(0.0, 0.0));
    vacuum_bin[0] = 1.0;

    StepResult out;

    if (cfg.feedback_enabled) {
        // 1. drag the returning bin (k-l) up to the left edge of the chain
        psi.move_ortho_center(0);
        for (std::size_t p = 0; p + 1 < l; ++p)
            psi.swap_adjacent(p, cutoff, max_bond, OrthoSide::right);

        // 2. first half chain sweep, left to right
        psi.move_ortho_center(l);
        for (std::size_t b = 0; b + 1 < n; ++b)
            psi.apply_gate(gates.chain_bond_half_gates[b], {l + b, l + b + 1}, cutoff, max_bond,
                           OrthoSide::right);

        // 3. thread the returning bin through the chain to sit left of site N
        psi.move_ortho_center(l);
        for (std::size_t i = 0; i + 1 < n; ++i)
            psi.swap_adjacent(l - 1 + i, cutoff, max_bond, OrthoSide::right);

        // 4. fresh vacuum bin k next to site N, then the three-body block
        psi.insert_product_site(l + n, SiteLabel{SiteKind::time_bin, k}, vacuum_bin);
        psi.apply_gate(gates.feedback_gate, {l + n - 2, l + n - 1, l + n}, cutoff, max_bond,
                       OrthoSide::right);

        // 5. harvest: fresh-bin fill (still in the loop) and the occupation
        //    of the bin that now permanently exits toward the detector
        out.bin_fill = psi.expect_local(n_op, l + n).real();
        out.detector_increment = psi.expect_local(n_op, l + n - 2).real();

        // 6. retire the exited bin behind the sink
        psi.move_ortho_center(l + n - 1);
        psi.swap_adjacent(l + n - 2, cutoff, max_bond, OrthoSide::right);
        psi.swap_adjacent(l + n - 1, cutoff, max_bond, OrthoSide::left);
        psi.absorb_rightmost_into_sink();

        // 7. migrate the fresh bin to the young end of the window
        for (std::size_t i = 0; i < n; ++i)
            psi.swap_adjacent(l + n - 2 - i, cutoff, max_bond, OrthoSide::left);

        // 8. second half chain sweep, right to left (palindromic step)
        if (n >= 2) {
            psi.move_ortho_center(l + n - 2);
            for (std::size_t b = n - 1; b-- > 0;) {
                psi.apply_gate(gates.chain_bond_half_gates[b], {l + b, l + b + 1}, cutoff,
                               max_bond, OrthoSide::left);
            }
        }
    } else {
        // emission-only step: (site N, fresh bin), bin detected immediately
        psi.move_ortho_center(0);
        for (std::size_t b = 0; b + 1 < n; ++b)
            psi.apply_gate(gates.chain_bond_half_gates[b], {b, b + 1}, cutoff, max_bond,
                           OrthoSide::right);

        psi.insert_product_site(n, SiteLabel{SiteKind::time_bin, k}, vacuum_bin);
        psi.apply_gate(gates.emission_gate, {n - 1, n}, cutoff, max_bond, OrthoSide::right);

        out.bin_fill = psi.expect_local(n_op, n).real();
        out.detector_increment = out.bin_fill;

        psi.move_ortho_center(n - 1);
        psi.absorb_rightmost_into_sink();

        if (n >= 2) {
            for (std::size_t b = n - 1; b-- > 0;) {
                psi.apply_gate(gates.chain_bond_half_gates[b], {b, b + 1}, cutoff, max_bond,
                               OrthoSide::left);
            }
        }
    }

    out.discarded = psi.discarded_total() - discarded_before;
    if (cfg.svd_cutoff == 0.0 && out.discarded > 1e-12)
        throw capacity_error("step: max_bond " + std::to_string(cfg.max_bond) +
                             " exceeded with cutoff 0; increase max_bond");
    return out;
}

/// Runs the configured number of steps and assembles the trajectory.
inline Trajectory run(const SimulationConfig& cfg, const std::vector<int>& pattern) {
    validate(cfg);
    if (cfg.n_steps < 1) throw config_error("n_steps must be >= 1 for a run");

    MatrixProductState psi = initial_state(cfg, pattern);
    GateSet gates = build_gate_set(cfg);
    const std::size_t n = static_cast<std::size_t>(cfg.n_sites);
    const std::size_t l =
        cfg.feedback_enabled ? static_cast<std::size_t>(delay_steps(cfg)) : 0;
    const ComplexTensor proj = excited_projector();

    Trajectory traj;
    traj.config = cfg;
    traj.initial_excitations = static_cast<int>(pattern.size());
    traj.times.reserve(static_cast<std::size_t>(cfg.n_steps));

    std::deque<double> window_fills;
    double loop_sum = 0.0;
    double detector_sum = 0.0;

    for (long k = 0; k < cfg.n_steps; ++k) {
        StepResult r = step(psi, k, gates, cfg);

        detector_sum += r.detector_increment;
        if (cfg.feedback_enabled) {
            window_fills.push_back(r.bin_fill);
            loop_sum += r.bin_fill;
            if (window_fills.size() > l) {
                loop_sum -= window_fills.front();
                window_fills.pop_front();
            }
        }

        traj.times.push_back(static_cast<double>(k + 1) * cfg.dt);
        std::vector<double> dens(n);
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            dens[s] = psi.expect_local(proj, l + s).real();
            total += dens[s];
        }
        traj.site_densities.push_back(std::move(dens));
        traj.chain_total.push_back(total);
        traj.detector_increments.push_back(r.detector_increment);
        traj.detector_cumulative.push_back(detector_sum);
        traj.loop_total.push_back(cfg.feedback_enabled ? loop_sum : 0.0);
        traj.norm_deficit.push_back(1.0 - psi.norm_squared());
        traj.discarded_cumulative.push_back(psi.discarded_total());
        const long bond = static_cast<long>(psi.max_bond_dim());
        traj.bond_max.push_back(bond);
        traj.max_bond_seen = std::max(traj.max_bond_seen, bond);
    }
    return traj;
}

/// CSV schema: t,n1..nN,detector_inc,detector_cum,chain_total,norm_deficit,max_bond
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (int s = 1; s <= traj.config.n_sites; ++s) os << ",n" << s;
    os << ",detector_inc,detector_cum,chain_total,norm_deficit,max_bond\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        num(traj.times[i]);
        for (double d : traj.site_densities[i]) {
            os << ',';
            num(d);
        }
        os << ',';
        num(traj.detector_increments[i]);
        os << ',';
        num(traj.detector_cumulative[i]);
        os << ',';
        num(traj.chain_total[i]);
        os << ',';
        num(traj.norm_deficit[i]);
        os << ',' << traj.bond_max[i] << '\n';
    }
}

} // namespace fbmps
