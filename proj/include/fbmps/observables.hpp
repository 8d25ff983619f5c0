#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fbmps/errors.hpp"
#include "fbmps/evolution.hpp"

namespace fbmps {

enum class SteadyStateClass { lost, constant_trapped, oscillating_trapped };

inline const char* to_string(SteadyStateClass c) {
    switch (c) {
        case SteadyStateClass::lost: return "lost";
        case SteadyStateClass::constant_trapped: return "constant_trapped";
        case SteadyStateClass::oscillating_trapped: return "oscillating_trapped";
    }
    return "?";
}

/// Long-time verdict for one trajectory.
struct TrappingVerdict {
    SteadyStateClass cls = SteadyStateClass::lost;
    double trapped_total = 0.0;         // N_tr, mean chain occupation in the window
    double oscillation_amplitude = 0.0; // largest site peak-to-peak in the window
    std::optional<double> oscillation_period;
    double amplitude_decay_per_period = 0.0;
    double total_relative_spread = 0.0; // peak-to-peak of chain_total / mean
};

/// Thresholds for the three-way classification. The paper states no numeric
/// values; these defaults are documented and configurable.
struct ClassifyTolerances {
    double loss_threshold = 0.01;  // below this mean occupation the chain counts as emptied
    double amp_threshold = 0.005;  // peak-to-peak needed to call densities oscillating
    double decay_threshold = 0.01; // max fractional amplitude loss per period
    double total_spread_threshold = 0.01; // chain_total peak-to-peak / mean for (ii)/(iii)
};

/// Normalized detector signal I(t): cumulative detected occupation divided by
/// the number of initial excitations. Non-decreasing by construction.
inline std::vector<double> detector_signal(const Trajectory& traj, int initial_excitations) {
    double max_cum = 0.0;
    for (double v : traj.detector_cumulative) max_cum = std::max(max_cum, v);
    if (initial_excitations < 1) {
        if (max_cum > 1e-12)
            throw accounting_error("detector_signal: detected excitation with none injected");
        return std::vector<double>(traj.detector_cumulative.size(), 0.0);
    }
    std::vector<double> out;
    out.reserve(traj.detector_cumulative.size());
    for (double v : traj.detector_cumulative)
        out.push_back(v / static_cast<double>(initial_excitations));
    return out;
}

/// First time at which I reaches 99.9% of its final value (the operational
/// convergence time T_c; 0 when nothing was ever detected).
inline double convergence_time(const Trajectory& traj) {
    if (traj.detector_cumulative.empty()) return 0.0;
    const double final_cum = traj.detector_cumulative.back();
    if (final_cum <= 0.0) return 0.0;
    for (std::size_t i = 0; i < traj.detector_cumulative.size(); ++i)
        if (traj.detector_cumulative[i] >= 0.999 * final_cum) return traj.times[i];
    return traj.times.back();
}

namespace detail {

inline double peak_to_peak(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    double lo = v[begin], hi = v[begin];
    for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    return hi - lo;
}

/// Mean spacing of upward zero crossings of (v - mean) over [begin, end).
inline std::optional<double> oscillation_period(const std::vector<double>& v,
                                                const std::vector<double>& t, std::size_t begin,
                                                std::size_t end) {
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += v[i];
    mean /= static_cast<double>(end - begin);
    std::vector<double> crossings;
    for (std::size_t i = begin + 1; i < end; ++i) {
        const double a = v[i - 1] - mean, b = v[i] - mean;
        if (a < 0.0 && b >= 0.0) {
            const double frac = (b - a) > 0 ? -a / (b - a) : 0.0;
            crossings.push_back(t[i - 1] + frac * (t[i] - t[i - 1]));
        }
    }
    if (crossings.size() < 2) return std::nullopt;
    return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

} // namespace detail

/// Classifies the late-time behavior into the three observed possibilities:
/// excitation lost, constant trapped densities, or trapped oscillations with
/// a constant chain total. `window` is the trailing fraction analyzed.
inline TrappingVerdict classify_steady_state(const Trajectory& traj, double window = 0.25,
                                             const ClassifyTolerances& tol = {}) {
    const std::size_t n_rows = traj.times.size();
    if (n_rows < 16) throw insufficient_data_error("classify_steady_state: trajectory too short");
    if (window <= 0.0 || window >= 1.0)
        throw validation_error("classify_steady_state: window must be in (0,1)");

    const double t_c = convergence_time(traj);
    const double span_after = traj.times.back() - t_c;
    if (traj.config.feedback_enabled && span_after < 3.0 * traj.config.delay_tau)
        throw insufficient_data_error(
            "classify_steady_state: need >= 3 delay periods beyond the detector plateau, have " +
            std::to_string(span_after / std::max(traj.config.delay_tau, 1e-300)));

    const std::size_t begin = n_rows - std::max<std::size_t>(
                                           8, static_cast<std::size_t>(window * n_rows));
    const std::size_t end = n_rows;
    if (traj.times[begin] < t_c)
        throw insufficient_data_error("classify_steady_state: window reaches into the transient");

    TrappingVerdict v;
    double total_mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) total_mean += traj.chain_total[i];
    total_mean /= static_cast<double>(end - begin);
    v.trapped_total = total_mean;
    const double total_p2p = detail::peak_to_peak(traj.chain_total, begin, end);
    v.total_relative_spread = total_mean > 0.0 ? total_p2p / total_mean : 0.0;

    std::size_t loudest = 0;
    double max_amp = 0.0;
    const std::size_t n_sites = traj.site_densities.front().size();
    std::vector<std::vector<double>> series(n_sites, std::vector<double>(n_rows));
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t s = 0; s < n_sites; ++s) series[s][i] = traj.site_densities[i][s];
    for (std::size_t s = 0; s < n_sites; ++s) {
        const double amp = detail::peak_to_peak(series[s], begin, end);
        if (amp > max_amp) {
            max_amp = amp;
            loudest = s;
        }
    }
    v.oscillation_amplitude = max_amp;

    if (total_mean < tol.loss_threshold) {
        v.cls = SteadyStateClass::lost;
        return v;
    }
    if (max_amp <= tol.amp_threshold) {
        v.cls = SteadyStateClass::constant_trapped;
        return v;
    }

    v.oscillation_period = detail::oscillation_period(series[loudest], traj.times, begin, end);
    if (v.oscillation_period) {
        // amplitude drift: compare the first and last whole period in the window
        const double period = *v.oscillation_period;
        const double dt = traj.config.dt;
        const std::size_t per_rows = std::max<std::size_t>(2, static_cast<std::size_t>(period / dt));
        if (end - begin >= 2 * per_rows) {
            const double first = detail::peak_to_peak(series[loudest], begin, begin + per_rows);
            const double last = detail::peak_to_peak(series[loudest], end - per_rows, end);
            const double n_periods =
                static_cast<double>(end - begin - per_rows) / static_cast<double>(per_rows);
            if (first > 0.0 && n_periods > 0.0) {
                const double ratio = std::max(1e-12, last / first);
                v.amplitude_decay_per_period = 1.0 - std::pow(ratio, 1.0 / n_periods);
            }
        }
    }

    if (v.total_relative_spread > tol.total_spread_threshold)
        throw insufficient_data_error(
            "classify_steady_state: densities oscillate but the chain total has not settled");
    v.cls = SteadyStateClass::oscillating_trapped;
    return v;
}

/// Excitation bookkeeping across chain, loop, detector and truncation.
struct LedgerReport {
    std::vector<double> residual; // per step
    double max_residual = 0.0;
    bool flagged = false;
    double budget = 0.0;
};

/// Checks chain(t) + loop(t) + detected(t) + deficit(t)*N_exc = N_exc.
/// Truncated weight carries exactly N_exc excitations per unit of norm
/// (the state lives in one total-excitation sector), so the residual is
/// numerical-noise sized unless the choreography miscounts.
inline LedgerReport excitation_ledger(const Trajectory& traj, double budget = 1e-3) {
    LedgerReport rep;
    rep.budget = budget;
    const double n_exc = static_cast<double>(traj.initial_excitations);
    rep.residual.reserve(traj.times.size());
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double lhs = traj.chain_total[i] + traj.loop_total[i] +
                           traj.detector_cumulative[i] + traj.norm_deficit[i] * n_exc;
        const double r = std::abs(lhs - n_exc);
        rep.residual.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
    }
    rep.flagged = rep.max_residual > budget;
    return rep;
}

} // namespace fbmps
