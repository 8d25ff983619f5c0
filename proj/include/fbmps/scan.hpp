#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fbmps/config.hpp"
#include "fbmps/errors.hpp"
#include "fbmps/evolution.hpp"
#include "fbmps/observables.hpp"

namespace fbmps {

/// Survival landscape over the phi-tau plane: survival = 1 - I(T) with the
/// boundary site initially excited. Rows follow tau_grid, columns phi_grid.
struct StabilityMap {
    std::vector<double> phi_grid;
    std::vector<double> tau_grid;
    std::vector<std::vector<double>> survival;   // [tau][phi]
    std::vector<std::vector<std::string>> errors; // per-point failure notes ("" = ok)
    std::vector<double> integration_time;        // per tau
};

/// Integration time per map point: finite on purpose; the stability lines
/// broaden with T because near-critical points only slow the dissipation.
inline double default_scan_time(const SimulationConfig& cfg, double tau) {
    const double by_rate = cfg.decay_gamma > 0.0 ? 10.0 / cfg.decay_gamma : 0.0;
    return std::max(by_rate, 8.0 * tau);
}

inline long scan_steps(const SimulationConfig& base, double tau) {
    if (base.n_steps > 0) return base.n_steps;
    return std::max<long>(1, static_cast<long>(std::ceil(default_scan_time(base, tau) / base.dt)));
}

namespace detail {

inline double survival_at(SimulationConfig cfg, double phi, double tau) {
    cfg.feedback_phase = phi;
    cfg.delay_tau = tau;
    cfg.feedback_enabled = true;
    cfg.n_steps = scan_steps(cfg, tau);
    Trajectory traj = run(cfg, {cfg.n_sites});
    const std::vector<double> sig = detector_signal(traj, 1);
    return 1.0 - sig.back();
}

} // namespace detail

/// One run per grid point over a deterministic work queue; per-point capacity
/// failures are recorded, not fatal. Results are merged by grid index, so the
/// map is identical for any worker count.
inline StabilityMap stability_map(const SimulationConfig& base, std::vector<double> phi_grid,
                                  std::vector<double> tau_grid, unsigned workers = 1) {
    for (std::size_t i = 1; i < phi_grid.size(); ++i)
        if (phi_grid[i] <= phi_grid[i - 1])
            throw validation_error("stability_map: phi_grid must be strictly increasing");
    for (std::size_t i = 1; i < tau_grid.size(); ++i)
        if (tau_grid[i] <= tau_grid[i - 1])
            throw validation_error("stability_map: tau_grid must be strictly increasing");
    for (double tau : tau_grid) {
        SimulationConfig probe = base;
        probe.delay_tau = tau;
        delay_steps(probe); // throws unless tau is a multiple of dt
    }

    StabilityMap map;
    map.phi_grid = std::move(phi_grid);
    map.tau_grid = std::move(tau_grid);
    const std::size_t np = map.phi_grid.size(), nt = map.tau_grid.size();
    map.survival.assign(nt, std::vector<double>(np, 0.0));
    map.errors.assign(nt, std::vector<std::string>(np));
    for (double tau : map.tau_grid)
        map.integration_time.push_back(static_cast<double>(scan_steps(base, tau)) * base.dt);

    std::atomic<std::size_t> next{0};
    const std::size_t total = np * nt;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            const std::size_t it = i / np, ip = i % np;
            try {
                map.survival[it][ip] =
                    detail::survival_at(base, map.phi_grid[ip], map.tau_grid[it]);
            } catch (const std::exception& e) {
                map.survival[it][ip] = std::nan("");
                map.errors[it][ip] = e.what();
            }
        }
    };

    const unsigned n_workers = std::max(1u, workers);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return map;
}

/// Trapping-phase count at fixed tau. count is the spec's N_phi_c;
/// resolution_warning flags intervals narrower than two grid cells.
struct TrappingCount {
    int count = 0;
    bool resolution_warning = false;
    std::vector<std::pair<double, double>> intervals; // [phi_lo, phi_hi]
    std::vector<double> survival;
};

namespace detail {

/// Maximal runs of true cells on a cyclic grid; fills count/intervals/warning.
inline TrappingCount count_cyclic_intervals(const std::vector<bool>& above,
                                            const std::vector<double>& phi_grid) {
    const int n = static_cast<int>(above.size());
    TrappingCount out;
    int start = -1;
    for (int i = 0; i < n; ++i)
        if (!above[static_cast<std::size_t>(i)]) {
            start = i;
            break;
        }
    if (start < 0) {
        if (n > 0) {
            out.count = 1; // everything above threshold: one cyclic interval
            out.intervals.push_back({phi_grid.front(), phi_grid.back()});
        }
        return out;
    }
    int i = start;
    do {
        const int j = (i + 1) % n;
        if (above[static_cast<std::size_t>(j)]) {
            int len = 0;
            int kk = j;
            const double lo = phi_grid[static_cast<std::size_t>(j)];
            while (above[static_cast<std::size_t>(kk)]) {
                ++len;
                kk = (kk + 1) % n;
            }
            const int last = (j + len - 1) % n;
            out.intervals.push_back({lo, phi_grid[static_cast<std::size_t>(last)]});
            ++out.count;
            if (len < 2) out.resolution_warning = true;
            i = (j + len - 1) % n;
            if (i == start) break;
        }
        i = (i + 1) % n;
    } while (i != start);
    return out;
}

} // namespace detail

/// Counts disjoint phi-intervals (cyclic over [0, 2pi)) whose survival
/// exceeds the threshold.
inline TrappingCount count_trapping_phases(const SimulationConfig& base, double tau,
                                           int phi_resolution, double threshold,
                                           unsigned workers = 1) {
    if (phi_resolution < 4) throw validation_error("count_trapping_phases: resolution too small");
    std::vector<double> phi_grid;
    const double two_pi = 2.0 * M_PI;
    for (int i = 0; i < phi_resolution; ++i)
        phi_grid.push_back(two_pi * static_cast<double>(i) / static_cast<double>(phi_resolution));
    StabilityMap map = stability_map(base, phi_grid, {tau}, workers);

    const std::vector<double>& s = map.survival[0];
    std::vector<bool> above(static_cast<std::size_t>(phi_resolution));
    for (int i = 0; i < phi_resolution; ++i)
        above[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] > threshold;
    TrappingCount out = detail::count_cyclic_intervals(above, phi_grid);
    out.survival = s;
    return out;
}

struct DegeneracyPoint {
    double phi = 0.0;
    double tau = 0.0;
    double survival = 0.0;
};

namespace detail {

struct RidgePeak {
    std::size_t column = 0; // tau index
    double phi = 0.0;
    double survival = 0.0;
};

/// Local survival maxima along one fixed-tau column with a prominence filter;
/// cyclic when the grid spans the full phase interval.
inline std::vector<RidgePeak> column_peaks(const StabilityMap& map, std::size_t it,
                                           double prominence) {
    const std::vector<double>& s = map.survival[it];
    const std::size_t n = s.size();
    std::vector<RidgePeak> peaks;
    if (n < 3) return peaks;
    const double span = map.phi_grid.back() - map.phi_grid.front();
    const double cell = span / static_cast<double>(n - 1);
    const bool cyclic = std::abs(span + cell - 2.0 * M_PI) < 0.5 * cell;
    for (std::size_t i = 0; i < n; ++i) {
        if (!cyclic && (i == 0 || i + 1 == n)) continue;
        const double prev = s[(i + n - 1) % n], cur = s[i], next = s[(i + 1) % n];
        if (std::isnan(prev) || std::isnan(cur) || std::isnan(next)) continue;
        if (cur >= prev && cur > next && cur > prominence)
            peaks.push_back({it, map.phi_grid[i], cur});
        else if (cur > prev && cur >= next && cur > prominence)
            peaks.push_back({it, map.phi_grid[i], cur});
    }
    // collapse plateaus reported twice
    std::vector<RidgePeak> dedup;
    for (const auto& p : peaks) {
        if (!dedup.empty() && std::abs(dedup.back().phi - p.phi) < 1.5 * cell &&
            dedup.back().survival == p.survival)
            continue;
        dedup.push_back(p);
    }
    return dedup;
}

} // namespace detail

namespace detail {

struct RidgeLine {
    double slope = 0.0;     // d phi / d tau
    double intercept = 0.0; // phi at tau = 0
    int support = 0;
    double mean_survival = 0.0;

    double phi_at(double tau) const { return slope * tau + intercept; }
};

/// Straight-line consensus over the per-column peaks. The trapping lines are
/// linear in the phi-tau plane, and a global fit keeps working through the
/// merge zone around a crossing where nearest-neighbor linking loses a line.
inline std::vector<RidgeLine> extract_ridge_lines(const StabilityMap& map, double radius,
                                                  double prominence) {
    const std::size_t nt = map.tau_grid.size();
    std::vector<std::vector<RidgePeak>> columns;
    std::size_t n_peaks = 0;
    for (std::size_t it = 0; it < nt; ++it) {
        columns.push_back(column_peaks(map, it, prominence));
        n_peaks += columns.back().size();
    }
    if (n_peaks < 4) return {};

    const double tau_span = map.tau_grid.back() - map.tau_grid.front();
    auto line_from = [&](const RidgePeak& a, const RidgePeak& b) -> RidgeLine {
        RidgeLine ln;
        const double dtau = map.tau_grid[b.column] - map.tau_grid[a.column];
        ln.slope = (b.phi - a.phi) / dtau;
        ln.intercept = a.phi - ln.slope * map.tau_grid[a.column];
        return ln;
    };
    auto score = [&](RidgeLine& ln) {
        ln.support = 0;
        ln.mean_survival = 0.0;
        for (std::size_t it = 0; it < nt; ++it) {
            double best = radius;
            const RidgePeak* hit = nullptr;
            for (const auto& p : columns[it]) {
                const double d = std::abs(p.phi - ln.phi_at(map.tau_grid[it]));
                if (d <= best) {
                    best = d;
                    hit = &p;
                }
            }
            if (hit) {
                ++ln.support;
                ln.mean_survival += hit->survival;
            }
        }
        if (ln.support > 0) ln.mean_survival /= static_cast<double>(ln.support);
    };

    std::vector<RidgeLine> candidates;
    for (std::size_t ca = 0; ca < nt; ++ca)
        for (std::size_t cb = ca + 1; cb < nt; ++cb)
            for (const auto& pa : columns[ca])
                for (const auto& pb : columns[cb]) {
                    RidgeLine ln = line_from(pa, pb);
                    score(ln);
                    if (ln.support >= std::max<int>(3, static_cast<int>(std::ceil(0.6 * static_cast<double>(nt)))))
                        candidates.push_back(ln);
                }

    // least-squares refit on the inlier peaks collapses near-duplicate
    // candidates that pivot around a merged blob
    auto refit = [&](RidgeLine& ln) {
        for (int pass = 0; pass < 2; ++pass) {
            double sw = 0, st = 0, sp = 0, stt = 0, stp = 0;
            int used = 0;
            for (std::size_t it = 0; it < nt; ++it) {
                double best = radius;
                const RidgePeak* hit = nullptr;
                for (const auto& p : columns[it]) {
                    const double d = std::abs(p.phi - ln.phi_at(map.tau_grid[it]));
                    if (d <= best) {
                        best = d;
                        hit = &p;
                    }
                }
                if (!hit) continue;
                const double t = map.tau_grid[it];
                sw += 1.0;
                st += t;
                sp += hit->phi;
                stt += t * t;
                stp += t * hit->phi;
                ++used;
            }
            if (used < 2) return;
            const double det = sw * stt - st * st;
            if (std::abs(det) < 1e-12) return;
            ln.slope = (sw * stp - st * sp) / det;
            ln.intercept = (stt * sp - st * stp) / det;
        }
        score(ln);
    };

    std::sort(candidates.begin(), candidates.end(), [](const RidgeLine& x, const RidgeLine& y) {
        if (x.support != y.support) return x.support > y.support;
        if (x.mean_survival != y.mean_survival) return x.mean_survival > y.mean_survival;
        if (x.slope != y.slope) return x.slope < y.slope;
        return x.intercept < y.intercept;
    });

    std::vector<RidgeLine> lines;
    const double lo = map.tau_grid.front(), hi = map.tau_grid.back();
    for (RidgeLine c : candidates) {
        refit(c);
        if (c.support < std::max<int>(3, static_cast<int>(std::ceil(0.6 * static_cast<double>(nt))))) continue;
        bool fresh = true;
        for (const auto& l : lines) {
            const double sep = std::max(std::abs(c.phi_at(lo) - l.phi_at(lo)),
                                        std::abs(c.phi_at(hi) - l.phi_at(hi)));
            if (sep < 2.0 * radius) fresh = false;
        }
        if (fresh) lines.push_back(c);
    }
    (void)tau_span;
    return lines;
}

} // namespace detail

/// Locates crossings of extracted ridge lines in the phi-tau plane: candidate
/// degeneracy points where two trapping conditions hold at once. Peaks are
/// found per tau column with a prominence filter; merge_radius (in grid
/// cells) is the association radius of the line fit.
inline std::vector<DegeneracyPoint> find_degeneracy_points(const StabilityMap& map,
                                                           double merge_radius = 2.0,
                                                           double prominence = 0.01) {
    const std::size_t nt = map.tau_grid.size();
    const std::size_t np = map.phi_grid.size();
    if (nt < 2 || np < 3) return {};
    const double cell =
        (map.phi_grid.back() - map.phi_grid.front()) / static_cast<double>(np - 1);
    const double radius = merge_radius * cell;

    std::vector<detail::RidgeLine> lines = detail::extract_ridge_lines(map, radius, prominence);

    auto survival_near = [&](double phi, double tau) -> double {
        std::size_t bp = 0, bt = 0;
        for (std::size_t i = 1; i < np; ++i)
            if (std::abs(map.phi_grid[i] - phi) < std::abs(map.phi_grid[bp] - phi)) bp = i;
        for (std::size_t i = 1; i < nt; ++i)
            if (std::abs(map.tau_grid[i] - tau) < std::abs(map.tau_grid[bt] - tau)) bt = i;
        const double v = map.survival[bt][bp];
        return std::isnan(v) ? 0.0 : v;
    };

    std::vector<DegeneracyPoint> found;
    for (std::size_t a = 0; a < lines.size(); ++a) {
        for (std::size_t b = a + 1; b < lines.size(); ++b) {
            const double ds = lines[a].slope - lines[b].slope;
            if (std::abs(ds) * (map.tau_grid.back() - map.tau_grid.front()) < 1.5 * radius)
                continue; // effectively parallel inside the window
            const double tau = (lines[b].intercept - lines[a].intercept) / ds;
            if (tau < map.tau_grid.front() - 1e-9 || tau > map.tau_grid.back() + 1e-9) continue;
            const double phi = lines[a].phi_at(tau);
            if (phi < map.phi_grid.front() - 0.5 * cell || phi > map.phi_grid.back() + 0.5 * cell)
                continue;
            const double surv = survival_near(phi, tau);
            if (surv <= prominence) continue;
            bool dup = false;
            for (const auto& f : found)
                if (std::abs(f.phi - phi) < 2.0 * radius && std::abs(f.tau - tau) < 2.0 * radius)
                    dup = true;
            if (!dup) found.push_back({phi, tau, surv});
        }
    }
    std::sort(found.begin(), found.end(), [](const DegeneracyPoint& x, const DegeneracyPoint& y) {
        if (x.survival != y.survival) return x.survival > y.survival;
        return x.tau < y.tau;
    });
    return found;
}

/// Re-simulates candidate degeneracy points with a long run and keeps those
/// whose steady state classifies as oscillating_trapped. tau is snapped to
/// the base config's step; horizon_periods sets the run length in units of
/// the expected beat period.
inline std::vector<DegeneracyPoint> verify_degeneracy_points(
    const SimulationConfig& base, const std::vector<DegeneracyPoint>& candidates,
    double horizon = 600.0) {
    std::vector<DegeneracyPoint> confirmed;
    for (const auto& p : candidates) {
        SimulationConfig cfg = base;
        cfg.delay_tau = cfg.dt * std::llround(p.tau / cfg.dt);
        cfg.feedback_phase = std::fmod(p.phi, 2.0 * M_PI);
        if (cfg.feedback_phase < 0.0) cfg.feedback_phase += 2.0 * M_PI;
        cfg.feedback_enabled = true;
        cfg.n_steps = std::max<long>(1, static_cast<long>(std::llround(horizon / cfg.dt)));
        try {
            Trajectory traj = run(cfg, {cfg.n_sites});
            TrappingVerdict v = classify_steady_state(traj, 0.30);
            if (v.cls == SteadyStateClass::oscillating_trapped) confirmed.push_back(p);
        } catch (const std::exception&) {
            // unconverged or capacity-limited candidates are simply dropped
        }
    }
    return confirmed;
}

} // namespace fbmps
