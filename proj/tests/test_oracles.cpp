#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fbmps/evolution.hpp"
#include "fbmps/oracles.hpp"

using namespace fbmps;

TEST_CASE("lindblad: single emitter decays as exp(-gamma t)") {
    SimulationConfig cfg;
    cfg.n_sites = 1;
    cfg.coupling_j = 0.0;
    cfg.decay_gamma = 0.24;
    cfg.dt = 0.05;
    std::vector<double> grid;
    for (int i = 1; i <= 40; ++i) grid.push_back(0.5 * i);
    auto dens = lindblad_run(cfg, {1}, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(std::abs(dens[i][0] - std::exp(-cfg.decay_gamma * grid[i])) < 1e-8);
}

TEST_CASE("lindblad: trace preserved, densities bounded, full decay for N=4") {
    SimulationConfig cfg;
    cfg.n_sites = 4;
    cfg.coupling_j = 0.1;
    cfg.decay_gamma = 0.24;
    cfg.dt = 0.2;
    std::vector<double> grid;
    const double t_end = 40.0 / cfg.decay_gamma;
    for (int i = 1; i <= 50; ++i) grid.push_back(t_end * i / 50.0);
    DensityMatrix rho;
    auto dens = lindblad_run(cfg, {4}, grid, &rho);
    rho.validate();
    CHECK(std::abs(rho.trace_real() - 1.0) < 1e-8);
    for (const auto& row : dens)
        for (double v : row) {
            CHECK(v >= -1e-9);
            CHECK(v <= 1.0 + 1e-9);
        }
    // everything dissipates; the slowest mode (boundary weight 1/4, overdamped
    // at J << gamma) still carries a few 1e-3 at T = 40/gamma
    for (double v : dens.back()) CHECK(v < 5e-3);
}

TEST_CASE("lindblad: unitary limit keeps the state pure") {
    SimulationConfig cfg;
    cfg.n_sites = 3;
    cfg.coupling_j = 0.2;
    cfg.decay_gamma = 0.0;
    cfg.dt = 0.05;
    DensityMatrix rho;
    lindblad_run(cfg, {2}, {8.0}, &rho);
    const double purity = (rho.data * rho.data).trace().real();
    CHECK(std::abs(purity - 1.0) < 1e-8);
}

TEST_CASE("lindblad: capacity guard for N > 8") {
    SimulationConfig cfg;
    cfg.n_sites = 9;
    CHECK_THROWS_AS(lindblad_run(cfg, {1}, {1.0}), capacity_error);
}

TEST_CASE("delay oracle: no return within the grid gives exp(-gamma t)") {
    const double gamma = 0.24;
    std::vector<double> grid;
    for (int i = 1; i <= 30; ++i) grid.push_back(0.4 * i);
    auto pop = single_emitter_delay_run(gamma, 100.0, 0.0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(std::abs(pop[i] - std::exp(-gamma * grid[i])) < 1e-9);
}

TEST_CASE("delay oracle: phase pi accelerates the decay") {
    const double gamma = 0.24, tau = 1.0 / 0.24 / 4.0; // gamma tau = 0.25
    std::vector<double> grid;
    for (int i = 1; i <= 40; ++i) grid.push_back(0.5 * i);
    auto anti = single_emitter_delay_run(gamma, tau, M_PI, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double free = std::exp(-gamma * grid[i]);
        if (grid[i] > 2.0 * tau) CHECK(anti[i] < free);
    }
}

TEST_CASE("delay oracle: trapping only at phase 0 mod 2pi") {
    const double gamma = 0.24, tau = 1.0 / 0.24; // gamma tau = 1
    std::vector<double> grid = {60.0 / gamma};
    auto trapped = single_emitter_delay_run(gamma, tau, 0.0, grid);
    // steady amplitude 1/(1 + gamma tau / 2) for the matched phase
    CHECK(trapped[0] == doctest::Approx(std::pow(1.0 / 1.5, 2)).epsilon(0.02));
    auto recycled = single_emitter_delay_run(gamma, tau, 2.0 * M_PI, grid);
    CHECK(recycled[0] == doctest::Approx(trapped[0]).epsilon(1e-6));
    for (double phi : {0.8, 2.0, 3.5, 5.0}) {
        auto lost = single_emitter_delay_run(gamma, tau, phi, grid);
        CHECK(lost[0] < 0.01);
    }
}

TEST_CASE("delay oracle: continuous across multiples of tau") {
    const double gamma = 0.3, tau = 2.0;
    for (double t0 : {tau, 2.0 * tau, 3.0 * tau}) {
        std::vector<double> grid = {t0 - 1e-6, t0 + 1e-6};
        auto pop = single_emitter_delay_run(gamma, tau, 1.3, grid);
        CHECK(std::abs(pop[1] - pop[0]) < 1e-5);
    }
}

TEST_CASE("delay oracle: tau = 0 closed form") {
    const double gamma = 0.5;
    std::vector<double> grid = {1.0, 2.0};
    auto pop = single_emitter_delay_run(gamma, 0.0, 0.0, grid);
    CHECK(pop[0] == doctest::Approx(1.0).epsilon(1e-12)); // perfect re-feed
    auto pop2 = single_emitter_delay_run(gamma, 0.0, M_PI, grid);
    CHECK(pop2[0] == doctest::Approx(std::exp(-2.0 * gamma * 1.0)).epsilon(1e-10));
}

TEST_CASE("cross-check: MPS against the Lindblad oracle without feedback") {
    SimulationConfig cfg;
    cfg.n_sites = 2;
    cfg.coupling_j = 0.1;
    cfg.decay_gamma = 0.24;
    cfg.dt = 1.0 / 24.0;
    cfg.n_steps = 480; // T = 20
    cfg.svd_cutoff = 1e-12;
    cfg.max_bond = 64;
    cfg.feedback_enabled = false;
    Trajectory traj = run(cfg, {2});
    auto oracle = lindblad_run(cfg, {2}, traj.times);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        for (std::size_t s = 0; s < 2; ++s)
            max_dev = std::max(max_dev, std::abs(traj.site_densities[i][s] - oracle[i][s]));
    CHECK(max_dev < 1e-3);
}

TEST_CASE("cross-check: MPS against the delay oracle with feedback") {
    SimulationConfig cfg;
    cfg.n_sites = 1;
    cfg.coupling_j = 0.0;
    cfg.decay_gamma = 0.24;
    cfg.dt = 1.0 / 24.0;
    cfg.delay_tau = 50.0 * cfg.dt; // gamma tau = 0.5
    cfg.n_steps = 600;             // T = 25
    cfg.svd_cutoff = 1e-12;
    cfg.max_bond = 64;
    cfg.feedback_enabled = true;

    for (double phi : {0.0, M_PI / 2.0, M_PI}) {
        cfg.feedback_phase = phi;
        Trajectory traj = run(cfg, {1});
        auto oracle = single_emitter_delay_run(cfg.decay_gamma, cfg.delay_tau, phi, traj.times);
        double max_dev = 0.0;
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            max_dev = std::max(max_dev, std::abs(traj.site_densities[i][0] - oracle[i]));
        CAPTURE(phi);
        CHECK(max_dev < 1e-3);
    }
}
