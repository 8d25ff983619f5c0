#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fbmps/config.hpp"
#include "fbmps/model.hpp"
#include "support/dense_oracle.hpp"
#include "support/test_helpers.hpp"

using namespace fbmps;
using fbmps::testing::DenseState;

namespace {

double unitarity_defect(const ComplexTensor& g) {
    ComplexTensor p = matmul(g.adjoint(), g);
    double m = 0.0;
    const std::size_t n = p.extent(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m = std::max(m, std::abs(p.at({i, j}) - (i == j ? cplx(1, 0) : cplx(0, 0))));
    return m;
}

double max_abs(const ComplexTensor& t) { return t.max_abs(); }

SimulationConfig base_cfg() {
    SimulationConfig cfg;
    cfg.n_sites = 4;
    cfg.coupling_j = 0.1;
    cfg.decay_gamma = 0.24;
    cfg.dt = 0.05;
    cfg.delay_tau = 0.5;
    cfg.feedback_phase = 0.7;
    cfg.bin_dim = 2;
    cfg.n_steps = 10;
    cfg.feedback_enabled = true;
    return cfg;
}

} // namespace

TEST_CASE("config: parse, defaults, comments, unknown keys") {
    std::istringstream good(
        "# comment line\n"
        "n_sites = 3\n"
        "coupling_j = 0.2   # inline comment\n"
        "decay_gamma = 0.1\n"
        "dt = 0.05\n"
        "delay_tau = 0.25\n"
        "feedback_enabled = true\n");
    SimulationConfig cfg = parse_config(good);
    CHECK(cfg.n_sites == 3);
    CHECK(cfg.coupling_j == doctest::Approx(0.2));
    CHECK(cfg.feedback_enabled);
    CHECK(delay_steps(cfg) == 5);

    std::istringstream bad("n_sites = 3\nn_step = 7\n");
    try {
        parse_config(bad);
        FAIL("unknown key accepted");
    } catch (const config_error& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
    }
    std::istringstream junk("dt = fast\n");
    CHECK_THROWS_AS(parse_config(junk), config_error);
}

TEST_CASE("config: validation rules") {
    SimulationConfig cfg = base_cfg();
    CHECK(validate(cfg).empty());

    SimulationConfig off = cfg;
    off.delay_tau = 0.07; // not a multiple of 0.05
    CHECK_THROWS_AS(validate(off), config_error);

    SimulationConfig warn = cfg;
    warn.dt = 0.5;
    warn.delay_tau = 1.0;
    CHECK(validate(warn).size() == 1); // gamma*dt = 0.12 -> warn

    SimulationConfig fatal = cfg;
    fatal.dt = 2.5;
    fatal.delay_tau = 5.0;
    CHECK_THROWS_AS(validate(fatal), config_error); // gamma*dt > 0.5

    SimulationConfig fb0 = cfg;
    fb0.delay_tau = 0.0;
    CHECK_THROWS_AS(validate(fb0), config_error); // feedback needs tau >= dt

    SimulationConfig bd = cfg;
    bd.bin_dim = 1;
    CHECK_THROWS_AS(validate(bd), config_error);
}

TEST_CASE("bin operators: matrix elements, number operator, commutator") {
    const double dt = 0.05;
    BinOperators b2 = build_bin_operators(dt, 2);
    CHECK(std::abs(b2.annihilate.at({0, 1}) - cplx(std::sqrt(dt), 0)) < 1e-15);
    CHECK(max_abs(b2.annihilate - b2.create.adjoint()) == 0.0);

    BinOperators b3 = build_bin_operators(dt, 3);
    CHECK(std::abs(b3.annihilate.at({1, 2}) - cplx(std::sqrt(2.0 * dt), 0)) < 1e-15);
    // number = create*annihilate/dt = diag(0,1,2)
    ComplexTensor n = matmul(b3.create, b3.annihilate);
    n *= cplx(1.0 / dt, 0.0);
    CHECK(max_abs(n - b3.number) < 1e-13);

    BinOperators b4 = build_bin_operators(dt, 4);
    ComplexTensor comm =
        matmul(b4.annihilate, b4.create) - matmul(b4.create, b4.annihilate);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(comm.at({i, i}) - cplx(dt, 0)) < 1e-14); // levels 0..2
    CHECK(std::abs(comm.at({3, 3}) + 3.0 * dt) < 1e-14);        // truncation artifact

    CHECK_THROWS_AS(build_bin_operators(dt, 1), validation_error);
}

TEST_CASE("chain gates: J=0 gives the identity") {
    SimulationConfig cfg = base_cfg();
    cfg.coupling_j = 0.0;
    auto gates = build_chain_gates(cfg);
    REQUIRE(gates.size() == 3);
    for (const auto& g : gates)
        CHECK(max_abs(g - ComplexTensor::identity(4)) < 1e-15);
}

TEST_CASE("chain gates: half-step series expansion at small J dt") {
    SimulationConfig cfg = base_cfg();
    cfg.coupling_j = 0.2;
    cfg.dt = 0.05; // J dt = 0.01
    auto gates = build_chain_gates(cfg);
    ComplexTensor h = heisenberg_bond(cfg.coupling_j);
    ComplexTensor series = ComplexTensor::identity(4);
    series += cplx(0.0, -0.5 * cfg.dt) * h;
    const double jdt = cfg.coupling_j * cfg.dt;
    CHECK(max_abs(gates[0] - series) < 2.0 * jdt * jdt);
}

TEST_CASE("all gates are unitary to 1e-12") {
    SimulationConfig cfg = base_cfg();
    cfg.bin_dim = 3;
    GateSet g = build_gate_set(cfg);
    for (const auto& cg : g.chain_bond_half_gates) CHECK(unitarity_defect(cg) < 1e-12);
    CHECK(unitarity_defect(g.emission_gate) < 1e-12);
    CHECK(unitarity_defect(g.feedback_gate) < 1e-12);
}

TEST_CASE("feedback gate: gamma = 0 gives the identity") {
    SimulationConfig cfg = base_cfg();
    cfg.decay_gamma = 0.0;
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    ComplexTensor g = build_feedback_gate(cfg, bins);
    CHECK(max_abs(g - ComplexTensor::identity(8)) < 1e-15);
    ComplexTensor e = build_emission_gate(cfg, bins);
    CHECK(max_abs(e - ComplexTensor::identity(4)) < 1e-15);
}

TEST_CASE("feedback gate: 2pi phase periodicity to 1e-14") {
    SimulationConfig cfg = base_cfg();
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    ComplexTensor a = build_feedback_gate(cfg, bins);
    cfg.feedback_phase += 2.0 * M_PI;
    ComplexTensor b = build_feedback_gate(cfg, bins);
    CHECK(max_abs(a - b) < 1e-14);
}

TEST_CASE("feedback gate: one application drains an excited site at rate gamma") {
    // both bins in vacuum: the two channels together carry gamma, so the
    // density after one gate is 1 - gamma*dt + O((gamma*dt)^2)
    SimulationConfig cfg = base_cfg();
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    ComplexTensor g = build_feedback_gate(cfg, bins);
    DenseState s = DenseState::product({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}}); // (fb, spin, cur)
    s.apply_gate(g, {0, 1, 2});
    const double density = s.expect_local(excited_projector(), 1).real();
    const double gdt = cfg.decay_gamma * cfg.dt;
    CHECK(std::abs(density - (1.0 - gdt)) < gdt * gdt);
    // exact value: cos^2(sqrt(gamma dt)) from the two-channel rotation
    CHECK(density == doctest::Approx(std::pow(std::cos(std::sqrt(gdt)), 2)).epsilon(1e-12));
}

TEST_CASE("feedback gate with the delayed channel removed reduces to emission at rate gamma/2") {
    SimulationConfig cfg = base_cfg();
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    const std::size_t d = static_cast<std::size_t>(cfg.bin_dim);

    // production generator minus its delayed-bin part, rebuilt here
    ComplexTensor cur = kron(ComplexTensor::identity(d), kron(sigma_plus(), bins.annihilate));
    cur *= cplx(std::sqrt(cfg.decay_gamma / 2.0), 0.0);
    ComplexTensor k = cur - cur.adjoint();
    ComplexTensor zeroed = matrix_exponential(k);

    ComplexTensor reduced = kron(ComplexTensor::identity(d),
                                 build_emission_gate_at_rate(cfg.decay_gamma / 2.0, bins));
    CHECK(max_abs(zeroed - reduced) < 1e-12);
}

TEST_CASE("emission gate: bin occupation gain is gamma*dt to second order") {
    SimulationConfig cfg = base_cfg();
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    ComplexTensor g = build_emission_gate(cfg, bins);
    DenseState s = DenseState::product({{0.0, 1.0}, {1.0, 0.0}}); // (spin, cur)
    s.apply_gate(g, {0, 1});
    const double gain = s.expect_local(bin_number_operator(cfg.bin_dim), 1).real();
    const double gdt = cfg.decay_gamma * cfg.dt;
    CHECK(std::abs(gain - gdt) < gdt * gdt);
    const double site = s.expect_local(excited_projector(), 0).real();
    CHECK(site == doctest::Approx(std::pow(std::cos(std::sqrt(gdt)), 2)).epsilon(1e-12));
}

TEST_CASE("generator symmetries: excitation conservation") {
    SimulationConfig cfg = base_cfg();
    cfg.bin_dim = 3;
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    const std::size_t d = static_cast<std::size_t>(cfg.bin_dim);
    ComplexTensor id_bin = ComplexTensor::identity(d);
    ComplexTensor id_spin = ComplexTensor::identity(2);

    // rebuild K exactly as the gate does
    ComplexTensor cur = kron(id_bin, kron(sigma_plus(), bins.annihilate));
    ComplexTensor fb = kron(bins.annihilate, kron(sigma_plus(), id_bin));
    ComplexTensor a = cur;
    a += cplx(-1.0, 0.0) * std::exp(cplx(0.0, cfg.feedback_phase)) * fb;
    a *= cplx(std::sqrt(cfg.decay_gamma / 2.0), 0.0);
    ComplexTensor k = a - a.adjoint();

    // bins.number is already the dimensionless count diag(0..d-1)
    ComplexTensor n_tot = kron(bins.number, kron(id_spin, id_bin));
    n_tot += kron(id_bin, kron(excited_projector(), id_bin));
    n_tot += kron(id_bin, kron(id_spin, bins.number));

    ComplexTensor comm = matmul(k, n_tot) - matmul(n_tot, k);
    CHECK(max_abs(comm) < 1e-12);

    // chain bond Hamiltonian commutes with total sigma_z
    ComplexTensor h = heisenberg_bond(cfg.coupling_j);
    ComplexTensor sz_tot = kron(pauli_z(), id_spin) + kron(id_spin, pauli_z());
    ComplexTensor comm2 = matmul(h, sz_tot) - matmul(sz_tot, h);
    CHECK(max_abs(comm2) < 1e-12);
}
