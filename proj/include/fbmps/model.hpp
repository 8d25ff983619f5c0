#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "fbmps/config.hpp"
#include "fbmps/errors.hpp"
#include "fbmps/linalg.hpp"
#include "fbmps/tensor.hpp"

namespace fbmps {

// Spin site basis: index 0 = ground (down), 1 = excited (up).
inline ComplexTensor pauli_x() {
    ComplexTensor m = ComplexTensor::matrix(2, 2);
    m.at({0, 1}) = 1.0;
    m.at({1, 0}) = 1.0;
    return m;
}

inline ComplexTensor pauli_y() {
    ComplexTensor m = ComplexTensor::matrix(2, 2);
    m.at({0, 1}) = cplx(0.0, -1.0);
    m.at({1, 0}) = cplx(0.0, 1.0);
    return m;
}

inline ComplexTensor pauli_z() {
    ComplexTensor m = ComplexTensor::matrix(2, 2);
    m.at({0, 0}) = -1.0;
    m.at({1, 1}) = 1.0;
    return m;
}

inline ComplexTensor sigma_plus() {
    ComplexTensor m = ComplexTensor::matrix(2, 2);
    m.at({1, 0}) = 1.0;
    return m;
}

inline ComplexTensor sigma_minus() {
    ComplexTensor m = ComplexTensor::matrix(2, 2);
    m.at({0, 1}) = 1.0;
    return m;
}

/// Excited-level projector sigma^+ sigma^-.
inline ComplexTensor excited_projector() {
    ComplexTensor m = ComplexTensor::matrix(2, 2);
    m.at({1, 1}) = 1.0;
    return m;
}

/// Time-bin noise-increment operators on the truncated Fock space.
///
/// <i-1| annihilate |i> = sqrt(i*dt), so [annihilate, create] = dt * 1 below
/// the truncation level and number = create*annihilate/dt = diag(0,1,...).
struct BinOperators {
    ComplexTensor annihilate;
    ComplexTensor create;
    ComplexTensor number;
    int dim = 0;
    double dt = 0.0;
};

inline BinOperators build_bin_operators(double dt, int bin_dim) {
    if (bin_dim < 2) throw validation_error("build_bin_operators: bin_dim must be >= 2");
    if (dt <= 0.0) throw validation_error("build_bin_operators: dt must be > 0");
    BinOperators ops;
    ops.dim = bin_dim;
    ops.dt = dt;
    const std::size_t d = static_cast<std::size_t>(bin_dim);
    ops.annihilate = ComplexTensor::matrix(d, d);
    for (std::size_t i = 1; i < d; ++i)
        ops.annihilate.at({i - 1, i}) = std::sqrt(static_cast<double>(i) * dt);
    ops.create = ops.annihilate.adjoint();
    ops.number = ComplexTensor::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) ops.number.at({i, i}) = static_cast<double>(i);
    return ops;
}

/// Dimensionless photon-number operator for a bin (diag 0..d-1).
inline ComplexTensor bin_number_operator(int bin_dim) {
    const std::size_t d = static_cast<std::size_t>(bin_dim);
    ComplexTensor n = ComplexTensor::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) n.at({i, i}) = static_cast<double>(i);
    return n;
}

/// The small dense unitaries of one Trotter step.
///
/// chain_bond_half_gates realize exp(-i (dt/2) J (xx+yy+zz)) per bond and are
/// applied twice per step (symmetric splitting). The feedback gate acts on
/// (delayed bin, site N, current bin); the emission gate on (site N, current
/// bin) and is used when feedback is disabled.
struct GateSet {
    std::vector<ComplexTensor> chain_bond_half_gates;
    ComplexTensor feedback_gate;
    ComplexTensor emission_gate;
};

/// Heisenberg bond Hamiltonian J (xx + yy + zz) as a 4x4 matrix.
inline ComplexTensor heisenberg_bond(double j) {
    ComplexTensor h = kron(pauli_x(), pauli_x());
    h += kron(pauli_y(), pauli_y());
    h += kron(pauli_z(), pauli_z());
    h *= cplx(j, 0.0);
    return h;
}

/// N-1 identical bond gates at half the time step.
inline std::vector<ComplexTensor> build_chain_gates(const SimulationConfig& cfg) {
    std::vector<ComplexTensor> gates;
    if (cfg.n_sites < 2) return gates;
    ComplexTensor h = heisenberg_bond(cfg.coupling_j);
    h *= cplx(0.0, -0.5 * cfg.dt);
    ComplexTensor g = matrix_exponential(h);
    gates.assign(static_cast<std::size_t>(cfg.n_sites - 1), g);
    return gates;
}

/// Interaction with the current bin only: exp(sqrt(G)(s+ B - s- B†)).
///
/// The amplitude is calibrated so the induced per-step population decay is
/// gamma*dt, i.e. the no-feedback run reproduces a Lindblad decay at rate
/// gamma. Axis order (site N, current bin).
inline ComplexTensor build_emission_gate_at_rate(double rate, const BinOperators& bins) {
    const double amp = std::sqrt(rate);
    ComplexTensor a = kron(sigma_plus(), bins.annihilate);
    a *= cplx(amp, 0.0);
    ComplexTensor k = a - a.adjoint();
    return matrix_exponential(k);
}

inline ComplexTensor build_emission_gate(const SimulationConfig& cfg, const BinOperators& bins) {
    return build_emission_gate_at_rate(cfg.decay_gamma, bins);
}

/// Three-body feedback block on (delayed bin, site N, current bin):
/// exp(K), K = sqrt(G/2)[(B_cur - e^{i phi} B_fb) s+ - h.c.].
///
/// Each of the two bin channels carries rate gamma/2, so the pre-return decay
/// matches the no-feedback rate gamma and the single-emitter limit obeys
/// cdot = -(gamma/2) c + (gamma/2) e^{i phi} c(t - tau).
inline ComplexTensor build_feedback_gate(const SimulationConfig& cfg, const BinOperators& bins) {
    const std::size_t d = static_cast<std::size_t>(bins.dim);
    const double amp = std::sqrt(cfg.decay_gamma / 2.0);
    const cplx phase = std::exp(cplx(0.0, cfg.feedback_phase));
    ComplexTensor id_bin = ComplexTensor::identity(d);

    ComplexTensor cur = kron(id_bin, kron(sigma_plus(), bins.annihilate));
    ComplexTensor fb = kron(bins.annihilate, kron(sigma_plus(), id_bin));
    ComplexTensor a = cur;
    a += cplx(-1.0, 0.0) * phase * fb;
    a *= cplx(amp, 0.0);
    ComplexTensor k = a - a.adjoint();
    return matrix_exponential(k);
}

inline GateSet build_gate_set(const SimulationConfig& cfg) {
    GateSet g;
    BinOperators bins = build_bin_operators(cfg.dt, cfg.bin_dim);
    g.chain_bond_half_gates = build_chain_gates(cfg);
    g.emission_gate = build_emission_gate(cfg, bins);
    if (cfg.feedback_enabled) g.feedback_gate = build_feedback_gate(cfg, bins);
    return g;
}

} // namespace fbmps
