#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "fbmps/config.hpp"
#include "fbmps/errors.hpp"
#include "fbmps/model.hpp"
#include "fbmps/tensor.hpp"

namespace fbmps {

/// Dense density matrix over the 2^N chain space.
struct DensityMatrix {
    std::size_t dim = 0;
    MatrixXc data;

    double trace_real() const { return data.trace().real(); }

    /// Hermiticity / unit trace / positivity (up to tolerance) checks.
    void validate() const {
        if ((data - data.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw numeric_error("DensityMatrix: not Hermitian");
        if (std::abs(data.trace() - cplx(1.0, 0.0)) > 1e-10)
            throw numeric_error("DensityMatrix: trace differs from 1");
        Eigen::SelfAdjointEigenSolver<MatrixXc> es(0.5 * (data + data.adjoint()));
        if (es.eigenvalues().minCoeff() < -1e-9)
            throw numeric_error("DensityMatrix: negative eigenvalue");
    }
};

namespace dense {

/// op embedded at chain site `site` (1-based) of an N-site register,
/// site 1 being the most significant factor.
inline MatrixXc embed(const MatrixXc& op, int site, int n_sites) {
    MatrixXc out = MatrixXc::Identity(1, 1);
    for (int s = 1; s <= n_sites; ++s) {
        const MatrixXc& factor =
            (s == site) ? op : MatrixXc(MatrixXc::Identity(2, 2));
        MatrixXc next(out.rows() * factor.rows(), out.cols() * factor.cols());
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            for (Eigen::Index j = 0; j < out.cols(); ++j)
                next.block(i * factor.rows(), j * factor.cols(), factor.rows(), factor.cols()) =
                    out(i, j) * factor;
        out = std::move(next);
    }
    return out;
}

inline MatrixXc to_eigen(const ComplexTensor& t) { return t.matrix_view(); }

/// Rotating-frame chain Hamiltonian J sum_i (xx + yy + zz).
inline MatrixXc chain_hamiltonian(double j, int n_sites) {
    const Eigen::Index dim = Eigen::Index(1) << n_sites;
    MatrixXc h = MatrixXc::Zero(dim, dim);
    const MatrixXc sx = to_eigen(pauli_x()), sy = to_eigen(pauli_y()), sz = to_eigen(pauli_z());
    for (int i = 1; i < n_sites; ++i) {
        h += j * (embed(sx, i, n_sites) * embed(sx, i + 1, n_sites) +
                  embed(sy, i, n_sites) * embed(sy, i + 1, n_sites) +
                  embed(sz, i, n_sites) * embed(sz, i + 1, n_sites));
    }
    return h;
}

inline Eigen::VectorXcd basis_state(const std::vector<int>& pattern, int n_sites) {
    std::size_t idx = 0;
    for (int s = 1; s <= n_sites; ++s) {
        idx <<= 1;
        bool up = false;
        for (int p : pattern) up = up || (p == s);
        if (up) idx |= 1;
    }
    const Eigen::Index dim = Eigen::Index(1) << n_sites;
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    v(static_cast<Eigen::Index>(idx)) = 1.0;
    return v;
}

} // namespace dense

/// Integrates the trace-preserving master equation
///   drho/dt = -i[H_chain, rho] + G (L rho L† - {L†L, rho}/2),  L = sigma^-_N,
/// with fixed-step RK4 at dt/10, and returns the site densities on t_grid.
/// t_grid must be ascending and start at t >= 0.
inline std::vector<std::vector<double>> lindblad_run(const SimulationConfig& cfg,
                                                     const std::vector<int>& pattern,
                                                     const std::vector<double>& t_grid,
                                                     DensityMatrix* final_rho = nullptr) {
    if (cfg.n_sites > 8)
        throw capacity_error("lindblad_run: dense oracle limited to N <= 8");
    const int n = cfg.n_sites;
    const Eigen::Index dim = Eigen::Index(1) << n;

    const MatrixXc h = dense::chain_hamiltonian(cfg.coupling_j, n);
    const MatrixXc lop = dense::embed(dense::to_eigen(sigma_minus()), n, n);
    const MatrixXc ldl = lop.adjoint() * lop;
    const double gamma = cfg.decay_gamma;

    std::vector<MatrixXc> projectors;
    for (int s = 1; s <= n; ++s)
        projectors.push_back(dense::embed(dense::to_eigen(excited_projector()), s, n));

    Eigen::VectorXcd psi0 = dense::basis_state(pattern, n);
    MatrixXc rho = psi0 * psi0.adjoint();

    auto rhs = [&](const MatrixXc& r) -> MatrixXc {
        MatrixXc comm = h * r - r * h;
        MatrixXc diss = lop * r * lop.adjoint() - 0.5 * (ldl * r + r * ldl);
        return cplx(0.0, -1.0) * comm + gamma * diss;
    };

    const double h_target = cfg.dt / 10.0;
    std::vector<std::vector<double>> out;
    out.reserve(t_grid.size());
    double t = 0.0;
    for (double t_next : t_grid) {
        if (t_next < t - 1e-12) throw validation_error("lindblad_run: t_grid must be ascending");
        const double span = t_next - t;
        if (span > 1e-14) {
            const long steps = std::max<long>(1, static_cast<long>(std::ceil(span / h_target)));
            const double hh = span / static_cast<double>(steps);
            for (long s = 0; s < steps; ++s) {
                MatrixXc k1 = rhs(rho);
                MatrixXc k2 = rhs(rho + 0.5 * hh * k1);
                MatrixXc k3 = rhs(rho + 0.5 * hh * k2);
                MatrixXc k4 = rhs(rho + hh * k3);
                rho += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t = t_next;
        }
        std::vector<double> dens(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) dens[static_cast<std::size_t>(s)] =
            (projectors[static_cast<std::size_t>(s)] * rho).trace().real();
        out.push_back(std::move(dens));
    }
    if (final_rho) {
        final_rho->dim = static_cast<std::size_t>(dim);
        final_rho->data = rho;
    }
    return out;
}

/// Closed-chain reference (gamma = 0): site densities under exp(-iHt),
/// evaluated through one eigendecomposition of the chain Hamiltonian.
inline std::vector<std::vector<double>> dense_unitary_densities(const SimulationConfig& cfg,
                                                                const std::vector<int>& pattern,
                                                                const std::vector<double>& t_grid) {
    if (cfg.n_sites > 8)
        throw capacity_error("dense_unitary_densities: dense oracle limited to N <= 8");
    const int n = cfg.n_sites;
    const MatrixXc h = dense::chain_hamiltonian(cfg.coupling_j, n);
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(h);
    const Eigen::VectorXcd psi0 = dense::basis_state(pattern, n);
    const Eigen::VectorXcd coeff = es.eigenvectors().adjoint() * psi0;

    std::vector<MatrixXc> projectors;
    for (int s = 1; s <= n; ++s)
        projectors.push_back(dense::embed(dense::to_eigen(excited_projector()), s, n));

    std::vector<std::vector<double>> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        Eigen::VectorXcd phase(coeff.size());
        for (Eigen::Index i = 0; i < coeff.size(); ++i)
            phase(i) = std::exp(cplx(0.0, -es.eigenvalues()(i) * t)) * coeff(i);
        const Eigen::VectorXcd psi = es.eigenvectors() * phase;
        std::vector<double> dens(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s)
            dens[static_cast<std::size_t>(s)] =
                (psi.adjoint() * projectors[static_cast<std::size_t>(s)] * psi)(0).real();
        out.push_back(std::move(dens));
    }
    return out;
}

/// Piecewise integration of the single-emitter mirror-feedback amplitude
///   cdot(t) = -(G/2) c(t) + (G/2) e^{i phi} c(t - tau) theta(t - tau),
/// returning |c|^2 on t_grid. The no-return limit is exp(-G t); population
/// trapping survives only at phi = 0 mod 2pi.
inline std::vector<double> single_emitter_delay_run(double gamma, double tau, double phi,
                                                    const std::vector<double>& t_grid) {
    if (gamma < 0.0 || tau < 0.0)
        throw validation_error("single_emitter_delay_run: gamma and tau must be >= 0");
    if (t_grid.empty()) return {};
    const double t_end = t_grid.back();
    const cplx fb_coef = 0.5 * gamma * std::exp(cplx(0.0, phi));

    if (tau == 0.0) {
        // degenerate limit: plain linear ODE
        const cplx rate = -0.5 * gamma + fb_coef;
        std::vector<double> out;
        out.reserve(t_grid.size());
        for (double t : t_grid) out.push_back(std::norm(std::exp(rate * t)));
        return out;
    }

    // grid step aligned with the delay so the lagged node is exact
    double h_target = t_end > 0.0 ? t_end / 16000.0 : tau / 50.0;
    if (gamma > 0.0) h_target = std::min(h_target, 0.005 / gamma);
    h_target = std::min(h_target, tau / 64.0);
    const long m = std::max<long>(1, static_cast<long>(std::ceil(tau / h_target)));
    const double h = tau / static_cast<double>(m);
    const long n_nodes = static_cast<long>(std::ceil(t_end / h - 1e-12)) + 2;

    std::vector<cplx> c(static_cast<std::size_t>(n_nodes) + 1), d(c.size());

    auto lagged = [&](double t) -> cplx {
        // cubic Hermite on the stored history (exact at nodes)
        const double td = t - tau;
        if (td < 0.0) return cplx(0.0, 0.0);
        const double x = td / h;
        long j = static_cast<long>(std::floor(x + 1e-12));
        const double u = x - static_cast<double>(j);
        if (u < 1e-12) return c[static_cast<std::size_t>(j)];
        const cplx c0 = c[static_cast<std::size_t>(j)], c1 = c[static_cast<std::size_t>(j) + 1];
        const cplx d0 = d[static_cast<std::size_t>(j)], d1 = d[static_cast<std::size_t>(j) + 1];
        const double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * c0 + (u3 - 2 * u2 + u) * h * d0 +
               (-2 * u3 + 3 * u2) * c1 + (u3 - u2) * h * d1;
    };
    // The derivative jumps at t = tau; steps inside [0, tau] must use the
    // feedback-free right-hand side even when a stage lands exactly on tau,
    // otherwise the kink injects a one-time O(h) error into the trapped value.
    auto rhs_free = [&](cplx v) -> cplx { return -0.5 * gamma * v; };
    auto rhs_full = [&](double t, cplx v) -> cplx { return -0.5 * gamma * v + fb_coef * lagged(t); };

    c[0] = 1.0;
    d[0] = rhs_free(c[0]);
    for (long j = 0; j + 1 < static_cast<long>(c.size()); ++j) {
        const double t = static_cast<double>(j) * h;
        const cplx v = c[static_cast<std::size_t>(j)];
        cplx next;
        if (j + 1 <= m) {
            const cplx k1 = rhs_free(v);
            const cplx k2 = rhs_free(v + 0.5 * h * k1);
            const cplx k3 = rhs_free(v + 0.5 * h * k2);
            const cplx k4 = rhs_free(v + h * k3);
            next = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            const cplx k1 = rhs_full(t, v);
            const cplx k2 = rhs_full(t + 0.5 * h, v + 0.5 * h * k1);
            const cplx k3 = rhs_full(t + 0.5 * h, v + 0.5 * h * k2);
            const cplx k4 = rhs_full(t + h, v + h * k3);
            next = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        c[static_cast<std::size_t>(j) + 1] = next;
        // stored derivatives feed the Hermite interpolation; use the
        // right-limit convention at the kink node itself
        d[static_cast<std::size_t>(j) + 1] =
            (j + 1 < m) ? rhs_free(next) : rhs_full(t + h, next);
    }

    std::vector<double> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        const double x = t / h;
        long j = static_cast<long>(std::floor(x + 1e-12));
        if (j + 1 >= static_cast<long>(c.size())) j = static_cast<long>(c.size()) - 2;
        const double u = x - static_cast<double>(j);
        const cplx c0 = c[static_cast<std::size_t>(j)], c1 = c[static_cast<std::size_t>(j) + 1];
        const cplx d0 = d[static_cast<std::size_t>(j)], d1 = d[static_cast<std::size_t>(j) + 1];
        const double u2 = u * u, u3 = u2 * u;
        const cplx v = (2 * u3 - 3 * u2 + 1) * c0 + (u3 - 2 * u2 + u) * h * d0 +
                       (-2 * u3 + 3 * u2) * c1 + (u3 - u2) * h * d1;
        out.push_back(std::norm(v));
    }
    return out;
}

} // namespace fbmps
