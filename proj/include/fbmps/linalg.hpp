#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#ifdef FBMPS_USE_LAPACK
#include <complex>
#define lapack_complex_double std::complex<double>
#define lapack_complex_float std::complex<float>
#include <lapacke.h>
#endif

#include "fbmps/errors.hpp"
#include "fbmps/tensor.hpp"

namespace fbmps {

/// Truncated singular value decomposition m ≈ left · diag(s) · right.
///
/// left has orthonormal columns, right has orthonormal rows, and
/// discarded_weight is the squared Frobenius norm of what was dropped.
struct SvdResult {
    ComplexTensor left_isometry;        // (rows × kept)
    std::vector<double> singular_values; // descending, ≥ 0
    ComplexTensor right_isometry;       // (kept × cols)
    double discarded_weight = 0.0;
};

/// SVD with relative-cutoff truncation.
///
/// Keeps singular values σ_i > cutoff·σ_max, at most max_bond of them and
/// always at least one, so deep truncation can never annihilate the state.
inline SvdResult truncated_svd(const ComplexTensor& m, double cutoff, std::size_t max_bond) {
    if (m.rank() != 2) throw dimension_error("truncated_svd: input must be rank-2");
    if (cutoff < 0.0) throw validation_error("truncated_svd: cutoff must be >= 0");
    if (max_bond < 1) throw validation_error("truncated_svd: max_bond must be >= 1");
    m.require_finite("truncated_svd");

    const std::size_t rows = m.extent(0), cols = m.extent(1);
    const double total_weight = m.squared_norm();
    const std::size_t full = std::min(rows, cols);

    std::vector<double> sv;
    MatrixXc full_u, full_vt;
    bool decomposed = false;

#ifdef FBMPS_USE_LAPACK
    {
        std::vector<cplx> a = m.data(); // zgesdd destroys its input
        sv.assign(full, 0.0);
        full_u = MatrixXc(rows, full);
        full_vt = MatrixXc(full, cols);
        const lapack_int info = LAPACKE_zgesdd(
            LAPACK_ROW_MAJOR, 'S', static_cast<lapack_int>(rows), static_cast<lapack_int>(cols),
            a.data(), static_cast<lapack_int>(cols), sv.data(), full_u.data(),
            static_cast<lapack_int>(full), full_vt.data(), static_cast<lapack_int>(cols));
        decomposed = (info == 0);
    }
#endif
    if (!decomposed) {
        Eigen::JacobiSVD<MatrixXc> svd(m.matrix_view(),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
        sv.assign(full, 0.0);
        for (std::size_t i = 0; i < full; ++i) sv[i] = svd.singularValues()(static_cast<Eigen::Index>(i));
        full_u = svd.matrixU();
        full_vt = svd.matrixV().adjoint();
    }
    const double sigma_max = full > 0 ? sv[0] : 0.0;

    std::size_t keep = 0;
    for (std::size_t i = 0; i < full && keep < max_bond; ++i) {
        if (sv[i] > cutoff * sigma_max) ++keep;
        else break;
    }
    if (keep == 0) keep = 1;

    SvdResult out;
    out.singular_values.resize(keep);
    double kept_weight = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        out.singular_values[i] = sv[i];
        kept_weight += out.singular_values[i] * out.singular_values[i];
    }
    out.discarded_weight = std::max(0.0, total_weight - kept_weight);

    out.left_isometry = ComplexTensor({rows, keep});
    out.right_isometry = ComplexTensor({keep, cols});
    auto lv = out.left_isometry.matrix_view();
    auto rv = out.right_isometry.matrix_view();
    lv = full_u.leftCols(static_cast<Eigen::Index>(keep));
    rv = full_vt.topRows(static_cast<Eigen::Index>(keep));

    // A zero block can leave Jacobi with degenerate directions; re-orthonormalize
    // any zero singular columns against the kept ones so the isometry contracts hold.
    for (std::size_t j = 0; j < keep; ++j) {
        if (out.singular_values[j] > 0.0) continue;
        Eigen::VectorXcd ucol = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(rows));
        Eigen::VectorXcd vrow = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(cols));
        for (std::size_t basis = 0; basis < rows; ++basis) {
            Eigen::VectorXcd cand = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(rows));
            cand(static_cast<Eigen::Index>(basis)) = 1.0;
            for (std::size_t i = 0; i < j; ++i)
                cand -= lv.col(static_cast<Eigen::Index>(i)).dot(cand) * lv.col(static_cast<Eigen::Index>(i));
            if (cand.norm() > 0.5) { ucol = cand.normalized(); break; }
        }
        for (std::size_t basis = 0; basis < cols; ++basis) {
            Eigen::VectorXcd cand = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(cols));
            cand(static_cast<Eigen::Index>(basis)) = 1.0;
            for (std::size_t i = 0; i < j; ++i)
                cand -= rv.row(static_cast<Eigen::Index>(i)).transpose().conjugate().dot(cand) *
                        rv.row(static_cast<Eigen::Index>(i)).transpose().conjugate();
            if (cand.norm() > 0.5) { vrow = cand.normalized(); break; }
        }
        lv.col(static_cast<Eigen::Index>(j)) = ucol;
        rv.row(static_cast<Eigen::Index>(j)) = vrow.adjoint();
    }
    return out;
}

/// Matrix exponential by scaling-and-squaring with a Taylor core.
///
/// Accurate to ~1e-14 relative for the modest norms used here (‖m‖ ≲ 1).
inline ComplexTensor matrix_exponential(const ComplexTensor& m) {
    if (m.rank() != 2 || m.extent(0) != m.extent(1))
        throw dimension_error("matrix_exponential: input must be square rank-2");
    m.require_finite("matrix_exponential");

    const std::size_t n = m.extent(0);
    MatrixXc a = m.matrix_view();

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
        a /= std::pow(2.0, squarings);
    }

    MatrixXc result = MatrixXc::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    MatrixXc term = result;
    for (int k = 1; k <= 40; ++k) {
        term = (term * a) / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return ComplexTensor::from_eigen(result);
}

} // namespace fbmps
