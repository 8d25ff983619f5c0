#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fbmps/errors.hpp"

namespace fbmps {

using cplx = std::complex<double>;

using MatrixXc = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<MatrixXc>;
using ConstMatrixMap = Eigen::Map<const MatrixXc>;

/// Dense complex tensor with a declared row-major linearization.
///
/// The last axis runs fastest; reshapes that keep the element count are pure
/// metadata. This fixed layout is what makes runs bit-reproducible.
class ComplexTensor {
public:
    ComplexTensor() = default;

    explicit ComplexTensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), cplx(0.0, 0.0)) {}

    ComplexTensor(std::vector<std::size_t> shape, std::vector<cplx> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw dimension_error("tensor data length does not match shape");
    }

    static ComplexTensor matrix(std::size_t rows, std::size_t cols) {
        return ComplexTensor({rows, cols});
    }

    static ComplexTensor identity(std::size_t n) {
        ComplexTensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }

    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }

    cplx& operator[](std::size_t i) { return data_[i]; }
    const cplx& operator[](std::size_t i) const { return data_[i]; }

    cplx& at(const std::vector<std::size_t>& idx) { return data_[offset(idx)]; }
    const cplx& at(const std::vector<std::size_t>& idx) const { return data_[offset(idx)]; }

    /// Metadata-only reshape; element count must be preserved.
    ComplexTensor reshaped(std::vector<std::size_t> new_shape) const {
        if (checked_size(new_shape) != data_.size())
            throw dimension_error("reshape changes element count");
        ComplexTensor t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        return t;
    }

    /// Axis permutation; axis i of the result is axis perm[i] of *this.
    ComplexTensor permuted(const std::vector<std::size_t>& perm) const {
        const std::size_t r = rank();
        if (perm.size() != r) throw dimension_error("permutation rank mismatch");
        std::vector<std::size_t> new_shape(r);
        for (std::size_t i = 0; i < r; ++i) new_shape[i] = shape_.at(perm[i]);
        ComplexTensor out(new_shape);
        if (r == 0) {
            out.data_ = data_;
            return out;
        }
        std::vector<std::size_t> old_strides = strides(shape_);
        std::vector<std::size_t> moved(r);
        for (std::size_t i = 0; i < r; ++i) moved[i] = old_strides[perm[i]];
        std::vector<std::size_t> idx(r, 0);
        std::size_t src = 0;
        for (std::size_t flat = 0; flat < out.data_.size(); ++flat) {
            out.data_[flat] = data_[src];
            for (std::size_t ax = r; ax-- > 0;) {
                if (++idx[ax] < new_shape[ax]) {
                    src += moved[ax];
                    break;
                }
                idx[ax] = 0;
                src -= moved[ax] * (new_shape[ax] - 1);
            }
        }
        return out;
    }

    ComplexTensor conjugated() const {
        ComplexTensor t(*this);
        for (auto& v : t.data_) v = std::conj(v);
        return t;
    }

    /// Conjugate transpose of a rank-2 tensor.
    ComplexTensor adjoint() const {
        require_rank2("adjoint");
        ComplexTensor t({shape_[1], shape_[0]});
        for (std::size_t i = 0; i < shape_[0]; ++i)
            for (std::size_t j = 0; j < shape_[1]; ++j)
                t.data_[j * shape_[0] + i] = std::conj(data_[i * shape_[1] + j]);
        return t;
    }

    ComplexTensor& operator*=(cplx alpha) {
        for (auto& v : data_) v *= alpha;
        return *this;
    }

    ComplexTensor& operator+=(const ComplexTensor& other) {
        if (shape_ != other.shape_) throw dimension_error("tensor addition shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    ComplexTensor& operator-=(const ComplexTensor& other) {
        if (shape_ != other.shape_) throw dimension_error("tensor subtraction shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
        return *this;
    }

    friend ComplexTensor operator*(cplx a, ComplexTensor t) { return t *= a; }
    friend ComplexTensor operator+(ComplexTensor a, const ComplexTensor& b) { return a += b; }
    friend ComplexTensor operator-(ComplexTensor a, const ComplexTensor& b) { return a -= b; }

    double frobenius_norm() const { return std::sqrt(squared_norm()); }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& v : data_) s += std::norm(v);
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    bool is_finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

    void require_finite(const char* where) const {
        if (!is_finite()) throw numeric_error(std::string(where) + ": non-finite tensor entries");
    }

    /// Eigen view of a rank-2 tensor (no copy).
    ConstMatrixMap matrix_view() const {
        require_rank2("matrix_view");
        return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(shape_[0]),
                              static_cast<Eigen::Index>(shape_[1]));
    }

    MatrixMap matrix_view() {
        require_rank2("matrix_view");
        return MatrixMap(data_.data(), static_cast<Eigen::Index>(shape_[0]),
                         static_cast<Eigen::Index>(shape_[1]));
    }

    static ComplexTensor from_eigen(const MatrixXc& m) {
        ComplexTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
        MatrixMap(t.data_.data(), m.rows(), m.cols()) = m;
        return t;
    }

    static std::vector<std::size_t> strides(const std::vector<std::size_t>& shape) {
        std::vector<std::size_t> s(shape.size(), 1);
        for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
        return s;
    }

private:
    void require_rank2(const char* where) const {
        if (rank() != 2) throw dimension_error(std::string(where) + ": tensor is not rank-2");
    }

    std::size_t offset(const std::vector<std::size_t>& idx) const {
        if (idx.size() != rank()) throw dimension_error("index rank mismatch");
        std::size_t off = 0, stride = 1;
        for (std::size_t i = rank(); i-- > 0;) {
            if (idx[i] >= shape_[i]) throw dimension_error("index out of range");
            off += idx[i] * stride;
            stride *= shape_[i];
        }
        return off;
    }

    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw dimension_error("zero tensor extent");
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<cplx> data_;
};

/// Pairwise contraction: sums over all (axis of a, axis of b) pairs.
///
/// Result axes are the uncontracted axes of `a` (in order) followed by the
/// uncontracted axes of `b`. Paired extents must match.
inline ComplexTensor contract(const ComplexTensor& a, const ComplexTensor& b,
                              const std::vector<std::pair<std::size_t, std::size_t>>& axis_pairs) {
    const std::size_t ra = a.rank(), rb = b.rank();
    std::vector<bool> a_used(ra, false), b_used(rb, false);
    std::size_t contracted = 1;
    for (const auto& [ai, bi] : axis_pairs) {
        if (ai >= ra || bi >= rb) throw dimension_error("contraction axis out of range");
        if (a_used[ai] || b_used[bi]) throw dimension_error("contraction axis repeated");
        if (a.extent(ai) != b.extent(bi))
            throw dimension_error("contraction extent mismatch: a axis " + std::to_string(ai) +
                                  " has extent " + std::to_string(a.extent(ai)) + ", b axis " +
                                  std::to_string(bi) + " has extent " + std::to_string(b.extent(bi)));
        a_used[ai] = true;
        b_used[bi] = true;
        contracted *= a.extent(ai);
    }

    std::vector<std::size_t> a_perm, b_perm, out_shape;
    std::size_t m = 1, n = 1;
    for (std::size_t i = 0; i < ra; ++i)
        if (!a_used[i]) {
            a_perm.push_back(i);
            out_shape.push_back(a.extent(i));
            m *= a.extent(i);
        }
    for (const auto& [ai, bi] : axis_pairs) a_perm.push_back(ai);
    for (const auto& [ai, bi] : axis_pairs) b_perm.push_back(bi);
    for (std::size_t i = 0; i < rb; ++i)
        if (!b_used[i]) {
            b_perm.push_back(i);
            out_shape.push_back(b.extent(i));
            n *= b.extent(i);
        }

    ComplexTensor ap = a.permuted(a_perm);
    ComplexTensor bp = b.permuted(b_perm);

    ComplexTensor out(out_shape.empty() ? std::vector<std::size_t>{1} : out_shape);
    ConstMatrixMap am(ap.data().data(), static_cast<Eigen::Index>(m),
                      static_cast<Eigen::Index>(contracted));
    ConstMatrixMap bm(bp.data().data(), static_cast<Eigen::Index>(contracted),
                      static_cast<Eigen::Index>(n));
    MatrixMap om(out.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    om.noalias() = am * bm;
    if (out_shape.empty()) return out.reshaped({1});
    return out;
}

/// Kronecker product of two matrices in row-major convention.
inline ComplexTensor kron(const ComplexTensor& a, const ComplexTensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw dimension_error("kron requires rank-2 tensors");
    const std::size_t ar = a.extent(0), ac = a.extent(1);
    const std::size_t br = b.extent(0), bc = b.extent(1);
    ComplexTensor out({ar * br, ac * bc});
    for (std::size_t i = 0; i < ar; ++i)
        for (std::size_t j = 0; j < ac; ++j) {
            const cplx aij = a.at({i, j});
            if (aij == cplx(0.0, 0.0)) continue;
            for (std::size_t k = 0; k < br; ++k)
                for (std::size_t l = 0; l < bc; ++l)
                    out.at({i * br + k, j * bc + l}) = aij * b.at({k, l});
        }
    return out;
}

inline ComplexTensor matmul(const ComplexTensor& a, const ComplexTensor& b) {
    return contract(a, b, {{1, 0}});
}

} // namespace fbmps
