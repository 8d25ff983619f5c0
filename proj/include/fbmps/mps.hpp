#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "fbmps/errors.hpp"
#include "fbmps/linalg.hpp"
#include "fbmps/tensor.hpp"

namespace fbmps {

enum class SiteKind : std::uint8_t { spin = 0, time_bin = 1, sink = 2 };

/// Identifies what a train position holds: a chain site (index 1..N), a
/// reservoir time bin (index = time-step k, negative for pre-loop bins), or
/// the sink register that absorbs bins after their last interaction.
struct SiteLabel {
    SiteKind kind = SiteKind::spin;
    long index = 0;

    friend bool operator==(const SiteLabel& a, const SiteLabel& b) {
        return a.kind == b.kind && a.index == b.index;
    }
};

enum class OrthoSide { left, right };

/// Matrix product state over a mixed train of chain sites and time bins.
///
/// Tensor i has axes (left bond, physical, right bond). Everything left of
/// ortho_center() is left-orthonormal, everything right of it is
/// right-orthonormal. Truncations feed a running discarded-weight ledger and
/// the state is never renormalized, so 1 - <psi|psi> tracks the ledger.
class MatrixProductState {
public:
    MatrixProductState() = default;

    static MatrixProductState from_product_state(std::vector<SiteLabel> labels,
                                                 const std::vector<std::vector<cplx>>& local_states) {
        if (labels.empty() || labels.size() != local_states.size())
            throw validation_error("from_product_state: labels/local_states size mismatch");
        MatrixProductState psi;
        psi.labels_ = std::move(labels);
        psi.tensors_.reserve(psi.labels_.size());
        for (const auto& v : local_states) {
            if (v.empty()) throw validation_error("from_product_state: empty local state");
            double n2 = 0.0;
            for (const auto& c : v) n2 += std::norm(c);
            if (std::abs(n2 - 1.0) > 1e-10)
                throw validation_error("from_product_state: local state is not normalized");
            ComplexTensor t({1, v.size(), 1});
            for (std::size_t i = 0; i < v.size(); ++i) t.at({0, i, 0}) = v[i];
            psi.tensors_.push_back(std::move(t));
        }
        psi.ortho_ = 0;
        return psi;
    }

    std::size_t size() const { return tensors_.size(); }
    std::size_t ortho_center() const { return ortho_; }
    double discarded_total() const { return discarded_total_; }
    const std::vector<SiteLabel>& labels() const { return labels_; }
    const SiteLabel& label(std::size_t pos) const { return labels_.at(pos); }
    const ComplexTensor& tensor(std::size_t pos) const { return tensors_.at(pos); }
    std::size_t phys_dim(std::size_t pos) const { return tensors_.at(pos).extent(1); }

    /// Bond extent between positions pos and pos+1.
    std::size_t bond_dim(std::size_t pos) const { return tensors_.at(pos).extent(2); }

    std::size_t max_bond_dim() const {
        std::size_t m = 1;
        for (const auto& t : tensors_) m = std::max(m, t.extent(2));
        return m;
    }

    /// <psi|psi>; the center tensor carries the whole norm.
    double norm_squared() const { return tensors_.at(ortho_).squared_norm(); }

    /// Moves the orthogonality center by successive exact QR splits.
    /// The represented state is unchanged.
    void move_ortho_center(std::size_t target) {
        if (target >= size()) throw validation_error("move_ortho_center: target out of range");
        while (ortho_ < target) shift_right();
        while (ortho_ > target) shift_left();
    }

    /// Exchanges sites pos and pos+1 through a truncated two-site re-split.
    /// Returns the discarded weight; requires the center at pos or pos+1.
    double swap_adjacent(std::size_t pos, double cutoff, std::size_t max_bond,
                         OrthoSide leave = OrthoSide::right) {
        if (pos + 1 >= size()) throw validation_error("swap_adjacent: position out of range");
        if (ortho_ != pos && ortho_ != pos + 1)
            throw gauge_error("swap_adjacent: orthogonality center must sit on the pair");
        ComplexTensor theta = contract(tensors_[pos], tensors_[pos + 1], {{2, 0}});
        // (l, d1, d2, r) -> (l, d2, d1, r)
        theta = theta.permuted({0, 2, 1, 3});
        std::swap(labels_[pos], labels_[pos + 1]);
        return split_pair(std::move(theta), pos, cutoff, max_bond, leave);
    }

    /// Applies a dense unitary (matrix over the combined physical space, row
    /// index = output) to 2 or 3 contiguous sites and re-splits with the
    /// configured truncation. Returns the discarded weight of the re-split.
    double apply_gate(const ComplexTensor& gate, const std::vector<std::size_t>& positions,
                      double cutoff, std::size_t max_bond, OrthoSide leave = OrthoSide::right) {
        const std::size_t n = positions.size();
        if (n != 2 && n != 3) throw usage_error("apply_gate: span must cover 2 or 3 sites");
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (positions[i + 1] != positions[i] + 1)
                throw usage_error("apply_gate: span must be contiguous");
        const std::size_t first = positions.front();
        if (positions.back() >= size()) throw validation_error("apply_gate: span out of range");
        if (ortho_ < first || ortho_ > positions.back())
            throw gauge_error("apply_gate: orthogonality center must lie inside the span");

        std::size_t dim = 1;
        std::vector<std::size_t> phys(n);
        for (std::size_t i = 0; i < n; ++i) {
            phys[i] = phys_dim(first + i);
            dim *= phys[i];
        }
        if (gate.rank() != 2 || gate.extent(0) != dim || gate.extent(1) != dim)
            throw dimension_error("apply_gate: gate dimension does not match the span");

        ComplexTensor theta = tensors_[first];
        for (std::size_t i = 1; i < n; ++i)
            theta = contract(theta, tensors_[first + i], {{theta.rank() - 1, 0}});
        const std::size_t l = theta.extent(0), r = theta.extent(theta.rank() - 1);
        theta = theta.reshaped({l, dim, r});
        theta = contract(gate, theta, {{1, 1}}).permuted({1, 0, 2}); // (l, dim', r)

        std::vector<std::size_t> full_shape;
        full_shape.push_back(l);
        for (std::size_t d : phys) full_shape.push_back(d);
        full_shape.push_back(r);
        theta = theta.reshaped(full_shape);

        if (n == 2) return split_pair(std::move(theta), first, cutoff, max_bond, leave);
        return split_triple(std::move(theta), first, cutoff, max_bond, leave);
    }

    /// <psi| op_pos |psi> without moving the center (const, thread-safe reads).
    cplx expect_local(const ComplexTensor& op, std::size_t pos) const {
        if (pos >= size()) throw validation_error("expect_local: position out of range");
        const std::size_t d = phys_dim(pos);
        if (op.rank() != 2 || op.extent(0) != d || op.extent(1) != d)
            throw validation_error("expect_local: operator dimension does not match the site");

        if (pos == ortho_) {
            const ComplexTensor& t = tensors_[pos];
            ComplexTensor a = contract(op, t, {{1, 1}}).permuted({1, 0, 2});
            return dot(t, a);
        }
        if (pos > ortho_) {
            // env over right bonds of the center, propagated rightward
            ComplexTensor env = contract(tensors_[ortho_].conjugated(), tensors_[ortho_],
                                         {{0, 0}, {1, 1}});
            for (std::size_t i = ortho_ + 1; i < pos; ++i) {
                ComplexTensor tmp = contract(env, tensors_[i], {{1, 0}});
                env = contract(tensors_[i].conjugated(), tmp, {{0, 0}, {1, 1}});
            }
            ComplexTensor tmp = contract(env, tensors_[pos], {{1, 0}});      // (a, d, r)
            tmp = contract(op, tmp, {{1, 1}}).permuted({1, 0, 2});           // (a, d', r)
            return dot(tensors_[pos], tmp);
        }
        ComplexTensor env = contract(tensors_[ortho_].conjugated(), tensors_[ortho_],
                                     {{1, 1}, {2, 2}});
        for (std::size_t i = ortho_; i-- > pos + 1;) {
            ComplexTensor tmp = contract(tensors_[i], env, {{2, 1}});        // (l, d, a)
            env = contract(tensors_[i].conjugated(), tmp, {{1, 1}, {2, 2}});
        }
        ComplexTensor tmp = contract(tensors_[pos], env, {{2, 1}});          // (l, d, a)
        tmp = contract(op, tmp, {{1, 1}}).permuted({1, 0, 2});               // (l, d', a)
        return dot(tensors_[pos], tmp);
    }

    /// Inserts a normalized product site so that it occupies position pos.
    /// Exact: the inserted tensor is an isometry on the existing bond.
    void insert_product_site(std::size_t pos, SiteLabel label, const std::vector<cplx>& local) {
        if (pos > size()) throw validation_error("insert_product_site: position out of range");
        double n2 = 0.0;
        for (const auto& c : local) n2 += std::norm(c);
        if (std::abs(n2 - 1.0) > 1e-10)
            throw validation_error("insert_product_site: local state is not normalized");
        const std::size_t chi = (pos == 0) ? tensors_.front().extent(0)
                                           : tensors_[pos - 1].extent(2);
        ComplexTensor t({chi, local.size(), chi});
        for (std::size_t a = 0; a < chi; ++a)
            for (std::size_t i = 0; i < local.size(); ++i) t.at({a, i, a}) = local[i];
        tensors_.insert(tensors_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(t));
        labels_.insert(labels_.begin() + static_cast<std::ptrdiff_t>(pos), label);
        if (pos <= ortho_) ++ortho_;
    }

    /// Replaces the trailing [site][sink] pair by a fresh identity sink.
    ///
    /// Valid only when both are right-orthonormal and will never be touched
    /// again: every retained observable and the norm are exactly preserved.
    void absorb_rightmost_into_sink() {
        const std::size_t n = size();
        if (n < 2 || labels_[n - 1].kind != SiteKind::sink)
            throw usage_error("absorb_rightmost_into_sink: train must end with a sink");
        if (ortho_ >= n - 2)
            throw gauge_error("absorb_rightmost_into_sink: center must be left of the absorbed site");
        const std::size_t b = tensors_[n - 2].extent(0);
        ComplexTensor sink({b, b, 1});
        for (std::size_t a = 0; a < b; ++a) sink.at({a, a, 0}) = 1.0;
        const long absorbed = labels_[n - 1].index + 1;
        tensors_.pop_back();
        labels_.pop_back();
        tensors_.back() = std::move(sink);
        labels_.back() = SiteLabel{SiteKind::sink, absorbed};
    }

    /// Dense coefficient vector (row-major over physical indices); test sizes only.
    std::vector<cplx> full_vector() const {
        std::size_t dim = 1;
        for (const auto& t : tensors_) {
            dim *= t.extent(1);
            if (dim > (1u << 22))
                throw capacity_error("full_vector: state too large to densify");
        }
        ComplexTensor acc = tensors_[0].reshaped({tensors_[0].extent(1), tensors_[0].extent(2)});
        for (std::size_t i = 1; i < size(); ++i) {
            acc = contract(acc, tensors_[i], {{acc.rank() - 1, 0}});
        }
        std::vector<std::size_t> flat{dim, acc.shape().back()};
        acc = acc.reshaped(flat);
        std::vector<cplx> v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = acc.at({i, 0});
        return v;
    }

    void add_discarded(double w) { discarded_total_ += w; }

    void save_snapshot(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw usage_error("save_snapshot: cannot open " + path);
        const char magic[8] = {'F', 'B', 'M', 'P', 'S', '1', 0, 0};
        f.write(magic, 8);
        write_pod<std::uint32_t>(f, 0x01020304u);
        write_pod<std::uint64_t>(f, size());
        write_pod<std::int64_t>(f, static_cast<std::int64_t>(ortho_));
        write_pod<double>(f, discarded_total_);
        for (std::size_t i = 0; i < size(); ++i) {
            write_pod<std::uint8_t>(f, static_cast<std::uint8_t>(labels_[i].kind));
            write_pod<std::int64_t>(f, labels_[i].index);
            for (std::size_t ax = 0; ax < 3; ++ax)
                write_pod<std::uint64_t>(f, tensors_[i].extent(ax));
            f.write(reinterpret_cast<const char*>(tensors_[i].data().data()),
                    static_cast<std::streamsize>(tensors_[i].size() * sizeof(cplx)));
        }
        if (!f) throw usage_error("save_snapshot: write failed for " + path);
    }

    static MatrixProductState load_snapshot(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw usage_error("load_snapshot: cannot open " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, "FBMPS1\0\0", 8) != 0)
            throw usage_error("load_snapshot: bad magic in " + path);
        if (read_pod<std::uint32_t>(f) != 0x01020304u)
            throw usage_error("load_snapshot: endianness mismatch in " + path);
        MatrixProductState psi;
        const std::uint64_t n = read_pod<std::uint64_t>(f);
        psi.ortho_ = static_cast<std::size_t>(read_pod<std::int64_t>(f));
        psi.discarded_total_ = read_pod<double>(f);
        for (std::uint64_t i = 0; i < n; ++i) {
            SiteLabel lab;
            lab.kind = static_cast<SiteKind>(read_pod<std::uint8_t>(f));
            lab.index = static_cast<long>(read_pod<std::int64_t>(f));
            std::vector<std::size_t> shape(3);
            for (auto& e : shape) e = static_cast<std::size_t>(read_pod<std::uint64_t>(f));
            ComplexTensor t(shape);
            f.read(reinterpret_cast<char*>(t.data().data()),
                   static_cast<std::streamsize>(t.size() * sizeof(cplx)));
            psi.labels_.push_back(lab);
            psi.tensors_.push_back(std::move(t));
        }
        if (!f) throw usage_error("load_snapshot: truncated file " + path);
        return psi;
    }

private:
    static cplx dot(const ComplexTensor& a, const ComplexTensor& b) {
        cplx s(0.0, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
        return s;
    }

    static ComplexTensor scale_cols(const ComplexTensor& u, const std::vector<double>& s) {
        ComplexTensor t = u;
        const std::size_t rows = t.extent(0), k = t.extent(1);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < k; ++j) t.at({i, j}) *= s[j];
        return t;
    }

    static ComplexTensor scale_rows(const std::vector<double>& s, const ComplexTensor& v) {
        ComplexTensor t = v;
        const std::size_t k = t.extent(0), cols = t.extent(1);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < cols; ++i) t.at({j, i}) *= s[j];
        return t;
    }

    // exact QR gauge shift, center ortho_ -> ortho_+1
    void shift_right() {
        ComplexTensor& t = tensors_[ortho_];
        const std::size_t l = t.extent(0), d = t.extent(1), r = t.extent(2);
        ConstMatrixMap m(t.data().data(), static_cast<Eigen::Index>(l * d),
                         static_cast<Eigen::Index>(r));
        Eigen::HouseholderQR<MatrixXc> qr(m);
        const std::size_t k = std::min(l * d, r);
        MatrixXc q = qr.householderQ() *
                     MatrixXc::Identity(static_cast<Eigen::Index>(l * d), static_cast<Eigen::Index>(k));
        MatrixXc rr = qr.matrixQR()
                          .topRows(static_cast<Eigen::Index>(k))
                          .template triangularView<Eigen::Upper>();
        ComplexTensor qt = ComplexTensor::from_eigen(q).reshaped({l, d, k});
        tensors_[ortho_] = std::move(qt);
        ComplexTensor carry = ComplexTensor::from_eigen(rr);
        tensors_[ortho_ + 1] = contract(carry, tensors_[ortho_ + 1], {{1, 0}});
        ++ortho_;
    }

    // exact shift, center ortho_ -> ortho_-1 (QR of the adjoint)
    void shift_left() {
        ComplexTensor& t = tensors_[ortho_];
        const std::size_t l = t.extent(0), d = t.extent(1), r = t.extent(2);
        ConstMatrixMap m(t.data().data(), static_cast<Eigen::Index>(l),
                         static_cast<Eigen::Index>(d * r));
        MatrixXc md = m.adjoint();
        Eigen::HouseholderQR<MatrixXc> qr(md);
        const std::size_t k = std::min(l, d * r);
        MatrixXc q = qr.householderQ() *
                     MatrixXc::Identity(static_cast<Eigen::Index>(d * r), static_cast<Eigen::Index>(k));
        MatrixXc rr = qr.matrixQR()
                          .topRows(static_cast<Eigen::Index>(k))
                          .template triangularView<Eigen::Upper>();
        ComplexTensor qt = ComplexTensor::from_eigen(MatrixXc(q.adjoint())).reshaped({k, d, r});
        tensors_[ortho_] = std::move(qt);
        ComplexTensor carry = ComplexTensor::from_eigen(MatrixXc(rr.adjoint())); // (l x k)
        ComplexTensor& left = tensors_[ortho_ - 1];
        left = contract(left, carry, {{2, 0}});
        --ortho_;
    }

    double split_pair(ComplexTensor theta, std::size_t pos, double cutoff, std::size_t max_bond,
                      OrthoSide leave) {
        const std::size_t l = theta.extent(0), d1 = theta.extent(1), d2 = theta.extent(2),
                          r = theta.extent(3);
        SvdResult svd = truncated_svd(theta.reshaped({l * d1, d2 * r}), cutoff, max_bond);
        const std::size_t k = svd.singular_values.size();
        if (leave == OrthoSide::right) {
            tensors_[pos] = svd.left_isometry.reshaped({l, d1, k});
            tensors_[pos + 1] =
                scale_rows(svd.singular_values, svd.right_isometry).reshaped({k, d2, r});
            ortho_ = pos + 1;
        } else {
            tensors_[pos] = scale_cols(svd.left_isometry, svd.singular_values).reshaped({l, d1, k});
            tensors_[pos + 1] = svd.right_isometry.reshaped({k, d2, r});
            ortho_ = pos;
        }
        discarded_total_ += svd.discarded_weight;
        return svd.discarded_weight;
    }

    double split_triple(ComplexTensor theta, std::size_t first, double cutoff,
                        std::size_t max_bond, OrthoSide leave) {
        const std::size_t l = theta.extent(0), d1 = theta.extent(1), d2 = theta.extent(2),
                          d3 = theta.extent(3), r = theta.extent(4);
        double dw = 0.0;
        if (leave == OrthoSide::right) {
            SvdResult s1 = truncated_svd(theta.reshaped({l * d1, d2 * d3 * r}), cutoff, max_bond);
            const std::size_t k1 = s1.singular_values.size();
            tensors_[first] = s1.left_isometry.reshaped({l, d1, k1});
            ComplexTensor rest = scale_rows(s1.singular_values, s1.right_isometry);
            SvdResult s2 = truncated_svd(rest.reshaped({k1 * d2, d3 * r}), cutoff, max_bond);
            const std::size_t k2 = s2.singular_values.size();
            tensors_[first + 1] = s2.left_isometry.reshaped({k1, d2, k2});
            tensors_[first + 2] =
                scale_rows(s2.singular_values, s2.right_isometry).reshaped({k2, d3, r});
            ortho_ = first + 2;
            dw = s1.discarded_weight + s2.discarded_weight;
        } else {
            SvdResult s1 = truncated_svd(theta.reshaped({l * d1 * d2, d3 * r}), cutoff, max_bond);
            const std::size_t k1 = s1.singular_values.size();
            tensors_[first + 2] = s1.right_isometry.reshaped({k1, d3, r});
            ComplexTensor rest = scale_cols(s1.left_isometry, s1.singular_values);
            SvdResult s2 = truncated_svd(rest.reshaped({l * d1, d2 * k1}), cutoff, max_bond);
            const std::size_t k2 = s2.singular_values.size();
            tensors_[first + 1] = s2.right_isometry.reshaped({k2, d2, k1});
            tensors_[first] = scale_cols(s2.left_isometry, s2.singular_values).reshaped({l, d1, k2});
            ortho_ = first;
            dw = s1.discarded_weight + s2.discarded_weight;
        }
        discarded_total_ += dw;
        return dw;
    }

    template <typename T>
    static void write_pod(std::ofstream& f, T v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <typename T>
    static T read_pod(std::ifstream& f) {
        T v{};
        f.read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }

    std::vector<ComplexTensor> tensors_;
    std::vector<SiteLabel> labels_;
    std::size_t ortho_ = 0;
    double discarded_total_ = 0.0;
};

} // namespace fbmps
