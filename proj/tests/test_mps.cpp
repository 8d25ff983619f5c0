#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "fbmps/model.hpp"
#include "fbmps/mps.hpp"
#include "support/dense_oracle.hpp"
#include "support/test_helpers.hpp"

using namespace fbmps;
using fbmps::testing::DenseState;
using fbmps::testing::max_abs_diff;
using fbmps::testing::random_unit_vector;
using fbmps::testing::random_unitary;

namespace {

constexpr double kCut = 0.0;
constexpr std::size_t kBond = 1024;

std::vector<SiteLabel> spin_labels(int n) {
    std::vector<SiteLabel> l;
    for (int i = 1; i <= n; ++i) l.push_back({SiteKind::spin, i});
    return l;
}

/// Random MPS built by entangling a product state with random two-site gates.
MatrixProductState random_mps(std::mt19937& rng, int n_sites, std::size_t phys = 2) {
    std::vector<std::vector<cplx>> locals;
    std::vector<SiteLabel> labels;
    for (int i = 0; i < n_sites; ++i) {
        locals.push_back(random_unit_vector(rng, phys));
        labels.push_back({SiteKind::spin, i + 1});
    }
    MatrixProductState psi = MatrixProductState::from_product_state(labels, locals);
    for (int pass = 0; pass < 2; ++pass) {
        for (int p = 0; p + 1 < n_sites; ++p) {
            ComplexTensor u = random_unitary(rng, phys * phys);
            psi.move_ortho_center(static_cast<std::size_t>(p));
            psi.apply_gate(u, {static_cast<std::size_t>(p), static_cast<std::size_t>(p + 1)},
                           kCut, kBond);
        }
    }
    return psi;
}

DenseState densify(const MatrixProductState& psi) {
    DenseState s;
    for (std::size_t i = 0; i < psi.size(); ++i) s.dims.push_back(psi.phys_dim(i));
    s.amp = psi.full_vector();
    return s;
}

} // namespace

TEST_CASE("from_product_state: boundary-excited chain with vacuum bins") {
    std::vector<SiteLabel> labels;
    std::vector<std::vector<cplx>> locals;
    for (int b = -3; b < 0; ++b) {
        labels.push_back({SiteKind::time_bin, b});
        locals.push_back({1.0, 0.0});
    }
    for (int s = 1; s <= 4; ++s) {
        labels.push_back({SiteKind::spin, s});
        locals.push_back(s == 4 ? std::vector<cplx>{0.0, 1.0} : std::vector<cplx>{1.0, 0.0});
    }
    MatrixProductState psi = MatrixProductState::from_product_state(labels, locals);
    CHECK(psi.ortho_center() == 0);
    CHECK(psi.norm_squared() == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < psi.size(); ++i) CHECK(psi.bond_dim(i) == 1);
    CHECK(psi.expect_local(excited_projector(), 6).real() == doctest::Approx(1.0));
    CHECK(psi.expect_local(excited_projector(), 3).real() == doctest::Approx(0.0));
}

TEST_CASE("from_product_state: global ground state has zero densities") {
    auto labels = spin_labels(3);
    std::vector<std::vector<cplx>> locals(3, {1.0, 0.0});
    MatrixProductState psi = MatrixProductState::from_product_state(labels, locals);
    CHECK(psi.norm_squared() == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(psi.expect_local(excited_projector(), i)) < 1e-14);
}

TEST_CASE("from_product_state: single excited site") {
    MatrixProductState psi =
        MatrixProductState::from_product_state(spin_labels(1), {{0.0, 1.0}});
    CHECK(psi.expect_local(excited_projector(), 0).real() == doctest::Approx(1.0));
}

TEST_CASE("from_product_state rejects non-normalized local vectors") {
    CHECK_THROWS_AS(
        MatrixProductState::from_product_state(spin_labels(1), {{0.5, 0.5}}),
        validation_error);
}

TEST_CASE("move_ortho_center: no-op move leaves tensors untouched") {
    std::mt19937 rng(51);
    MatrixProductState psi = random_mps(rng, 3);
    const std::size_t c = psi.ortho_center();
    ComplexTensor before = psi.tensor(c);
    psi.move_ortho_center(c);
    CHECK(max_abs_diff(before.data(), psi.tensor(c).data()) == 0.0);
}

TEST_CASE("move_ortho_center: round trip preserves the dense vector") {
    std::mt19937 rng(52);
    MatrixProductState psi = random_mps(rng, 3);
    psi.move_ortho_center(0);
    std::vector<cplx> v0 = psi.full_vector();
    psi.move_ortho_center(2);
    psi.move_ortho_center(0);
    CHECK(max_abs_diff(v0, psi.full_vector()) < 1e-12);
    CHECK_THROWS_AS(psi.move_ortho_center(99), validation_error);
}

TEST_CASE("move_ortho_center: left blocks satisfy the isometry contraction") {
    std::mt19937 rng(53);
    MatrixProductState psi = random_mps(rng, 4);
    psi.move_ortho_center(3);
    for (std::size_t i = 0; i < 3; ++i) {
        ComplexTensor e = contract(psi.tensor(i).conjugated(), psi.tensor(i), {{0, 0}, {1, 1}});
        ComplexTensor id = ComplexTensor::identity(e.extent(0));
        double diff = 0.0;
        for (std::size_t j = 0; j < e.size(); ++j) diff = std::max(diff, std::abs(e[j] - id[j]));
        CHECK(diff < 1e-12);
    }
}

TEST_CASE("gauge invariance: expectations unchanged under center moves") {
    std::mt19937 rng(54);
    MatrixProductState psi = random_mps(rng, 5);
    std::vector<cplx> ref;
    for (std::size_t s = 0; s < 5; ++s) ref.push_back(psi.expect_local(excited_projector(), s));
    std::uniform_int_distribution<std::size_t> pick(0, 4);
    for (int trial = 0; trial < 12; ++trial) {
        psi.move_ortho_center(pick(rng));
        for (std::size_t s = 0; s < 5; ++s)
            CHECK(std::abs(psi.expect_local(excited_projector(), s) - ref[s]) < 1e-10);
    }
}

TEST_CASE("swap_adjacent: involution restores the state") {
    std::mt19937 rng(61);
    MatrixProductState psi = random_mps(rng, 4);
    psi.move_ortho_center(1);
    std::vector<cplx> v0 = psi.full_vector();
    psi.swap_adjacent(1, kCut, kBond);
    psi.move_ortho_center(1);
    psi.swap_adjacent(1, kCut, kBond);
    CHECK(max_abs_diff(v0, psi.full_vector()) < 1e-10);
    CHECK(psi.label(1).index == 2);
}

TEST_CASE("swap_adjacent: product state keeps bond extent 1") {
    std::vector<std::vector<cplx>> locals = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}};
    MatrixProductState psi = MatrixProductState::from_product_state(spin_labels(3), locals);
    psi.move_ortho_center(0);
    psi.swap_adjacent(0, kCut, kBond);
    for (std::size_t i = 0; i < 3; ++i) CHECK(psi.bond_dim(i) == 1);
    CHECK(psi.expect_local(excited_projector(), 0).real() == doctest::Approx(1.0));
    CHECK(psi.expect_local(excited_projector(), 1).real() == doctest::Approx(0.0));
}

TEST_CASE("swap_adjacent: entangled state equals the dense permutation") {
    std::mt19937 rng(62);
    MatrixProductState psi = random_mps(rng, 4);
    DenseState dense = densify(psi);
    psi.move_ortho_center(2);
    psi.swap_adjacent(2, kCut, kBond);
    dense.swap_adjacent(2);
    CHECK(max_abs_diff(dense.amp, psi.full_vector()) < 1e-10);
}

TEST_CASE("swap_adjacent: gauge violation is refused") {
    std::mt19937 rng(63);
    MatrixProductState psi = random_mps(rng, 4);
    psi.move_ortho_center(0);
    CHECK_THROWS_AS(psi.swap_adjacent(2, kCut, kBond), gauge_error);
}

TEST_CASE("apply_gate: identity leaves the state unchanged") {
    std::mt19937 rng(71);
    MatrixProductState psi = random_mps(rng, 3);
    psi.move_ortho_center(1);
    std::vector<cplx> v0 = psi.full_vector();
    psi.apply_gate(ComplexTensor::identity(4), {1, 2}, kCut, kBond);
    CHECK(max_abs_diff(v0, psi.full_vector()) < 1e-12);
}

TEST_CASE("apply_gate: two-site swap gate equals swap_adjacent") {
    std::mt19937 rng(72);
    MatrixProductState psi = random_mps(rng, 3);
    MatrixProductState psi2 = psi;
    ComplexTensor swap_gate({4, 4});
    // |ab> -> |ba> for two qubits
    swap_gate.at({0, 0}) = 1.0;
    swap_gate.at({1, 2}) = 1.0;
    swap_gate.at({2, 1}) = 1.0;
    swap_gate.at({3, 3}) = 1.0;
    psi.move_ortho_center(0);
    psi.apply_gate(swap_gate, {0, 1}, kCut, kBond);
    psi2.move_ortho_center(0);
    psi2.swap_adjacent(0, kCut, kBond);
    CHECK(max_abs_diff(psi.full_vector(), psi2.full_vector()) < 1e-10);
}

TEST_CASE("apply_gate: random two-site unitary matches the dense oracle") {
    std::mt19937 rng(73);
    for (int n = 3; n <= 6; ++n) {
        MatrixProductState psi = random_mps(rng, n);
        DenseState dense = densify(psi);
        std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(n - 2));
        const std::size_t p = pick(rng);
        ComplexTensor u = random_unitary(rng, 4);
        psi.move_ortho_center(p);
        psi.apply_gate(u, {p, p + 1}, kCut, kBond);
        dense.apply_gate(u, {p, p + 1});
        CHECK(max_abs_diff(dense.amp, psi.full_vector()) < 1e-10);
        CHECK(psi.norm_squared() == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("apply_gate: three-site unitary matches the dense oracle") {
    std::mt19937 rng(74);
    MatrixProductState psi = random_mps(rng, 5);
    DenseState dense = densify(psi);
    ComplexTensor u = random_unitary(rng, 8);
    psi.move_ortho_center(2);
    psi.apply_gate(u, {1, 2, 3}, kCut, kBond, OrthoSide::left);
    dense.apply_gate(u, {1, 2, 3});
    CHECK(max_abs_diff(dense.amp, psi.full_vector()) < 1e-10);
    CHECK(psi.ortho_center() == 1);
}

TEST_CASE("apply_gate: non-contiguous span is a usage error") {
    std::mt19937 rng(75);
    MatrixProductState psi = random_mps(rng, 4);
    psi.move_ortho_center(0);
    CHECK_THROWS_AS(psi.apply_gate(ComplexTensor::identity(4), {0, 2}, kCut, kBond), usage_error);
    CHECK_THROWS_AS(psi.apply_gate(ComplexTensor::identity(2), {0}, kCut, kBond), usage_error);
    CHECK_THROWS_AS(psi.apply_gate(ComplexTensor::identity(8), {0, 1}, kCut, kBond),
                    dimension_error);
}

TEST_CASE("expect_local: projector and number operator basics") {
    std::vector<SiteLabel> labels = {{SiteKind::spin, 1}, {SiteKind::time_bin, 0}};
    std::vector<std::vector<cplx>> locals = {{0.0, 1.0}, {1.0, 0.0, 0.0}};
    MatrixProductState psi = MatrixProductState::from_product_state(labels, locals);
    CHECK(psi.expect_local(excited_projector(), 0).real() == doctest::Approx(1.0));
    CHECK(std::abs(psi.expect_local(bin_number_operator(3), 1)) < 1e-14);
    CHECK_THROWS_AS(psi.expect_local(bin_number_operator(2), 1), validation_error);
}

TEST_CASE("expect_local: random MPS against the dense oracle, Hermitian is real") {
    std::mt19937 rng(81);
    MatrixProductState psi = random_mps(rng, 5);
    DenseState dense = densify(psi);
    ComplexTensor h = fbmps::testing::random_tensor(rng, {2, 2});
    h += h.adjoint(); // Hermitian
    for (std::size_t s = 0; s < 5; ++s) {
        const cplx mine = psi.expect_local(h, s);
        const cplx ref = dense.expect_local(h, s);
        CHECK(std::abs(mine - ref) < 1e-10);
        CHECK(std::abs(mine.imag()) < 1e-10);
    }
}

TEST_CASE("norm ledger: 1 - <psi|psi> equals the accumulated discarded weight") {
    std::mt19937 rng(82);
    MatrixProductState psi = random_mps(rng, 6);
    CHECK(psi.discarded_total() == doctest::Approx(0.0));
    // force hard truncations with max_bond 2 and random gates
    double expect_deficit = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<std::size_t> pick(0, 4);
        const std::size_t p = pick(rng);
        ComplexTensor u = random_unitary(rng, 4);
        psi.move_ortho_center(p);
        psi.apply_gate(u, {p, p + 1}, 0.0, 2);
        (void)expect_deficit;
    }
    CHECK(1.0 - psi.norm_squared() == doctest::Approx(psi.discarded_total()).epsilon(1e-10));
}

TEST_CASE("insert and sink-absorb preserve retained observables and norm") {
    std::mt19937 rng(83);
    MatrixProductState psi = random_mps(rng, 4);
    // append a sink, entangle the last spins, then retire the last spin
    psi.move_ortho_center(3);
    psi.insert_product_site(4, {SiteKind::sink, 0}, {1.0});
    ComplexTensor u = random_unitary(rng, 4);
    psi.move_ortho_center(2);
    psi.apply_gate(u, {2, 3}, kCut, kBond, OrthoSide::left);
    std::vector<cplx> before;
    for (std::size_t s = 0; s < 3; ++s) before.push_back(psi.expect_local(excited_projector(), s));
    const double norm_before = psi.norm_squared();
    psi.move_ortho_center(0);
    psi.absorb_rightmost_into_sink();
    CHECK(psi.size() == 4);
    CHECK(psi.norm_squared() == doctest::Approx(norm_before).epsilon(1e-12));
    for (std::size_t s = 0; s < 3; ++s)
        CHECK(std::abs(psi.expect_local(excited_projector(), s) - before[s]) < 1e-11);
    CHECK(psi.label(3).kind == SiteKind::sink);
}

TEST_CASE("snapshot: save/load round trip is bit exact") {
    std::mt19937 rng(84);
    MatrixProductState psi = random_mps(rng, 4);
    const char* path = "snapshot_test.fbmps";
    psi.save_snapshot(path);
    MatrixProductState back = MatrixProductState::load_snapshot(path);
    std::remove(path);
    REQUIRE(back.size() == psi.size());
    CHECK(back.ortho_center() == psi.ortho_center());
    CHECK(back.discarded_total() == psi.discarded_total());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        CHECK(back.label(i) == psi.label(i));
        REQUIRE(back.tensor(i).shape() == psi.tensor(i).shape());
        CHECK(max_abs_diff(back.tensor(i).data(), psi.tensor(i).data()) == 0.0);
    }
}
