#include "qckit/models.hpp"
#include "qckit/stabilizer.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qckit;
using qckit::testing::max_abs_diff;

namespace {

const double kLn2 = std::log(2.0);

// Dense toric ground state at n = 8, solved once for the whole file.
const GroundStateResult& toric_dense() {
    static const GroundStateResult r = [] {
        const ToricLattice lat(2, 2);
        return ground_state(build_toric(lat), lat.default_ordering());
    }();
    return r;
}

}  // namespace

TEST(Stabilizer, ZerosHasFlatZeroProfile) {
    const auto st = StabilizerState::zeros(5);
    for (double s : stab_entanglement_profile(st, ChainOrdering::identity(5)).entropies) EXPECT_EQ(s, 0.0);
}

TEST(Stabilizer, BellPairProfileAndRdm) {
    const auto bell = StabilizerState::from_strings({"XX", "ZZ"});
    const auto p = stab_entanglement_profile(bell, ChainOrdering::identity(2));
    ASSERT_EQ(p.entropies.size(), 1u);
    EXPECT_NEAR(p.entropies[0], kLn2, 1e-15);
    const auto rho = stab_reduced_density_matrix(bell, std::vector<int>{0});
    EXPECT_LT(max_abs_diff(rho.matrix(), 0.5 * CMatrix::Identity(2, 2)), 1e-15);
}

TEST(Stabilizer, ZerosSingleQubitRdm) {
    const auto rho = stab_reduced_density_matrix(StabilizerState::zeros(4), std::vector<int>{2});
    CMatrix expect = CMatrix::Zero(2, 2);
    expect(0, 0) = 1.0;
    EXPECT_LT(max_abs_diff(rho.matrix(), expect), 1e-15);
}

TEST(Stabilizer, SignedGeneratorsMatchDenseProjection) {
    // -XXX, ZZI, IZZ: (|000> - |111>)/sqrt2.
    const auto st = StabilizerState::from_strings({"-XXX", "ZZI", "IZZ"});
    const auto psi = to_pure_state(st, ChainOrdering::identity(3));
    EXPECT_NEAR(std::abs(psi.amplitudes()[0]), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR((psi.amplitudes()[7] / psi.amplitudes()[0]).real(), -1.0, 1e-12);
    for (const std::vector<int>& sub : {std::vector<int>{0, 2}, std::vector<int>{1}, std::vector<int>{2, 1, 0}})
        EXPECT_LT(max_abs_diff(stab_reduced_density_matrix(st, sub).matrix(), partial_trace(psi, sub).matrix()), 1e-12);
}

TEST(Stabilizer, RejectsInvalidTableaux) {
    EXPECT_THROW(StabilizerState::from_strings({"XX", "ZI"}), ValidationError);   // anticommute
    EXPECT_THROW(StabilizerState::from_strings({"ZZ", "ZZ"}), ValidationError);   // dependent
    EXPECT_THROW(StabilizerState::from_strings({"ZZ"}), ValidationError);         // too few
    EXPECT_THROW(StabilizerState::from_strings({"ZQ", "IZ"}), ValidationError);   // bad letter
}

TEST(Stabilizer, RdmErrors) {
    const auto st = StabilizerState::zeros(6);
    EXPECT_THROW(stab_reduced_density_matrix(st, std::vector<int>{0, 1, 2, 3, 4}), ValidationError);
    EXPECT_THROW(stab_reduced_density_matrix(st, std::vector<int>{6}), ValidationError);
    EXPECT_THROW(stab_reduced_density_matrix(st, std::vector<int>{}), ValidationError);
    EXPECT_THROW(stab_entanglement_profile(st, ChainOrdering::identity(5)), ValidationError);
}

TEST(Stabilizer, TextRoundTrip) {
    const ToricLattice lat(2, 3);
    const auto st = toric_stabilizer_state(lat, lat.vertical_cycle(1), -1, lat.horizontal_cycle(0), +1);
    const auto back = stabilizer_from_text(to_text(st));
    EXPECT_EQ(to_text(back), to_text(st));
    EXPECT_EQ(stab_entanglement_profile(back, lat.default_ordering()),
              stab_entanglement_profile(st, lat.default_ordering()));
    EXPECT_THROW(stabilizer_from_text("stabilizer 2\n0001\n"), ValidationError);
    EXPECT_THROW(stabilizer_from_text("tableau 1\n01\n0\n"), ValidationError);
}

TEST(Stabilizer, ProfileEntriesAreMultiplesOfLn2) {
    for (auto [lx, ly] : {std::pair{2, 2}, std::pair{3, 3}, std::pair{4, 4}}) {
        const ToricLattice lat(lx, ly);
        const auto p = stab_entanglement_profile(toric_default_stabilizer_state(lat), lat.default_ordering());
        EXPECT_TRUE(p.within_bounds());
        for (double s : p.entropies) EXPECT_NEAR(s / kLn2, std::round(s / kLn2), 1e-12);
    }
}

TEST(CrossBackend, ToricProfileMatchesDense) {
    const ToricLattice lat(2, 2);
    const auto& dense = toric_dense();
    const auto stab = stab_entanglement_profile(toric_default_stabilizer_state(lat), lat.default_ordering());
    const auto ref = entanglement_profile(dense.state);
    ASSERT_EQ(stab.entropies.size(), ref.entropies.size());
    for (std::size_t k = 0; k < ref.entropies.size(); ++k) EXPECT_NEAR(stab.entropies[k], ref.entropies[k], 1e-12);
}

TEST(CrossBackend, ToricAllTwoBodyRdmsMatchDense) {
    const ToricLattice lat(2, 2);
    const auto st = toric_default_stabilizer_state(lat);
    const auto& psi = toric_dense().state;
    for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b) {
            const std::vector<int> sub{a, b};
            EXPECT_LT(max_abs_diff(stab_reduced_density_matrix(st, sub).matrix(), partial_trace(psi, sub).matrix()),
                      1e-12)
                << "subset " << a << "," << b;
        }
}

TEST(CrossBackend, DenseGroundStateIsTheDefaultStabilizerState) {
    const ToricLattice lat(2, 2);
    const auto psi = to_pure_state(toric_default_stabilizer_state(lat), lat.default_ordering());
    EXPECT_NEAR(std::abs(psi.overlap(toric_dense().state)), 1.0, 1e-10);
}

TEST(CrossBackend, SectorResolvedToricMatchesStabilizerConstruction) {
    const ToricLattice lat(2, 2);
    const auto w = lat.product(lat.vertical_cycle(0), 'Z');
    const auto h = lat.product(lat.horizontal_cycle(0), 'X');
    GroundStateOptions opt;
    opt.sectors = {{w, +1}, {h, -1}};
    const auto r = ground_state(build_toric(lat), lat.default_ordering(), opt);
    EXPECT_EQ(r.degeneracy, 1);
    const auto st = toric_stabilizer_state(lat, lat.vertical_cycle(0), +1, lat.horizontal_cycle(0), -1);
    const auto psi = to_pure_state(st, lat.default_ordering());
    EXPECT_NEAR(std::abs(psi.overlap(r.state)), 1.0, 1e-10);
}
