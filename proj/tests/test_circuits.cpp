#include "qckit/circuits.hpp"
#include "qckit/models.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace qckit;
using qckit::testing::random_pure;

namespace {

const double kLn2 = std::log(2.0);

PauliString P(const char* s) { return PauliString::parse(s); }

double infidelity(const PureState& a, const PureState& b) { return 1.0 - std::norm(a.overlap(b)); }

}  // namespace

TEST(Haar, UnitaryWithUnitDeterminant) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Matrix4c u = haar_two_qubit(rng);
        EXPECT_LT((u.adjoint() * u - Matrix4c::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(std::abs(u.determinant()), 1.0, 1e-12);
    }
}

TEST(Haar, SecondMomentOfEntries) {
    // E|U_ij|^2 = 1/4 for Haar U(4); |U_00|^2 ~ Beta(1, 3), variance 3/80.
    std::mt19937_64 rng(2);
    const int draws = 10000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) sum += std::norm(haar_two_qubit(rng)(0, 0));
    const double se = std::sqrt(3.0 / 80.0 / draws);
    EXPECT_NEAR(sum / draws, 0.25, 3.0 * se);
}

TEST(Brickwork, DepthZeroIsIdentityAndNormPreserved) {
    std::mt19937_64 rng(3);
    const auto psi = random_pure(6, rng);
    EXPECT_EQ(apply_brickwork(psi, 0, 9).amplitudes(), psi.amplitudes());
    for (int d = 1; d <= 5; ++d) EXPECT_NEAR(apply_brickwork(psi, d, 9 + d).amplitudes().norm(), 1.0, 1e-10);
}

TEST(Brickwork, LayersAreDisjointAdjacentPairs) {
    const auto c = make_brickwork(7, 4, 11);
    ASSERT_EQ(c.layers.size(), 4u);
    for (std::size_t l = 0; l < c.layers.size(); ++l) {
        std::set<int> used;
        for (const auto& g : c.layers[l]) {
            EXPECT_EQ(g.position % 2, static_cast<int>(l % 2));
            EXPECT_TRUE(used.insert(g.position).second);
            EXPECT_TRUE(used.insert(g.position + 1).second);
            EXPECT_LT(g.position + 1, 7);
            EXPECT_LT((g.unitary.adjoint() * g.unitary - Matrix4c::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Brickwork, SingleLayerOnProductStateCapsEntanglement) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto psi = apply_brickwork(random_product_state(8, s), 1, 1000 + s);
        const auto p = entanglement_profile(psi);
        for (int k = 1; k < 8; ++k) {
            const double sk = p.entropies[static_cast<std::size_t>(k - 1)];
            EXPECT_LE(sk, 2.0 * kLn2 + 1e-10);
            // Layer 0 covers bonds (0,1), (2,3), ...: odd cuts sit inside a gate, even cuts between gates.
            if (k % 2 == 0) EXPECT_NEAR(sk, 0.0, 1e-10);
        }
    }
}

TEST(Brickwork, NeedsTwoQubits) {
    EXPECT_THROW(apply_brickwork(PureState::basis(1, 0), 1, 0), ValidationError);
    EXPECT_NO_THROW(apply_brickwork(PureState::basis(1, 0), 0, 0));
    EXPECT_THROW(make_brickwork(4, -1, 0), ValidationError);
}

TEST(Brickwork, FollowsChainOrdering) {
    // On the chain 0,2,1,3 the layer pairs qubits {0,2} and {1,3}, so both pairs stay pure.
    const PureState psi = PureState::basis(4, 0, ChainOrdering({0, 2, 1, 3}));
    const auto c = make_brickwork(4, 1, 5);
    const auto out = apply_circuit(psi, c);
    const auto r1 = partial_trace(out, std::vector<int>{0, 2});
    const auto r2 = partial_trace(out, std::vector<int>{1, 3});
    EXPECT_NEAR(von_neumann_entropy(r1), 0.0, 1e-10);
    EXPECT_NEAR(von_neumann_entropy(r2), 0.0, 1e-10);
}

TEST(Trotter, ZeroGeneratorIsConstant) {
    std::mt19937_64 rng(4);
    const auto psi = random_pure(3, rng);
    const auto states = trotter_evolve(psi, GeneratorPath::zero(3));
    ASSERT_EQ(states.size(), 2u);
    EXPECT_EQ(states.back().amplitudes(), psi.amplitudes());
}

TEST(Trotter, RabiRotation) {
    const GeneratorPath path(1, {{1.0, {{P("X"), std::numbers::pi / 2}}}});
    const auto out = trotter_evolve(PureState::basis(1, 0), path).back();
    EXPECT_NEAR(std::abs(out.amplitudes()[1]), 1.0, 1e-9);
    EXPECT_NEAR(out.amplitudes()[1].imag(), -1.0, 1e-9);
}

TEST(Trotter, FirstOrderConvergence) {
    // Smooth 2-qubit path with non-commuting terms; reference from a very fine slicing.
    const auto gen = [](double s) {
        return std::vector<PauliTerm>{{P("XI"), std::cos(3 * s)}, {P("ZZ"), 1.0 + s}, {P("IY"), std::sin(2 * s)}};
    };
    const auto psi0 = PureState::basis(2, 0);
    const auto ref = trotter_evolve(psi0, discretize_path(2, gen, 1 << 14)).back();
    std::vector<double> err;
    for (int m : {16, 32, 64, 128}) err.push_back(infidelity(trotter_evolve(psi0, discretize_path(2, gen, m)).back(), ref));
    for (std::size_t i = 0; i + 1 < err.size(); ++i) {
        const double ratio = err[i] / err[i + 1];
        EXPECT_GT(ratio, 3.0) << "m index " << i;
        EXPECT_LT(ratio, 5.0) << "m index " << i;
    }
}

TEST(GeneratorPath, Validation) {
    EXPECT_THROW(GeneratorPath(1, {}), ValidationError);
    EXPECT_THROW(GeneratorPath(1, {{0.5, {}}}), ValidationError);
    EXPECT_THROW(GeneratorPath(1, {{1.0, {{P("X"), std::nan("")}}}}), ValidationError);
    EXPECT_THROW(GeneratorPath(1, {{1.0, {{P("XX"), 1.0}}}}), ValidationError);
    EXPECT_THROW(GeneratorPath(1, {{1.5, {}}, {-0.5, {}}}), ValidationError);
}

TEST(GeneratorPath, RandomLocalPathsAreTwoLocal) {
    const auto ord = ChainOrdering::snake(2, 2);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto path = random_local_path(4, s, ord);
        EXPECT_EQ(path.locality(ord), 2);
        EXPECT_GE(path.segments().size(), 8u);
        EXPECT_LE(path.segments().size(), 32u);
        double total = 0.0;
        for (const auto& seg : path.segments()) total += seg.ds;
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(NielsenCost, ClosedForms) {
    EXPECT_NEAR(nielsen_path_cost(GeneratorPath(1, {{1.0, {{P("X"), -0.7}}}})), 0.7, 1e-15);
    EXPECT_EQ(nielsen_path_cost(GeneratorPath::zero(3)), 0.0);
    EXPECT_NEAR(nielsen_path_cost(GeneratorPath(1, {{0.5, {{P("X"), 1.0}}}, {0.5, {{P("X"), 2.0}}}})), 1.5, 1e-15);
}

TEST(QFI, EigenstateAndSuperposition) {
    const GeneratorPath path(1, {{1.0, {{P("Z"), 1.0}}}});
    const std::vector<PureState> plus{PureState::normalized(1, CVector::Ones(2)), PureState::normalized(1, CVector::Ones(2))};
    EXPECT_NEAR(qfi_along_path(plus, path)[0], 4.0, 1e-12);
    const std::vector<PureState> zero{PureState::basis(1, 0), PureState::basis(1, 0)};
    EXPECT_NEAR(qfi_along_path(zero, path)[0], 0.0, 1e-12);
    EXPECT_THROW(qfi_along_path(std::vector<PureState>{PureState::basis(1, 0)}, path), ValidationError);
}

TEST(QFI, BuresSusceptibility) {
    // (1/4) F_Q ds^2 - D_B^2 between psi and exp(-i ds G) psi must vanish faster than ds^2.
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto psi = random_pure(3, rng);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<PauliTerm> g{{P("XYI"), u(rng)}, {P("IZZ"), u(rng)}, {P("YIX"), u(rng)}};
        const double fq = qfi_along_path(std::vector<PureState>{psi, psi}, GeneratorPath(3, {{1.0, g}}))[0];
        double prev_c = -1.0;
        for (double ds = 1e-2; ds >= 0.99e-3; ds /= 2) {
            const PureState moved(3, evolution_operator(3, g, ds) * psi.amplitudes());
            const double db = bures_distance(DensityMatrix::from_pure(psi), DensityMatrix::from_pure(moved));
            const double c = std::abs(0.25 * fq * ds * ds - db * db) / (ds * ds * ds);
            EXPECT_TRUE(std::isfinite(c));
            if (prev_c >= 0.0) EXPECT_LT(c, prev_c + 1.0);
            prev_c = c;
        }
    }
}

TEST(QFC, GeodesicAndZeroPath) {
    const auto [path, psi0] = single_qubit_geodesic();
    const auto states = trotter_evolve(psi0, path);
    EXPECT_NEAR(qfc_path_cost(states, path), std::numbers::pi / 2, 1e-6);
    EXPECT_NEAR(std::abs(states.back().amplitudes()[1]), 1.0, 1e-12);
    const auto z = GeneratorPath::zero(2);
    EXPECT_EQ(qfc_path_cost(trotter_evolve(PureState::basis(2, 1), z), z), 0.0);
}

TEST(Theorem1, ZeroPathHoldsWithEquality) {
    std::mt19937_64 rng(7);
    const auto psi = random_pure(4, rng);
    const auto z = GeneratorPath::zero(4);
    const auto rep = verify_theorem1(z, trotter_evolve(psi, z));
    EXPECT_TRUE(rep.ok());
    for (const auto& [k, v] : rep.quantities)
        if (k != "locality") EXPECT_NEAR(v, 0.0, 1e-7) << k;
    for (const auto& [k, v] : rep.margins) EXPECT_NEAR(v, 0.0, 1e-7) << k;
    EXPECT_TRUE(rep.flags.at("equality_nielsen_qfc"));
}

TEST(Theorem1, GeodesicClosedForm) {
    const auto [path, psi0] = single_qubit_geodesic();
    const auto rep = verify_theorem1(path, trotter_evolve(psi0, path), 1);
    EXPECT_TRUE(rep.ok());
    EXPECT_NEAR(rep.quantities.at("nielsen_cost"), std::numbers::pi / 2, 1e-6);
    EXPECT_NEAR(rep.quantities.at("qfc_cost"), std::numbers::pi / 2, 1e-6);
    EXPECT_NEAR(rep.quantities.at("bures_bound"), 1.0, 1e-6);
    EXPECT_NEAR(rep.margins.at("nielsen_minus_qfc"), 0.0, 1e-6);
    EXPECT_NEAR(rep.margins.at("qfc_minus_bures"), std::numbers::pi / 2 - 1.0, 1e-6);
}

TEST(Theorem1, RandomLocalPathsHaveNoViolations) {
    const auto ord = ChainOrdering::identity(4);
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto psi = random_state(4, derive_seed(s, 0), ord);
        const auto path = random_local_path(4, derive_seed(s, 1), ord);
        const auto states = trotter_evolve(psi, path);
        const auto rep = verify_theorem1(path, states);
        EXPECT_TRUE(rep.ok()) << "seed " << s << ": " << (rep.violations.empty() ? "" : rep.violations[0]);
        EXPECT_LE(qfc_path_cost(states, path), nielsen_path_cost(path) + 1e-9);
    }
}

TEST(Theorem1, StateCountMismatch) {
    const auto z = GeneratorPath::zero(1);
    EXPECT_THROW(verify_theorem1(z, std::vector<PureState>{PureState::basis(1, 0)}), ValidationError);
}

TEST(GateGenerator, ExponentiatesBackToGate) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 50; ++i) {
        const Matrix4c u = haar_two_qubit(rng);
        const CMatrix v = evolution_operator(2, gate_generator(u), 1.0);
        // Equal up to a global phase.
        const Complex ph = (v.adjoint() * CMatrix(u)).trace() / 4.0;
        EXPECT_NEAR(std::abs(ph), 1.0, 1e-10);
        EXPECT_LT((v * ph - CMatrix(u)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Theorem2, IdentityCircuitChangesNothing) {
    const auto psi = random_product_state(6, 3);
    const auto rep = verify_theorem2(psi, make_brickwork(6, 0, 0));
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(rep.quantities.at("averaged_entanglement_change"), 0.0);
    const auto z = GeneratorPath::zero(6);
    const auto p = entanglement_profile(psi);
    EXPECT_EQ(verify_theorem2(z, p, p).quantities.at("averaged_entanglement_change"), 0.0);
}

TEST(Theorem2, SingleGateLocality) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        std::mt19937_64 rng(s);
        const auto psi = apply_brickwork(random_product_state(8, s), 2, derive_seed(s, 1));
        const int pos = static_cast<int>(s % 7);
        const BrickworkCircuit c{8, 1, s, {{BrickGate{pos, haar_two_qubit(rng)}}}};
        const auto rep = verify_theorem2(psi, c);
        EXPECT_TRUE(rep.ok()) << "seed " << s;
        EXPECT_LE(rep.quantities.at("max_uncrossed_drift"), 1e-10);
        EXPECT_LE(rep.quantities.at("max_crossed_change"), 2.0 * kLn2 + 1e-9);
    }
}

TEST(Theorem2, BrickworkChangeGrowsWithDepth) {
    // Averaged over seeds, entanglement change from a product state grows with depth;
    // the ratio nielsen / change is logged, never asserted against a constant.
    std::vector<double> mean_change;
    for (int d = 1; d <= 4; ++d) {
        double acc = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto rep = verify_theorem2(random_product_state(8, s), make_brickwork(8, d, derive_seed(s, d)));
            EXPECT_TRUE(rep.ok());
            EXPECT_GT(rep.quantities.at("c_upper_estimate"), 0.0);
            acc += rep.quantities.at("averaged_entanglement_change");
        }
        mean_change.push_back(acc / 10);
    }
    for (std::size_t i = 0; i + 1 < mean_change.size(); ++i) EXPECT_LT(mean_change[i], mean_change[i + 1]);
}

TEST(Theorem2, SizeMismatch) {
    EXPECT_THROW(verify_theorem2(PureState::basis(3, 0), make_brickwork(4, 1, 0)), ValidationError);
    const auto p = entanglement_profile(PureState::basis(3, 0));
    EXPECT_THROW(verify_theorem2(GeneratorPath::zero(4), p, p), ValidationError);
}
