#include "qckit/embed.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qckit;

namespace {

// Two blocks with strong intra-block and weak inter-block similarity.
RMatrix two_blocks(int a, int b, double in = 0.9, double out = 0.05) {
    const int N = a + b;
    RMatrix k(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) k(i, j) = i == j ? 1.0 : ((i < a) == (j < a) ? in : out);
    return k;
}

RMatrix gaussian_gram(const RMatrix& x, double width) {
    const auto N = x.rows();
    RMatrix k(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) k(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / width);
    return k;
}

}  // namespace

TEST(DiffusionMap, TwoBlocksSeparateBySign) {
    const auto emb = diffusion_map(two_blocks(4, 6), {2});
    ASSERT_EQ(emb.coordinates.cols(), 1);
    for (int i = 0; i < 4; ++i)
        for (int j = 4; j < 10; ++j) EXPECT_LT(emb.coordinates(i, 0) * emb.coordinates(j, 0), 0.0);
    EXPECT_FALSE(emb.degenerate);
}

TEST(DiffusionMap, DisconnectedBlocksGiveBlockConstantCoordinate) {
    // Ones within blocks, zeros across: eigenvalue 1 is doubly degenerate, so any
    // second vector lies in the span of the block indicators.
    RMatrix k = RMatrix::Zero(7, 7);
    k.topLeftCorner(3, 3).setOnes();
    k.bottomRightCorner(4, 4).setOnes();
    const auto emb = diffusion_map(k, {2});
    EXPECT_TRUE(emb.spectrum_ties);
    for (int i = 1; i < 3; ++i) EXPECT_NEAR(emb.coordinates(i, 0), emb.coordinates(0, 0), 1e-10);
    for (int i = 4; i < 7; ++i) EXPECT_NEAR(emb.coordinates(i, 0), emb.coordinates(3, 0), 1e-10);
}

TEST(DiffusionMap, AllOnesKernelIsDegenerate) {
    const auto emb = diffusion_map(RMatrix::Ones(5, 5));
    EXPECT_TRUE(emb.degenerate);
    for (Eigen::Index i = 0; i < emb.coordinates.size(); ++i) EXPECT_TRUE(std::isfinite(emb.coordinates.data()[i]));
}

TEST(DiffusionMap, LeadingEigenpairIsTrivial) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    RMatrix x(12, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const RMatrix k = gaussian_gram(x, 2.0);
    const auto emb = diffusion_map(k, {1});
    EXPECT_NEAR(emb.eigenvalues[0], 1.0, 1e-12);
    // The trivial coordinate is constant, so standardization marks it degenerate.
    EXPECT_TRUE(emb.degenerate);
}

TEST(DiffusionMap, OperatorIsRowStochasticWithBoundedSpectrum) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        RMatrix x(15, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        const RMatrix p = diffusion_operator(gaussian_gram(x, 1.0 + trial));
        EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
        const Eigen::VectorXcd ev = p.eigenvalues();
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            EXPECT_LE(ev[i].real(), 1.0 + 1e-10);
            EXPECT_GE(ev[i].real(), -1.0 - 1e-10);
            EXPECT_NEAR(ev[i].imag(), 0.0, 1e-10);
        }
    }
}

TEST(DiffusionMap, Errors) {
    RMatrix asym = RMatrix::Identity(3, 3);
    asym(0, 1) = 0.5;
    EXPECT_THROW(diffusion_map(asym), ValidationError);
    RMatrix neg = RMatrix::Identity(3, 3);
    neg(0, 1) = neg(1, 0) = -0.1;
    EXPECT_THROW(diffusion_map(neg), ValidationError);
    EXPECT_THROW(diffusion_map(RMatrix::Identity(3, 3), {4}), ValidationError);
    EXPECT_THROW(diffusion_map(RMatrix(0, 0)), ValidationError);
}

TEST(KernelPca, TwoBlocksSeparateBySign) {
    const auto emb = kernel_pca(two_blocks(5, 3));
    for (int i = 0; i < 5; ++i)
        for (int j = 5; j < 8; ++j) EXPECT_LT(emb.coordinates(i, 0) * emb.coordinates(j, 0), 0.0);
    EXPECT_FALSE(emb.degenerate);
}

TEST(KernelPca, AllOnesKernelIsDegenerate) {
    const auto emb = kernel_pca(RMatrix::Ones(4, 4));
    EXPECT_TRUE(emb.degenerate);
    EXPECT_THROW(kernel_pca(RMatrix::Ones(4, 4), 5), ValidationError);
}

TEST(KernelPca, CenteringIsIdempotentAndShiftInvariant) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    RMatrix x(10, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const RMatrix k = gaussian_gram(x, 3.0);
    const RMatrix c = double_center(k);
    EXPECT_LT((double_center(c) - c).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT(c.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    const auto a = kernel_pca(k, 2);
    const auto b = kernel_pca((k.array() + 0.7).matrix(), 2);
    EXPECT_LT((a.coordinates - b.coordinates).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(KMeans, CollinearPointsExactClusters) {
    RMatrix x(3, 1);
    x << 0.0, 10.0, 20.0;
    const auto r = kmeans(x, 3, 5);
    EXPECT_EQ(r.inertia, 0.0);
    EXPECT_TRUE(same_partition(r.labels, {0, 1, 2}));
}

TEST(KMeans, DuplicatePointsShareLabels) {
    RMatrix x(6, 2);
    x << 0, 0, 0, 0, 0, 0, 5, 5, 5, 5, 5, 5;
    const auto r = kmeans(x, 2, 1);
    EXPECT_TRUE(same_partition(r.labels, {0, 0, 0, 1, 1, 1}));
    EXPECT_EQ(r.inertia, 0.0);
    for (int c = 0; c < 2; ++c) {
        const double v = r.centers(c, 0);
        EXPECT_TRUE(v == 0.0 || v == 5.0);
        EXPECT_EQ(r.centers(c, 1), v);
    }
    // More clusters than distinct points still yields a valid labelling.
    const auto r4 = kmeans(x, 4, 1);
    EXPECT_EQ(r4.labels.size(), 6u);
}

TEST(KMeans, RecoversSeparatedBlobs) {
    std::vector<int> truth;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 20; ++i) truth.push_back(c);
    int recovered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed + 1000);
        std::normal_distribution<double> g(0.0, 0.1);
        RMatrix x(60, 2);
        for (int i = 0; i < 60; ++i) {
            const double cx = 5.0 * (truth[static_cast<std::size_t>(i)] % 2), cy = 5.0 * (truth[static_cast<std::size_t>(i)] / 2);
            x(i, 0) = cx + g(rng);
            x(i, 1) = cy + g(rng);
        }
        recovered += same_partition(kmeans(x, 3, seed).labels, truth);
    }
    EXPECT_EQ(recovered, 100);
}

TEST(KMeans, InertiaNonIncreasingAcrossIterations) {
    std::mt19937_64 data(7);
    std::normal_distribution<double> g;
    RMatrix x(200, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(data);
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::mt19937_64 rng(s);
        std::vector<double> hist;
        detail::lloyd(x, 5, rng, {}, &hist);
        ASSERT_FALSE(hist.empty());
        for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1] * (1.0 + 1e-12));
    }
}

TEST(KMeans, ErrorsAndDeterminism) {
    RMatrix x(3, 1);
    x << 1.0, 2.0, 3.0;
    EXPECT_THROW(kmeans(x, 4, 1), ValidationError);
    EXPECT_THROW(kmeans(x, 0, 1), ValidationError);
    EXPECT_THROW(kmeans(RMatrix(0, 1), 1, 1), ValidationError);
    RMatrix bad = x;
    bad(1, 0) = std::nan("");
    EXPECT_THROW(kmeans(bad, 2, 1), ValidationError);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    RMatrix y(50, 2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = g(rng);
    const auto a = kmeans(y, 4, 11), b = kmeans(y, 4, 11);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.inertia, b.inertia);
}

TEST(SamePartition, IgnoresLabelNames) {
    EXPECT_TRUE(same_partition({0, 0, 1, 2}, {2, 2, 0, 1}));
    EXPECT_FALSE(same_partition({0, 0, 1}, {0, 1, 1}));
    EXPECT_FALSE(same_partition({0}, {0, 0}));
}
