#pragma once

#include "qckit/common.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace qckit {

struct EmbeddingResult {
    RMatrix coordinates;               // N x d
    std::vector<double> eigenvalues;   // of the used eigenvectors
    std::vector<int> indices;          // 1-based eigenvector indices (diffusion: 1 = trivial)
    std::string method;
    bool degenerate = false;           // zero-variance dimension or zero eigenvalue used
    bool spectrum_ties = false;        // used eigenvalue within 1e-10 of a neighbour
};

struct ClusterAssignment {
    std::vector<int> labels;
    RMatrix centers;  // k x d
    double inertia = 0.0;
};

namespace detail {

inline void check_symmetric(const RMatrix& k, const char* what) {
    if (k.rows() != k.cols() || k.rows() == 0) throw ValidationError(std::string(what) + ": matrix must be square and nonempty");
    if (!k.allFinite()) throw ValidationError(std::string(what) + ": non-finite entry");
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw ValidationError(std::string(what) + ": matrix is not symmetric");
}

/// Largest-magnitude entry made positive.
inline void fix_sign(Eigen::Ref<RVector> v) {
    Eigen::Index idx = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > best + 1e-12) {
            best = std::abs(v[i]);
            idx = i;
        }
    if (v[idx] < 0) v = -v;
}

/// Divides each column by its population standard deviation; flags zero variance.
inline bool standardize(RMatrix& c) {
    bool degenerate = false;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        const double mean = c.col(j).mean();
        const double var = (c.col(j).array() - mean).square().mean();
        if (var <= 1e-24) {
            degenerate = true;
            continue;
        }
        c.col(j) /= std::sqrt(var);
    }
    return degenerate;
}

inline bool has_tie(const RVector& evals, Eigen::Index i) {
    return (i > 0 && std::abs(evals[i] - evals[i - 1]) <= 1e-10) ||
           (i + 1 < evals.size() && std::abs(evals[i] - evals[i + 1]) <= 1e-10);
}

}  // namespace detail

/// Row-stochastic diffusion operator P = D^{-1} K.
inline RMatrix diffusion_operator(const RMatrix& k) {
    detail::check_symmetric(k, "diffusion_map");
    if ((k.array() < 0).any()) throw ValidationError("diffusion_map: kernel has negative entries");
    const RVector d = k.rowwise().sum();
    if ((d.array() <= 0).any()) throw ValidationError("diffusion_map: zero row sum");
    return d.cwiseInverse().asDiagonal() * k;
}

/// Diffusion-map embedding with diffusion time 1. Eigenvectors of P are obtained
/// from the symmetric conjugate D^{-1/2} K D^{-1/2}; `indices` are 1-based in
/// descending eigenvalue order (index 1 is the trivial constant vector).
inline EmbeddingResult diffusion_map(const RMatrix& k, std::vector<int> indices = {2, 3}) {
    detail::check_symmetric(k, "diffusion_map");
    if ((k.array() < 0).any()) throw ValidationError("diffusion_map: kernel has negative entries");
    const RVector d = k.rowwise().sum();
    if ((d.array() <= 0).any()) throw ValidationError("diffusion_map: zero row sum");
    const auto N = k.rows();
    for (int idx : indices)
        if (idx < 1 || idx > N) throw ValidationError("diffusion_map: eigenvector index out of range");
    const RVector dis = d.cwiseSqrt().cwiseInverse();
    RMatrix a = dis.asDiagonal() * k * dis.asDiagonal();
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<RMatrix> es(a);
    // Descending order.
    const RVector evals = es.eigenvalues().reverse();
    const RMatrix evecs = es.eigenvectors().rowwise().reverse();

    EmbeddingResult out;
    out.method = "diffusion_map";
    out.indices = indices;
    out.coordinates.resize(N, static_cast<Eigen::Index>(indices.size()));
    for (std::size_t c = 0; c < indices.size(); ++c) {
        const Eigen::Index i = indices[c] - 1;
        RVector psi = dis.asDiagonal() * evecs.col(i);
        detail::fix_sign(psi);
        out.coordinates.col(static_cast<Eigen::Index>(c)) = evals[i] * psi;
        out.eigenvalues.push_back(evals[i]);
        if (std::abs(evals[i]) <= 1e-10) out.degenerate = true;
        if (detail::has_tie(evals, i)) out.spectrum_ties = true;
    }
    if (detail::standardize(out.coordinates)) out.degenerate = true;
    return out;
}

/// Double centering: K - row means - column means + grand mean.
inline RMatrix double_center(const RMatrix& k) {
    const RVector row = k.rowwise().mean();
    const RVector col = k.colwise().mean().transpose();
    const double grand = k.mean();
    RMatrix c = k;
    c.colwise() -= row;
    c.rowwise() -= col.transpose();
    c.array() += grand;
    return c;
}

/// Kernel PCA: top `dims` eigenvectors of the centered kernel scaled by
/// sqrt(eigenvalue), then standardized per dimension.
inline EmbeddingResult kernel_pca(const RMatrix& k, int dims = 1) {
    detail::check_symmetric(k, "kernel_pca");
    const auto N = k.rows();
    if (dims < 1 || dims > N) throw ValidationError("kernel_pca: dims out of range");
    RMatrix c = double_center(k);
    c = 0.5 * (c + c.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<RMatrix> es(c);
    const RVector evals = es.eigenvalues().reverse();
    const RMatrix evecs = es.eigenvectors().rowwise().reverse();
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());

    EmbeddingResult out;
    out.method = "kernel_pca";
    out.coordinates.resize(N, dims);
    for (int c2 = 0; c2 < dims; ++c2) {
        RVector v = evecs.col(c2);
        detail::fix_sign(v);
        const double lam = evals[c2];
        out.coordinates.col(c2) = std::sqrt(std::max(lam, 0.0)) * v;
        out.eigenvalues.push_back(lam);
        out.indices.push_back(c2 + 1);
        if (lam <= 1e-12 * scale * static_cast<double>(N)) out.degenerate = true;
        if (detail::has_tie(evals, c2)) out.spectrum_ties = true;
    }
    if (detail::standardize(out.coordinates)) out.degenerate = true;
    return out;
}

struct KMeansOptions {
    int restarts = 10;
    int max_iter = 300;
    double rel_tol = 1e-8;
};

namespace detail {

inline double sq_dist(const RMatrix& a, Eigen::Index i, const RMatrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

/// One k-means++ seeded Lloyd run. `history` receives the inertia after each iteration.
inline ClusterAssignment lloyd(const RMatrix& x, int k, std::mt19937_64& rng, const KMeansOptions& opt,
                               std::vector<double>* history) {
    const auto N = x.rows();
    RMatrix centers(k, x.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, N - 1);
    centers.row(0) = x.row(first(rng));
    RVector dmin(N);
    for (Eigen::Index i = 0; i < N; ++i) dmin[i] = sq_dist(x, i, centers, 0);
    for (int c = 1; c < k; ++c) {
        const double total = dmin.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng), acc = 0.0;
            pick = N - 1;
            for (Eigen::Index i = 0; i < N; ++i) {
                acc += dmin[i];
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        centers.row(c) = x.row(pick);
        for (Eigen::Index i = 0; i < N; ++i) dmin[i] = std::min(dmin[i], sq_dist(x, i, centers, c));
    }

    std::vector<int> labels(static_cast<std::size_t>(N), 0);
    double prev = std::numeric_limits<double>::infinity(), inertia = 0.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        inertia = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            int best = 0;
            double bd = sq_dist(x, i, centers, 0);
            for (int c = 1; c < k; ++c) {
                const double dd = sq_dist(x, i, centers, c);
                if (dd < bd) {
                    bd = dd;
                    best = c;
                }
            }
            labels[static_cast<std::size_t>(i)] = best;
            inertia += bd;
        }
        // Refill empty clusters with the point farthest from its center.
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index far = 0;
            double fd = -1.0;
            for (Eigen::Index i = 0; i < N; ++i) {
                const int l = labels[static_cast<std::size_t>(i)];
                if (counts[static_cast<std::size_t>(l)] <= 1) continue;
                const double dd = sq_dist(x, i, centers, l);
                if (dd > fd) {
                    fd = dd;
                    far = i;
                }
            }
            --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
            labels[static_cast<std::size_t>(far)] = c;
            ++counts[static_cast<std::size_t>(c)];
        }
        centers.setZero();
        for (Eigen::Index i = 0; i < N; ++i) centers.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        for (int c = 0; c < k; ++c) centers.row(c) /= counts[static_cast<std::size_t>(c)];
        inertia = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) inertia += sq_dist(x, i, centers, labels[static_cast<std::size_t>(i)]);
        if (history) history->push_back(inertia);
        if (std::abs(prev - inertia) <= opt.rel_tol * std::max(inertia, 1e-300) || inertia == 0.0) break;
        prev = inertia;
    }
    return {std::move(labels), std::move(centers), inertia};
}

}  // namespace detail

/// k-means++ initialisation, Lloyd iterations, best of `restarts` seeded runs.
inline ClusterAssignment kmeans(const RMatrix& coords, int k, std::uint64_t seed, const KMeansOptions& opt = {}) {
    if (coords.rows() == 0) throw ValidationError("kmeans: empty input");
    if (k < 1 || k > coords.rows()) throw ValidationError("kmeans: k must be in [1, N]");
    if (!coords.allFinite()) throw ValidationError("kmeans: non-finite coordinates");
    ClusterAssignment best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, opt.restarts); ++r) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        auto run = detail::lloyd(coords, k, rng, opt, nullptr);
        if (run.inertia < best.inertia - 1e-12) best = std::move(run);
    }
    return best;
}

/// True when two labelings induce the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j)
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    return true;
}

}  // namespace qckit
