#pragma once

#include "qckit/common.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace qckit {

using LinearMap = std::function<CVector(const CVector&)>;

struct EigenPair {
    double value = 0.0;
    CVector vector;
    double residual = 0.0;
};

struct LanczosOptions {
    int krylov_dim = 120;
    int max_restarts = 200;
    double tol = 1e-9;  // on ||Av - lambda v||
    std::uint64_t start_seed = 0x5eedULL;
};

namespace detail {

inline void project_out(CVector& w, const std::vector<CVector>& basis) {
    for (const auto& q : basis) w -= q * q.dot(w);
}

}  // namespace detail

/// Lowest eigenpair of a Hermitian map restricted to the orthogonal complement
/// of `deflate` (which must span an invariant subspace). Explicitly restarted
/// Lanczos with full reorthogonalization.
inline EigenPair lanczos_lowest(const LinearMap& apply, Eigen::Index dim, const std::vector<CVector>& deflate,
                                const LanczosOptions& opt = {}) {
    // A fresh start vector per deflation round: reusing one would leave no component
    // along the remaining degenerate directions once its own projection is deflated.
    std::mt19937_64 rng(derive_seed(opt.start_seed, deflate.size()));
    std::normal_distribution<double> gauss;
    CVector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = Complex{gauss(rng), gauss(rng)};
    detail::project_out(v, deflate);
    v.normalize();

    const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, dim - static_cast<Eigen::Index>(deflate.size())));
    if (m_max < 1) throw ValidationError("lanczos_lowest: nothing left after deflation");
    EigenPair best;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        std::vector<CVector> basis{v};
        std::vector<double> alpha, beta;
        for (int j = 0; j < m_max; ++j) {
            CVector w = apply(basis.back());
            detail::project_out(w, deflate);
            alpha.push_back(basis.back().dot(w).real());
            for (int pass = 0; pass < 2; ++pass) detail::project_out(w, basis);
            const double b = w.norm();
            if (b < 1e-13 || j + 1 == m_max) break;
            beta.push_back(b);
            basis.push_back(w / b);
        }
        const auto m = static_cast<Eigen::Index>(alpha.size());
        RMatrix t = RMatrix::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<RMatrix> es(t);
        const RVector y = es.eigenvectors().col(0);
        CVector x = CVector::Zero(dim);
        for (Eigen::Index i = 0; i < m; ++i) x += y[i] * basis[static_cast<std::size_t>(i)];
        detail::project_out(x, deflate);
        x.normalize();
        const CVector ax = apply(x);
        const double theta = x.dot(ax).real();
        best = {theta, x, (ax - theta * x).norm()};
        if (best.residual <= opt.tol) return best;
        v = x;
    }
    throw NumericalError("lanczos_lowest: no convergence (residual " + std::to_string(best.residual) + ")");
}

}  // namespace qckit
