#pragma once

#include "qckit/statespace.hpp"

#include <random>

namespace qckit::testing {

/// Complex Ginibre factor G (d x rank) scaled so that G G^dag has unit trace.
inline CMatrix random_factor(int n, std::mt19937_64& rng, int rank = 0) {
    const auto d = static_cast<Eigen::Index>(dim_of(n));
    const Eigen::Index r = rank > 0 ? rank : d;
    std::normal_distribution<double> g;
    CMatrix m(d, r);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < r; ++j) m(i, j) = Complex{g(rng), g(rng)};
    return m / m.norm();
}

inline DensityMatrix mixed_from_factor(int n, const CMatrix& m) {
    CMatrix rho = m * m.adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    std::vector<int> sup(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) sup[static_cast<std::size_t>(q)] = q;
    return {sup, rho};
}

/// Mixed state rho = G G^dag / tr, G a complex Ginibre matrix of the given rank.
inline DensityMatrix random_mixed(int n, std::mt19937_64& rng, int rank = 0) {
    return mixed_from_factor(n, random_factor(n, rng, rank));
}

inline PureState random_pure(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CVector v(static_cast<Eigen::Index>(dim_of(n)));
    for (auto& a : v) a = Complex{g(rng), g(rng)};
    return PureState::normalized(n, v);
}

/// Amplitudes of a tensor product, first factor on qubit 0.
inline CVector kron(const CVector& a, const CVector& b) {
    CVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
    return out;
}

inline CVector ket(std::initializer_list<Complex> amps) {
    CVector v(static_cast<Eigen::Index>(amps.size()));
    Eigen::Index i = 0;
    for (auto a : amps) v[i++] = a;
    return v;
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace qckit::testing
