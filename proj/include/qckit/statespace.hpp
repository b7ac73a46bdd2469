#pragma once

#include "qckit/common.hpp"

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qckit {

/// Bijection from lattice sites (qubit labels 0..n-1) to chain positions.
class ChainOrdering {
public:
    ChainOrdering() = default;

    /// `position_of_site[s]` is the chain position of site s.
    explicit ChainOrdering(std::vector<int> position_of_site) : position_(std::move(position_of_site)) {
        const int n = static_cast<int>(position_.size());
        if (n < 1) throw ValidationError("ChainOrdering: empty ordering");
        site_.assign(position_.size(), -1);
        for (int s = 0; s < n; ++s) {
            const int p = position_[static_cast<std::size_t>(s)];
            if (p < 0 || p >= n || site_[static_cast<std::size_t>(p)] != -1)
                throw ValidationError("ChainOrdering: not a permutation of 0..n-1");
            site_[static_cast<std::size_t>(p)] = s;
        }
    }

    static ChainOrdering identity(int n) {
        std::vector<int> p(static_cast<std::size_t>(n));
        std::iota(p.begin(), p.end(), 0);
        return ChainOrdering(std::move(p));
    }

    /// Row-major snake over a rows x cols grid whose sites are numbered row-major:
    /// even rows run left to right, odd rows right to left.
    static ChainOrdering snake(int rows, int cols) {
        std::vector<int> p(static_cast<std::size_t>(rows * cols));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                p[static_cast<std::size_t>(r * cols + c)] = r * cols + (r % 2 == 0 ? c : cols - 1 - c);
        return ChainOrdering(std::move(p));
    }

    int size() const { return static_cast<int>(position_.size()); }
    int position_of(int site) const { return position_.at(static_cast<std::size_t>(site)); }
    int site_at(int position) const { return site_.at(static_cast<std::size_t>(position)); }
    const std::vector<int>& positions() const { return position_; }

    /// Sites occupying chain positions [0, k).
    std::vector<int> prefix(int k) const { return {site_.begin(), site_.begin() + k}; }

    friend bool operator==(const ChainOrdering&, const ChainOrdering&) = default;

private:
    std::vector<int> position_;
    std::vector<int> site_;
};

/// Normalized state vector over n qubits, qubit 0 being the most significant
/// bit of the basis index.
class PureState {
public:
    PureState(int n, CVector amplitudes) : PureState(n, std::move(amplitudes), ChainOrdering::identity(n)) {}

    PureState(int n, CVector amplitudes, ChainOrdering ordering)
        : n_(n), amps_(std::move(amplitudes)), ordering_(std::move(ordering)) {
        if (n < 1 || n > 30) throw ValidationError("PureState: qubit count out of range");
        if (static_cast<std::size_t>(amps_.size()) != dim_of(n))
            throw ValidationError("PureState: amplitude vector length must be 2^n");
        if (ordering_.size() != n) throw ValidationError("PureState: ordering size mismatch");
        if (!amps_.allFinite()) throw ValidationError("PureState: non-finite amplitude");
        if (std::abs(amps_.norm() - 1.0) > kNormTol) throw ValidationError("PureState: amplitudes not normalized");
    }

    /// Normalizes first; rejects a zero vector.
    static PureState normalized(int n, CVector amplitudes, ChainOrdering ordering) {
        const double nrm = amplitudes.norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("PureState: cannot normalize zero vector");
        amplitudes /= nrm;
        return {n, std::move(amplitudes), std::move(ordering)};
    }
    static PureState normalized(int n, CVector amplitudes) {
        return normalized(n, std::move(amplitudes), ChainOrdering::identity(n));
    }

    static PureState basis(int n, std::uint64_t index, ChainOrdering ordering) {
        CVector v = CVector::Zero(static_cast<Eigen::Index>(dim_of(n)));
        v[static_cast<Eigen::Index>(index)] = 1.0;
        return {n, std::move(v), std::move(ordering)};
    }
    static PureState basis(int n, std::uint64_t index) { return basis(n, index, ChainOrdering::identity(n)); }

    int num_qubits() const { return n_; }
    const CVector& amplitudes() const { return amps_; }
    const ChainOrdering& ordering() const { return ordering_; }

    PureState with_ordering(ChainOrdering ordering) const { return {n_, amps_, std::move(ordering)}; }

    Complex overlap(const PureState& other) const { return amps_.dot(other.amps_); }

private:
    int n_;
    CVector amps_;
    ChainOrdering ordering_;
};

/// Hermitian, PSD, unit-trace matrix on an ordered list of qubit labels. The
/// first label is the most significant bit of the matrix index.
class DensityMatrix {
public:
    DensityMatrix(std::vector<int> support, CMatrix matrix) : support_(std::move(support)), m_(std::move(matrix)) {
        const std::size_t d = dim_of(static_cast<int>(support_.size()));
        if (support_.empty()) throw ValidationError("DensityMatrix: empty support");
        if (m_.rows() != m_.cols() || static_cast<std::size_t>(m_.rows()) != d)
            throw ValidationError("DensityMatrix: matrix dimension must be 2^|support|");
        if (!m_.allFinite()) throw ValidationError("DensityMatrix: non-finite entry");
        if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol)
            throw ValidationError("DensityMatrix: not Hermitian within tolerance");
        if (std::abs(m_.trace() - Complex{1.0, 0.0}) > kTraceTol)
            throw ValidationError("DensityMatrix: trace differs from 1");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < kPsdFloor)
            throw ValidationError("DensityMatrix: negative eigenvalue below PSD floor");
    }

    static DensityMatrix from_pure(const PureState& psi) {
        std::vector<int> sup(static_cast<std::size_t>(psi.num_qubits()));
        std::iota(sup.begin(), sup.end(), 0);
        return {std::move(sup), psi.amplitudes() * psi.amplitudes().adjoint()};
    }

    int num_qubits() const { return static_cast<int>(support_.size()); }
    const std::vector<int>& support() const { return support_; }
    const CMatrix& matrix() const { return m_; }

private:
    std::vector<int> support_;
    CMatrix m_;
};

/// Entropies S_1..S_{n-1} in nats across the chain cuts.
struct EntanglementProfile {
    std::vector<double> entropies;

    int num_qubits() const { return static_cast<int>(entropies.size()) + 1; }

    /// 0 <= S_k <= min(k, n-k) ln 2 (with slack `tol`).
    bool within_bounds(double tol = 1e-10) const {
        const int n = num_qubits();
        for (int k = 1; k < n; ++k) {
            const double s = entropies[static_cast<std::size_t>(k - 1)];
            if (s < -tol || s > std::min(k, n - k) * std::log(2.0) + tol) return false;
        }
        return true;
    }

    friend bool operator==(const EntanglementProfile&, const EntanglementProfile&) = default;
};

namespace detail {

inline void check_subset(int n, std::span<const int> keep, const char* what) {
    if (keep.empty()) throw ValidationError(std::string(what) + ": empty subset");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int q : keep) {
        if (q < 0 || q >= n) throw ValidationError(std::string(what) + ": qubit index out of range");
        if (seen[static_cast<std::size_t>(q)]) throw ValidationError(std::string(what) + ": repeated qubit index");
        seen[static_cast<std::size_t>(q)] = true;
    }
}

/// Gathers the bits of `index` at the given qubits (first listed = MSB).
inline std::uint64_t gather_bits(int n, std::uint64_t index, std::span<const int> qubits) {
    std::uint64_t out = 0;
    for (int q : qubits) out = (out << 1) | ((index >> bit_of(n, q)) & 1u);
    return out;
}

inline std::vector<int> complement(int n, std::span<const int> keep) {
    std::vector<bool> in(static_cast<std::size_t>(n), false);
    for (int q : keep) in[static_cast<std::size_t>(q)] = true;
    std::vector<int> rest;
    for (int q = 0; q < n; ++q)
        if (!in[static_cast<std::size_t>(q)]) rest.push_back(q);
    return rest;
}

/// Amplitudes reshaped into a (kept x traced) matrix.
inline CMatrix bipartition(const PureState& psi, std::span<const int> keep) {
    const int n = psi.num_qubits();
    const std::vector<int> rest = complement(n, keep);
    const auto rows = static_cast<Eigen::Index>(dim_of(static_cast<int>(keep.size())));
    const auto cols = static_cast<Eigen::Index>(dim_of(static_cast<int>(rest.size())));
    CMatrix m = CMatrix::Zero(rows, cols);
    const auto& a = psi.amplitudes();
    for (std::uint64_t b = 0; b < dim_of(n); ++b)
        m(static_cast<Eigen::Index>(gather_bits(n, b, keep)), static_cast<Eigen::Index>(gather_bits(n, b, rest))) =
            a[static_cast<Eigen::Index>(b)];
    return m;
}

}  // namespace detail

/// Reduced density matrix on `keep` (output ordered as listed).
inline DensityMatrix partial_trace(const PureState& psi, std::span<const int> keep) {
    detail::check_subset(psi.num_qubits(), keep, "partial_trace");
    const CMatrix m = detail::bipartition(psi, keep);
    CMatrix rho = m * m.adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return {std::vector<int>(keep.begin(), keep.end()), std::move(rho)};
}

/// `keep` holds qubit labels drawn from the input's support.
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
    const auto& sup = rho.support();
    const int n = rho.num_qubits();
    if (keep.empty()) throw ValidationError("partial_trace: empty subset");
    std::vector<int> local;
    for (int label : keep) {
        auto it = std::find(sup.begin(), sup.end(), label);
        if (it == sup.end()) throw ValidationError("partial_trace: qubit not in support");
        local.push_back(static_cast<int>(it - sup.begin()));
    }
    detail::check_subset(n, local, "partial_trace");
    const std::vector<int> rest = detail::complement(n, local);
    const auto dk = static_cast<Eigen::Index>(dim_of(static_cast<int>(local.size())));
    CMatrix out = CMatrix::Zero(dk, dk);
    const std::uint64_t d = dim_of(n);
    for (std::uint64_t i = 0; i < d; ++i) {
        const std::uint64_t ci = detail::gather_bits(n, i, rest);
        const auto ai = static_cast<Eigen::Index>(detail::gather_bits(n, i, local));
        for (std::uint64_t j = 0; j < d; ++j) {
            if (detail::gather_bits(n, j, rest) != ci) continue;
            out(ai, static_cast<Eigen::Index>(detail::gather_bits(n, j, local))) +=
                rho.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return {std::vector<int>(keep.begin(), keep.end()), std::move(out)};
}

/// F = tr sqrt(sqrt(rho) sigma sqrt(rho)) = ||A^dag B||_1 for rho = A A^dag, sigma = B B^dag.
/// Working with rank factors avoids square roots of round-off eigenvalues.
inline double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.matrix().rows() != sigma.matrix().rows())
        throw ValidationError("uhlmann_fidelity: dimension mismatch");
    if (rho.matrix() == sigma.matrix()) return std::clamp(rho.matrix().trace().real(), 0.0, 1.0);
    const CMatrix a = psd_factor(rho.matrix());
    const CMatrix b = psd_factor(sigma.matrix());
    if (a.cols() == 0 || b.cols() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(a.adjoint() * b);
    return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

/// D_B = min_U ||A - B U||_F over unitaries U, attained at U = V W^dag for
/// A^dag B = W S V^dag. Equal to sqrt(2 - 2F) for unit-trace states, without
/// the cancellation in 1 - F when the states are close.
inline double bures_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.matrix().rows() != sigma.matrix().rows())
        throw ValidationError("bures_distance: dimension mismatch");
    if (rho.matrix() == sigma.matrix()) return 0.0;
    const CMatrix fa = psd_factor(rho.matrix());
    const CMatrix fb = psd_factor(sigma.matrix());
    // Zero-pad both factors to a common width so U can be square.
    const Eigen::Index r = std::max<Eigen::Index>({fa.cols(), fb.cols(), 1});
    CMatrix a = CMatrix::Zero(fa.rows(), r), b = CMatrix::Zero(fb.rows(), r);
    a.leftCols(fa.cols()) = fa;
    b.leftCols(fb.cols()) = fb;
    Eigen::JacobiSVD<CMatrix> svd(a.adjoint() * b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return (a - b * svd.matrixV() * svd.matrixU().adjoint()).norm();
}

/// -sum p ln p over a spectrum, dropping p < 1e-14.
inline double von_neumann_entropy(const RVector& spectrum) {
    double s = 0.0;
    for (double p : spectrum)
        if (p >= kEntropyCutoff) s -= p * std::log(p);
    return std::max(s, 0.0);
}

inline double von_neumann_entropy(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
    return von_neumann_entropy(es.eigenvalues());
}

/// Entropy of the first k chain positions (nats), k in [1, n-1].
inline double entanglement_entropy(const PureState& psi, int cut) {
    const int n = psi.num_qubits();
    if (cut < 1 || cut > n - 1) throw ValidationError("entanglement_entropy: cut out of range");
    const std::vector<int> block = psi.ordering().prefix(cut);
    const CMatrix m = detail::bipartition(psi, block);
    // Gram matrix on the smaller side; both sides share the nonzero spectrum.
    const CMatrix gram = m.rows() <= m.cols() ? CMatrix(m * m.adjoint()) : CMatrix(m.adjoint() * m);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(gram, Eigen::EigenvaluesOnly);
    return von_neumann_entropy(es.eigenvalues());
}

inline EntanglementProfile entanglement_profile(const PureState& psi) {
    EntanglementProfile p;
    for (int k = 1; k < psi.num_qubits(); ++k) p.entropies.push_back(entanglement_entropy(psi, k));
    return p;
}

}  // namespace qckit
