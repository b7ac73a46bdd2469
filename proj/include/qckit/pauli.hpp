#pragma once

#include "qckit/common.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace qckit {

/// Hermitian Pauli string on up to 64 qubits.
///
/// Bits are stored in basis-index layout (qubit q at bit n-1-q). The operator is
/// i^{|x & z|} * prod_q X^{x_q} Z^{z_q}, which makes every letter Hermitian
/// (Y = iXZ).
class PauliString {
public:
    PauliString() = default;
    PauliString(int n, std::uint64_t x, std::uint64_t z) : n_(n), x_(x), z_(z) {
        if (n < 1 || n > 64) throw ValidationError("PauliString: qubit count must be in [1, 64]");
    }

    static PauliString identity(int n) { return {n, 0, 0}; }

    /// Parses "XIZY"-style text; character i acts on qubit i.
    static PauliString parse(std::string_view text) {
        const int n = static_cast<int>(text.size());
        PauliString p(n, 0, 0);
        for (int q = 0; q < n; ++q) p.set(q, text[static_cast<std::size_t>(q)]);
        return p;
    }

    /// Single-qubit letters placed on the given qubits.
    static PauliString on(int n, std::initializer_list<std::pair<int, char>> letters) {
        PauliString p(n, 0, 0);
        for (auto [q, c] : letters) p.set(q, c);
        return p;
    }

    void set(int q, char letter) {
        if (q < 0 || q >= n_) throw ValidationError("PauliString: qubit index out of range");
        const std::uint64_t bit = std::uint64_t{1} << bit_of(n_, q);
        x_ &= ~bit;
        z_ &= ~bit;
        switch (letter) {
            case 'I': break;
            case 'X': x_ |= bit; break;
            case 'Z': z_ |= bit; break;
            case 'Y': x_ |= bit; z_ |= bit; break;
            default: throw ValidationError(std::string("PauliString: bad letter '") + letter + "'");
        }
    }

    char letter(int q) const {
        const std::uint64_t bit = std::uint64_t{1} << bit_of(n_, q);
        const bool xb = x_ & bit, zb = z_ & bit;
        return xb ? (zb ? 'Y' : 'X') : (zb ? 'Z' : 'I');
    }

    int num_qubits() const { return n_; }
    std::uint64_t x_mask() const { return x_; }
    std::uint64_t z_mask() const { return z_; }
    bool is_identity() const { return (x_ | z_) == 0; }
    int weight() const { return popcount(x_ | z_); }

    std::vector<int> support() const {
        std::vector<int> s;
        for (int q = 0; q < n_; ++q)
            if (letter(q) != 'I') s.push_back(q);
        return s;
    }

    bool commutes_with(const PauliString& o) const {
        return (popcount(x_ & o.z_) + popcount(z_ & o.x_)) % 2 == 0;
    }

    /// Amplitude of P|b>: P|b> = phase(b) |b ^ x>.
    Complex phase(std::uint64_t b) const {
        static constexpr std::array<Complex, 4> kPow{Complex{1, 0}, Complex{0, 1}, Complex{-1, 0},
                                                     Complex{0, -1}};
        int r = popcount(x_ & z_) + 2 * popcount(b & z_);
        return kPow[static_cast<std::size_t>(r & 3)];
    }

    std::string str() const {
        std::string s(static_cast<std::size_t>(n_), 'I');
        for (int q = 0; q < n_; ++q) s[static_cast<std::size_t>(q)] = letter(q);
        return s;
    }

    CMatrix dense() const {
        const std::size_t d = dim_of(n_);
        CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t b = 0; b < d; ++b)
            m(static_cast<Eigen::Index>(b ^ x_), static_cast<Eigen::Index>(b)) = phase(b);
        return m;
    }

    friend bool operator==(const PauliString&, const PauliString&) = default;
    friend auto operator<=>(const PauliString& a, const PauliString& b) {
        return std::tie(a.n_, a.x_, a.z_) <=> std::tie(b.n_, b.x_, b.z_);
    }

private:
    int n_ = 1;
    std::uint64_t x_ = 0;
    std::uint64_t z_ = 0;
};

struct PauliTerm {
    PauliString op;
    double coeff = 0.0;
};

/// y += c * P v
inline void accumulate_pauli(const PauliString& p, double c, const CVector& v, CVector& y) {
    const std::size_t d = static_cast<std::size_t>(v.size());
    const std::uint64_t x = p.x_mask();
    for (std::size_t b = 0; b < d; ++b)
        y[static_cast<Eigen::Index>(b ^ x)] += c * p.phase(b) * v[static_cast<Eigen::Index>(b)];
}

inline CVector apply_terms(std::span<const PauliTerm> terms, const CVector& v) {
    CVector y = CVector::Zero(v.size());
    for (const auto& t : terms) accumulate_pauli(t.op, t.coeff, v, y);
    return y;
}

inline CMatrix dense_from_terms(int n, std::span<const PauliTerm> terms) {
    const auto d = static_cast<Eigen::Index>(dim_of(n));
    CMatrix m = CMatrix::Zero(d, d);
    for (const auto& t : terms) {
        const std::uint64_t x = t.op.x_mask();
        for (std::size_t b = 0; b < static_cast<std::size_t>(d); ++b)
            m(static_cast<Eigen::Index>(b ^ x), static_cast<Eigen::Index>(b)) += t.coeff * t.op.phase(b);
    }
    return m;
}

/// Merges repeated strings and drops zero coefficients; output sorted by string.
inline std::vector<PauliTerm> canonicalize(std::span<const PauliTerm> terms) {
    std::map<PauliString, double> acc;
    for (const auto& t : terms) acc[t.op] += t.coeff;
    std::vector<PauliTerm> out;
    for (const auto& [op, c] : acc)
        if (c != 0.0) out.push_back({op, c});
    return out;
}

/// Pauli-basis coefficients h_sigma = tr(sigma M) / 2^n of a Hermitian matrix,
/// identity excluded; only |h| > cutoff are kept.
inline std::vector<PauliTerm> pauli_decompose(int n, const CMatrix& m, double cutoff = 1e-14) {
    const std::size_t d = dim_of(n);
    std::vector<PauliTerm> out;
    for (std::uint64_t x = 0; x < d; ++x) {
        for (std::uint64_t z = 0; z < d; ++z) {
            if ((x | z) == 0) continue;
            PauliString p(n, x, z);
            Complex tr = 0;
            for (std::size_t b = 0; b < d; ++b)
                tr += std::conj(p.phase(b)) * m(static_cast<Eigen::Index>(b ^ x), static_cast<Eigen::Index>(b));
            const double h = tr.real() / static_cast<double>(d);
            if (std::abs(h) > cutoff) out.push_back({p, h});
        }
    }
    return out;
}

}  // namespace qckit
