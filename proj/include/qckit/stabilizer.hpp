#pragma once

#include "qckit/common.hpp"
#include "qckit/pauli.hpp"
#include "qckit/statespace.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace qckit {

/// One Pauli element i^phase * prod_q X^{x_q} Z^{z_q} on an arbitrary number of
/// qubits. Bits are indexed by qubit label.
struct PauliRow {
    std::vector<std::uint64_t> x;
    std::vector<std::uint64_t> z;
    int phase = 0;  // exponent of i, mod 4

    explicit PauliRow(int n = 0) : x(words(n), 0), z(words(n), 0) {}

    static std::size_t words(int n) { return static_cast<std::size_t>((n + 63) / 64); }

    bool xbit(int q) const { return (x[static_cast<std::size_t>(q) / 64] >> (q % 64)) & 1u; }
    bool zbit(int q) const { return (z[static_cast<std::size_t>(q) / 64] >> (q % 64)) & 1u; }
    void set_x(int q, bool v) { assign(x, q, v); }
    void set_z(int q, bool v) { assign(z, q, v); }

    int xz_overlap() const {
        int c = 0;
        for (std::size_t w = 0; w < x.size(); ++w) c += popcount(x[w] & z[w]);
        return c;
    }

    /// +1 or -1 for a Hermitian element.
    int sign() const { return ((phase - xz_overlap()) & 3) == 0 ? 1 : -1; }

    bool is_hermitian() const { return ((phase - xz_overlap()) & 1) == 0; }

    /// Parses "+XZIY" / "-XZ" / "XZ"; letter i acts on qubit i.
    static PauliRow parse(std::string_view text) {
        int sign = 1;
        if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
            sign = text.front() == '-' ? -1 : 1;
            text.remove_prefix(1);
        }
        PauliRow r(static_cast<int>(text.size()));
        for (int q = 0; q < static_cast<int>(text.size()); ++q) {
            switch (text[static_cast<std::size_t>(q)]) {
                case 'I': break;
                case 'X': r.set_x(q, true); break;
                case 'Z': r.set_z(q, true); break;
                case 'Y': r.set_x(q, true); r.set_z(q, true); break;
                default: throw ValidationError("PauliRow: bad letter");
            }
        }
        r.phase = (r.xz_overlap() + (sign < 0 ? 2 : 0)) & 3;
        return r;
    }

    /// this <- this * other
    void multiply_right(const PauliRow& o) {
        int cross = 0;
        for (std::size_t w = 0; w < x.size(); ++w) {
            cross += popcount(z[w] & o.x[w]);
            x[w] ^= o.x[w];
            z[w] ^= o.z[w];
        }
        phase = (phase + o.phase + 2 * cross) & 3;
    }

    bool commutes_with(const PauliRow& o) const {
        int c = 0;
        for (std::size_t w = 0; w < x.size(); ++w) c += popcount(x[w] & o.z[w]) + popcount(z[w] & o.x[w]);
        return c % 2 == 0;
    }

private:
    static void assign(std::vector<std::uint64_t>& bits, int q, bool v) {
        const std::uint64_t m = std::uint64_t{1} << (q % 64);
        auto& w = bits[static_cast<std::size_t>(q) / 64];
        w = v ? (w | m) : (w & ~m);
    }
};

namespace detail {

/// Rank over GF(2) of packed bit rows; destroys the input.
inline int gf2_rank(std::vector<std::vector<std::uint64_t>>& rows) {
    if (rows.empty()) return 0;
    const std::size_t nwords = rows.front().size();
    int rank = 0;
    for (std::size_t col = 0; col < nwords * 64 && rank < static_cast<int>(rows.size()); ++col) {
        const std::size_t w = col / 64;
        const std::uint64_t m = std::uint64_t{1} << (col % 64);
        std::size_t piv = static_cast<std::size_t>(rank);
        while (piv < rows.size() && !(rows[piv][w] & m)) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[piv], rows[static_cast<std::size_t>(rank)]);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r != static_cast<std::size_t>(rank) && (rows[r][w] & m))
                for (std::size_t k = 0; k < nwords; ++k) rows[r][k] ^= rows[static_cast<std::size_t>(rank)][k];
        }
        ++rank;
    }
    return rank;
}

}  // namespace detail

/// Pure stabilizer state given by n independent, commuting Hermitian generators.
class StabilizerState {
public:
    StabilizerState(int n, std::vector<PauliRow> generators) : n_(n), gens_(std::move(generators)) {
        if (n < 1) throw ValidationError("StabilizerState: qubit count must be positive");
        if (static_cast<int>(gens_.size()) != n)
            throw ValidationError("StabilizerState: need exactly n generators");
        for (const auto& g : gens_) {
            if (g.x.size() != PauliRow::words(n)) throw ValidationError("StabilizerState: generator width mismatch");
            if (!g.is_hermitian()) throw ValidationError("StabilizerState: generator is not Hermitian");
        }
        for (std::size_t i = 0; i < gens_.size(); ++i)
            for (std::size_t j = i + 1; j < gens_.size(); ++j)
                if (!gens_[i].commutes_with(gens_[j]))
                    throw ValidationError("StabilizerState: generators do not commute");
        if (restricted_rank(all_qubits()) != n) throw ValidationError("StabilizerState: generators are dependent");
    }

    static StabilizerState from_strings(const std::vector<std::string>& gens) {
        std::vector<PauliRow> rows;
        for (const auto& g : gens) rows.push_back(PauliRow::parse(g));
        const int n = rows.empty() ? 0 : static_cast<int>(gens.front().size()) -
                                             ((gens.front()[0] == '+' || gens.front()[0] == '-') ? 1 : 0);
        return {n, std::move(rows)};
    }

    /// |0...0>, stabilized by Z on every qubit.
    static StabilizerState zeros(int n) {
        std::vector<PauliRow> rows;
        for (int q = 0; q < n; ++q) {
            PauliRow r(n);
            r.set_z(q, true);
            rows.push_back(std::move(r));
        }
        return {n, std::move(rows)};
    }

    /// Computational basis state with the given bits (bits[q] for qubit q).
    static StabilizerState basis(const std::vector<int>& bits) {
        const int n = static_cast<int>(bits.size());
        std::vector<PauliRow> rows;
        for (int q = 0; q < n; ++q) {
            PauliRow r(n);
            r.set_z(q, true);
            r.phase = bits[static_cast<std::size_t>(q)] ? 2 : 0;
            rows.push_back(std::move(r));
        }
        return {n, std::move(rows)};
    }

    int num_qubits() const { return n_; }
    const std::vector<PauliRow>& generators() const { return gens_; }

    /// GF(2) rank of the generators restricted to the listed qubits.
    int restricted_rank(const std::vector<int>& qubits) const {
        const std::size_t width = PauliRow::words(2 * static_cast<int>(qubits.size()));
        std::vector<std::vector<std::uint64_t>> rows;
        rows.reserve(gens_.size());
        for (const auto& g : gens_) {
            std::vector<std::uint64_t> r(width, 0);
            for (std::size_t i = 0; i < qubits.size(); ++i) {
                const std::size_t cx = 2 * i, cz = 2 * i + 1;
                if (g.xbit(qubits[i])) r[cx / 64] |= std::uint64_t{1} << (cx % 64);
                if (g.zbit(qubits[i])) r[cz / 64] |= std::uint64_t{1} << (cz % 64);
            }
            rows.push_back(std::move(r));
        }
        return detail::gf2_rank(rows);
    }

    /// Entanglement entropy of `block` in units of ln 2.
    int entropy_bits(const std::vector<int>& block) const {
        return restricted_rank(block) - static_cast<int>(block.size());
    }

    /// Number of independent group elements supported entirely inside `block`.
    int generators_inside(const std::vector<int>& block) const {
        return n_ - restricted_rank(detail::complement(n_, block));
    }

private:
    std::vector<int> all_qubits() const {
        std::vector<int> q(static_cast<std::size_t>(n_));
        std::iota(q.begin(), q.end(), 0);
        return q;
    }

    int n_;
    std::vector<PauliRow> gens_;
};

/// S_k = (k - g_k) ln 2 with g_k the number of independent stabilizers inside
/// the first k chain positions.
inline EntanglementProfile stab_entanglement_profile(const StabilizerState& st, const ChainOrdering& ordering) {
    const int n = st.num_qubits();
    if (ordering.size() != n) throw ValidationError("stab_entanglement_profile: ordering size mismatch");
    EntanglementProfile p;
    for (int k = 1; k < n; ++k) {
        const int bits = k - st.generators_inside(ordering.prefix(k));
        p.entropies.push_back(bits * std::log(2.0));
    }
    return p;
}

inline constexpr int kMaxStabilizerRdmQubits = 4;

/// rho(D) = 2^{-|D|} sum over stabilizer-group elements supported in D.
inline DensityMatrix stab_reduced_density_matrix(const StabilizerState& st, std::span<const int> subset) {
    const int n = st.num_qubits();
    if (static_cast<int>(subset.size()) > kMaxStabilizerRdmQubits)
        throw ValidationError("stab_reduced_density_matrix: subset larger than 4 qubits");
    detail::check_subset(n, subset, "stab_reduced_density_matrix");

    // Row-reduce on the complement so rows without a pivot there live inside the subset.
    std::vector<PauliRow> rows = st.generators();
    const std::vector<int> rest = detail::complement(n, subset);
    std::size_t top = 0;
    for (int q : rest) {
        for (int kind = 0; kind < 2; ++kind) {
            auto has = [&](const PauliRow& r) { return kind == 0 ? r.xbit(q) : r.zbit(q); };
            std::size_t piv = top;
            while (piv < rows.size() && !has(rows[piv])) ++piv;
            if (piv == rows.size()) continue;
            std::swap(rows[piv], rows[top]);
            for (std::size_t r = 0; r < rows.size(); ++r)
                if (r != top && has(rows[r])) rows[r].multiply_right(rows[top]);
            ++top;
        }
    }
    std::vector<PauliRow> inside(rows.begin() + static_cast<std::ptrdiff_t>(top), rows.end());

    const int m = static_cast<int>(subset.size());
    const auto d = static_cast<Eigen::Index>(dim_of(m));
    CMatrix rho = CMatrix::Zero(d, d);
    static constexpr std::array<Complex, 4> kPow{Complex{1, 0}, Complex{0, 1}, Complex{-1, 0}, Complex{0, -1}};
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << inside.size()); ++mask) {
        PauliRow e(n);
        for (std::size_t i = 0; i < inside.size(); ++i)
            if ((mask >> i) & 1u) e.multiply_right(inside[i]);
        std::uint64_t xl = 0, zl = 0;
        for (int i = 0; i < m; ++i) {
            const int q = subset[static_cast<std::size_t>(i)];
            xl |= static_cast<std::uint64_t>(e.xbit(q)) << (m - 1 - i);
            zl |= static_cast<std::uint64_t>(e.zbit(q)) << (m - 1 - i);
        }
        for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(d); ++b) {
            const int r = e.phase + 2 * popcount(b & zl);
            rho(static_cast<Eigen::Index>(b ^ xl), static_cast<Eigen::Index>(b)) += kPow[static_cast<std::size_t>(r & 3)];
        }
    }
    rho /= static_cast<double>(d);
    return {std::vector<int>(subset.begin(), subset.end()), std::move(rho)};
}

/// Dense amplitudes of a stabilizer state (n <= 14), global phase fixed so the
/// largest amplitude is real positive.
inline PureState to_pure_state(const StabilizerState& st, ChainOrdering ordering) {
    const int n = st.num_qubits();
    if (n > kMaxDenseQubits) throw ValidationError("to_pure_state: too many qubits for dense output");
    std::vector<PauliString> ops;
    std::vector<int> signs;
    for (const auto& g : st.generators()) {
        std::uint64_t x = 0, z = 0;
        for (int q = 0; q < n; ++q) {
            if (g.xbit(q)) x |= std::uint64_t{1} << bit_of(n, q);
            if (g.zbit(q)) z |= std::uint64_t{1} << bit_of(n, q);
        }
        ops.emplace_back(n, x, z);
        signs.push_back(g.sign());
    }
    const auto d = static_cast<Eigen::Index>(dim_of(n));
    for (Eigen::Index start = 0; start < d; ++start) {
        CVector v = CVector::Zero(d);
        v[start] = 1.0;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            CVector pv = CVector::Zero(d);
            accumulate_pauli(ops[i], static_cast<double>(signs[i]), v, pv);
            v = 0.5 * (v + pv);
        }
        if (v.norm() > 1e-6) {
            v.normalize();
            fix_global_phase(v);
            return {n, std::move(v), std::move(ordering)};
        }
    }
    throw NumericalError("to_pure_state: projection vanished on every basis state");
}

/// Text form: a header line "stabilizer <n>", n rows of 2n '0'/'1' characters
/// (x bits then z bits), and a sign line of n characters ('1' = negative).
inline std::string to_text(const StabilizerState& st) {
    const int n = st.num_qubits();
    std::ostringstream os;
    os << "stabilizer " << n << '\n';
    std::string signs;
    for (const auto& g : st.generators()) {
        for (int q = 0; q < n; ++q) os << (g.xbit(q) ? '1' : '0');
        for (int q = 0; q < n; ++q) os << (g.zbit(q) ? '1' : '0');
        os << '\n';
        signs += g.sign() < 0 ? '1' : '0';
    }
    os << signs << '\n';
    return os.str();
}

inline StabilizerState stabilizer_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string tag;
    int n = 0;
    if (!(is >> tag >> n) || tag != "stabilizer" || n < 1) throw ValidationError("stabilizer text: bad header");
    std::vector<std::string> lines(static_cast<std::size_t>(n));
    for (auto& l : lines)
        if (!(is >> l) || static_cast<int>(l.size()) != 2 * n) throw ValidationError("stabilizer text: bad row");
    std::string signs;
    if (!(is >> signs) || static_cast<int>(signs.size()) != n) throw ValidationError("stabilizer text: bad sign line");
    std::vector<PauliRow> rows;
    for (int i = 0; i < n; ++i) {
        PauliRow r(n);
        for (int q = 0; q < n; ++q) {
            const char cx = lines[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)];
            const char cz = lines[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + q)];
            if ((cx != '0' && cx != '1') || (cz != '0' && cz != '1')) throw ValidationError("stabilizer text: bad bit");
            r.set_x(q, cx == '1');
            r.set_z(q, cz == '1');
        }
        const char s = signs[static_cast<std::size_t>(i)];
        if (s != '0' && s != '1') throw ValidationError("stabilizer text: bad sign");
        r.phase = (r.xz_overlap() + (s == '1' ? 2 : 0)) & 3;
        rows.push_back(std::move(r));
    }
    return {n, std::move(rows)};
}

}  // namespace qckit
