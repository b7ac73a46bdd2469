#pragma once

#include "qckit/common.hpp"
#include "qckit/eigensolver.hpp"
#include "qckit/pauli.hpp"
#include "qckit/stabilizer.hpp"
#include "qckit/statespace.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qckit {

/// Real linear combination of Pauli strings; Hermitian by construction.
class HermitianOperator {
public:
    HermitianOperator() = default;
    HermitianOperator(int n, std::vector<PauliTerm> terms) : n_(n), terms_(std::move(terms)) {
        for (const auto& t : terms_) {
            if (t.op.num_qubits() != n_) throw ValidationError("HermitianOperator: term qubit count mismatch");
            if (!std::isfinite(t.coeff)) throw ValidationError("HermitianOperator: non-finite coefficient");
        }
    }

    int num_qubits() const { return n_; }
    const std::vector<PauliTerm>& terms() const { return terms_; }

    /// True when the matrix is real in the computational basis (even Y count everywhere).
    bool is_real() const {
        return std::all_of(terms_.begin(), terms_.end(),
                           [](const PauliTerm& t) { return popcount(t.op.x_mask() & t.op.z_mask()) % 2 == 0; });
    }

    CVector apply(const CVector& v) const { return apply_terms(terms_, v); }
    CMatrix dense() const { return dense_from_terms(n_, terms_); }

    double expectation(const PureState& psi) const { return psi.amplitudes().dot(apply(psi.amplitudes())).real(); }

    bool commutes_with(const PauliString& p) const {
        return std::all_of(terms_.begin(), terms_.end(), [&](const PauliTerm& t) { return t.op.commutes_with(p); });
    }

private:
    int n_ = 0;
    std::vector<PauliTerm> terms_;
};

// ---------------------------------------------------------------------------
// Bond-alternating XXZ chain

struct XXZParams {
    int n = 10;
    double j1 = 1.0;
    double j2 = 1.0;
    double delta = 3.0;
    double h0 = 0.0;
};

/// sum_i J_i (X_i X_{i+1} + Y_i Y_{i+1} + delta Z_i Z_{i+1}) - h0 sum_i Z_i on an
/// open chain; bond i (1-based) carries J1 when i is odd, J2 when even.
inline HermitianOperator build_xxz(const XXZParams& p) {
    if (p.n < 2) throw ValidationError("build_xxz: n must be at least 2");
    if (p.n > 64) throw ValidationError("build_xxz: n must be at most 64");
    std::vector<PauliTerm> terms;
    for (int i = 0; i + 1 < p.n; ++i) {
        const double j = (i % 2 == 0) ? p.j1 : p.j2;
        terms.push_back({PauliString::on(p.n, {{i, 'X'}, {i + 1, 'X'}}), j});
        terms.push_back({PauliString::on(p.n, {{i, 'Y'}, {i + 1, 'Y'}}), j});
        terms.push_back({PauliString::on(p.n, {{i, 'Z'}, {i + 1, 'Z'}}), j * p.delta});
    }
    for (int i = 0; i < p.n; ++i) terms.push_back({PauliString::on(p.n, {{i, 'Z'}}), -p.h0});
    return {p.n, std::move(terms)};
}

// ---------------------------------------------------------------------------
// Toric code on an Lx x Ly torus

/// Edges of a periodic square lattice. Qubits live on a (2 Ly) x Lx grid laid out
/// row-major: grid row 2y holds the horizontal edges h(x, y) from vertex (x, y)
/// to (x+1, y), grid row 2y+1 the vertical edges v(x, y) from (x, y) to (x, y+1).
class ToricLattice {
public:
    ToricLattice(int lx, int ly) : lx_(lx), ly_(ly) {
        if (lx < 2 || ly < 2) throw ValidationError("ToricLattice: extents must be at least 2");
        if (2 * lx * ly > 64) throw ValidationError("ToricLattice: at most 64 qubits supported");
    }

    int lx() const { return lx_; }
    int ly() const { return ly_; }
    int num_qubits() const { return 2 * lx_ * ly_; }
    int num_vertices() const { return lx_ * ly_; }
    int num_faces() const { return lx_ * ly_; }

    int horizontal(int x, int y) const { return (2 * wrap(y, ly_)) * lx_ + wrap(x, lx_); }
    int vertical(int x, int y) const { return (2 * wrap(y, ly_) + 1) * lx_ + wrap(x, lx_); }

    /// The four edges meeting at vertex (x, y).
    std::vector<int> star(int x, int y) const {
        return {horizontal(x, y), horizontal(x - 1, y), vertical(x, y), vertical(x, y - 1)};
    }
    /// The four edges bounding the face whose lower-left corner is (x, y).
    std::vector<int> plaquette(int x, int y) const {
        return {horizontal(x, y), horizontal(x, y + 1), vertical(x, y), vertical(x + 1, y)};
    }

    /// Vertical edges v(column, y) for all y: a Z loop winding around y.
    std::vector<int> vertical_cycle(int column) const {
        std::vector<int> e;
        for (int y = 0; y < ly_; ++y) e.push_back(vertical(column, y));
        return e;
    }
    /// Horizontal edges h(column, y) for all y: crossed by a dual loop winding around y.
    std::vector<int> horizontal_cycle(int column) const {
        std::vector<int> e;
        for (int y = 0; y < ly_; ++y) e.push_back(horizontal(column, y));
        return e;
    }
    /// Horizontal edges h(x, row) for all x: a Z loop winding around x.
    std::vector<int> horizontal_row(int row) const {
        std::vector<int> e;
        for (int x = 0; x < lx_; ++x) e.push_back(horizontal(x, row));
        return e;
    }
    /// Vertical edges v(x, row) for all x: crossed by a dual loop winding around x.
    std::vector<int> vertical_row(int row) const {
        std::vector<int> e;
        for (int x = 0; x < lx_; ++x) e.push_back(vertical(x, row));
        return e;
    }

    /// Snake ordering over the edge grid.
    ChainOrdering default_ordering() const { return ChainOrdering::snake(2 * ly_, lx_); }

    PauliString product(const std::vector<int>& edges, char letter) const {
        PauliString p = PauliString::identity(num_qubits());
        for (int e : edges) p.set(e, letter);
        return p;
    }

private:
    static int wrap(int a, int m) { return ((a % m) + m) % m; }
    int lx_, ly_;
};

/// -sum_v A_v - sum_p B_p.
inline HermitianOperator build_toric(const ToricLattice& lat) {
    const int n = lat.num_qubits();
    std::vector<PauliTerm> terms;
    for (int y = 0; y < lat.ly(); ++y)
        for (int x = 0; x < lat.lx(); ++x) terms.push_back({lat.product(lat.star(x, y), 'X'), -1.0});
    for (int y = 0; y < lat.ly(); ++y)
        for (int x = 0; x < lat.lx(); ++x) terms.push_back({lat.product(lat.plaquette(x, y), 'Z'), -1.0});
    return {n, std::move(terms)};
}

struct ETCParams {
    ToricLattice lattice{2, 2};
    double jw = 1.0;
    double jh = -1.0;
    double h = 0.0;
    std::vector<int> w_cycle;  // Z loop on vertical edges; empty = lattice.vertical_cycle(0)
    std::vector<int> h_cycle;  // X loop on horizontal edges; empty = lattice.horizontal_cycle(0)

    std::vector<int> resolved_w() const { return w_cycle.empty() ? lattice.vertical_cycle(0) : w_cycle; }
    std::vector<int> resolved_h() const { return h_cycle.empty() ? lattice.horizontal_cycle(0) : h_cycle; }
};

/// Wilson loop W (Z type) and 't Hooft loop H (X type) after validation: both must
/// be closed and non-contractible, and they must commute.
inline std::pair<PauliString, PauliString> etc_loop_operators(const ETCParams& p) {
    const auto& lat = p.lattice;
    const auto check_edges = [&](const std::vector<int>& edges) {
        std::vector<int> sorted = edges;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ValidationError("build_etc: loop lists an edge twice");
        for (int e : edges)
            if (e < 0 || e >= lat.num_qubits()) throw ValidationError("build_etc: loop edge out of range");
    };
    check_edges(p.resolved_w());
    check_edges(p.resolved_h());
    const PauliString w = lat.product(p.resolved_w(), 'Z');
    const PauliString h = lat.product(p.resolved_h(), 'X');
    for (int y = 0; y < lat.ly(); ++y) {
        for (int x = 0; x < lat.lx(); ++x) {
            if (!w.commutes_with(lat.product(lat.star(x, y), 'X')))
                throw ValidationError("build_etc: W loop is not closed");
            if (!h.commutes_with(lat.product(lat.plaquette(x, y), 'Z')))
                throw ValidationError("build_etc: H loop is not closed");
        }
    }
    // A closed loop is non-contractible iff it anticommutes with a conjugate logical.
    const bool w_winds = !w.commutes_with(lat.product(lat.horizontal_cycle(0), 'X')) ||
                         !w.commutes_with(lat.product(lat.vertical_row(0), 'X'));
    const bool h_winds = !h.commutes_with(lat.product(lat.vertical_cycle(0), 'Z')) ||
                         !h.commutes_with(lat.product(lat.horizontal_row(0), 'Z'));
    if (!w_winds) throw ValidationError("build_etc: W loop is contractible");
    if (!h_winds) throw ValidationError("build_etc: H loop is contractible");
    if (!w.commutes_with(h)) throw ValidationError("build_etc: W and H loops do not commute");
    return {w, h};
}

/// H_TC - J_W W - J_H H - h sum_i Z_i; zero-coefficient terms are omitted.
inline HermitianOperator build_etc(const ETCParams& p) {
    const auto [w, hl] = etc_loop_operators(p);
    auto terms = build_toric(p.lattice).terms();
    const int n = p.lattice.num_qubits();
    if (p.jw != 0.0) terms.push_back({w, -p.jw});
    if (p.jh != 0.0) terms.push_back({hl, -p.jh});
    if (p.h != 0.0)
        for (int q = 0; q < n; ++q) terms.push_back({PauliString::on(n, {{q, 'Z'}}), -p.h});
    return {n, std::move(terms)};
}

/// Toric-code ground state fixed by two logical loops with the given signs.
/// Generators: all stars and plaquettes but one of each, plus the two loops.
inline StabilizerState toric_stabilizer_state(const ToricLattice& lat, const std::vector<int>& z_loop, int z_sign,
                                              const std::vector<int>& x_loop, int x_sign) {
    const int n = lat.num_qubits();
    std::vector<PauliRow> rows;
    auto add = [&](const std::vector<int>& edges, bool is_x, int sign) {
        PauliRow r(n);
        for (int e : edges) (is_x ? r.set_x(e, true) : r.set_z(e, true));
        r.phase = sign < 0 ? 2 : 0;
        rows.push_back(std::move(r));
    };
    for (int y = 0; y < lat.ly(); ++y)
        for (int x = 0; x < lat.lx(); ++x)
            if (x + y > 0) add(lat.star(x, y), true, +1);
    for (int y = 0; y < lat.ly(); ++y)
        for (int x = 0; x < lat.lx(); ++x)
            if (x + y > 0) add(lat.plaquette(x, y), false, +1);
    add(z_loop, false, z_sign);
    add(x_loop, true, x_sign);
    return {n, std::move(rows)};
}

/// The ground state reached by the default tie-break: every Z-type logical +1.
inline StabilizerState toric_default_stabilizer_state(const ToricLattice& lat) {
    const int n = lat.num_qubits();
    std::vector<PauliRow> rows;
    auto add = [&](const std::vector<int>& edges, bool is_x) {
        PauliRow r(n);
        for (int e : edges) (is_x ? r.set_x(e, true) : r.set_z(e, true));
        rows.push_back(std::move(r));
    };
    for (int y = 0; y < lat.ly(); ++y)
        for (int x = 0; x < lat.lx(); ++x)
            if (x + y > 0) add(lat.star(x, y), true);
    for (int y = 0; y < lat.ly(); ++y)
        for (int x = 0; x < lat.lx(); ++x)
            if (x + y > 0) add(lat.plaquette(x, y), false);
    add(lat.vertical_cycle(0), false);
    add(lat.horizontal_row(0), false);
    return {n, std::move(rows)};
}

// ---------------------------------------------------------------------------
// Ground states

/// Restricts the solve to the joint eigenspace where `op` has eigenvalue `value`.
struct SectorConstraint {
    PauliString op;
    int value = 1;
};

struct GroundStateOptions {
    std::vector<SectorConstraint> sectors;
    int dense_max_qubits = 10;
    double residual_tol = 1e-9;
    double degeneracy_tol = 1e-8;
    int max_degeneracy = 16;
};

struct GroundStateResult {
    PureState state;
    double energy = 0.0;
    int degeneracy = 1;  // within the requested sector
    double residual = 0.0;
    std::vector<double> sector_values;
};

namespace detail {

/// Projection of the lowest-index basis vector with nonzero overlap onto span(V).
inline CVector tie_break(const CMatrix& v) {
    for (Eigen::Index j = 0; j < v.rows(); ++j) {
        const CVector c = v.row(j).adjoint();
        if (c.norm() > 1e-6) {
            CVector psi = v * c;
            psi.normalize();
            return psi;
        }
    }
    throw NumericalError("ground_state: empty ground space");
}

}  // namespace detail

/// Lowest eigenvector of H (optionally inside a symmetry sector). Degenerate
/// ground spaces are resolved by projecting the lowest-index basis state with
/// nonzero overlap; the largest amplitude is then made real positive.
inline GroundStateResult ground_state(const HermitianOperator& h, const ChainOrdering& ordering,
                                      const GroundStateOptions& opt = {}) {
    const int n = h.num_qubits();
    if (n > kMaxDenseQubits) throw ValidationError("ground_state: more than 14 qubits");
    if (ordering.size() != n) throw ValidationError("ground_state: ordering size mismatch");

    // Penalty larger than the spectral width pushes every other sector above the target.
    double width = 0.0;
    for (const auto& t : h.terms()) width += 2.0 * std::abs(t.coeff);
    const double penalty = width + 1.0;
    std::vector<PauliTerm> terms = h.terms();
    for (const auto& s : opt.sectors) {
        if (s.op.num_qubits() != n) throw ValidationError("ground_state: sector operator size mismatch");
        if (s.value != 1 && s.value != -1) throw ValidationError("ground_state: sector value must be +1 or -1");
        if (!h.commutes_with(s.op)) throw ValidationError("ground_state: sector operator does not commute with H");
        terms.push_back({PauliString::identity(n), penalty / 2});
        terms.push_back({s.op, -penalty / 2 * s.value});
    }
    const HermitianOperator heff(n, std::move(terms));
    const auto d = static_cast<Eigen::Index>(dim_of(n));

    CMatrix ground;  // columns span the (sector) ground space
    if (n <= opt.dense_max_qubits) {
        RVector evals;
        if (heff.is_real()) {
            Eigen::SelfAdjointEigenSolver<RMatrix> es(heff.dense().real());
            evals = es.eigenvalues();
            ground = es.eigenvectors().cast<Complex>();
        } else {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(heff.dense());
            evals = es.eigenvalues();
            ground = es.eigenvectors();
        }
        const double cutoff = evals[0] + opt.degeneracy_tol * std::max(1.0, std::abs(evals[0]));
        Eigen::Index g = 1;
        while (g < evals.size() && evals[g] <= cutoff) ++g;
        ground = ground.leftCols(g).eval();
    } else {
        const LinearMap apply = [&heff](const CVector& v) { return heff.apply(v); };
        LanczosOptions lo;
        lo.tol = opt.residual_tol;
        std::vector<CVector> found;
        EigenPair first = lanczos_lowest(apply, d, found, lo);
        found.push_back(first.vector);
        const double cutoff = first.value + opt.degeneracy_tol * std::max(1.0, std::abs(first.value));
        while (static_cast<int>(found.size()) < std::min<Eigen::Index>(opt.max_degeneracy, d)) {
            EigenPair next = lanczos_lowest(apply, d, found, lo);
            if (next.value > cutoff) break;
            found.push_back(next.vector);
        }
        ground.resize(d, static_cast<Eigen::Index>(found.size()));
        for (std::size_t i = 0; i < found.size(); ++i) ground.col(static_cast<Eigen::Index>(i)) = found[i];
    }

    CVector psi = ground.cols() == 1 ? CVector(ground.col(0)) : detail::tie_break(ground);
    fix_global_phase(psi);
    const CVector hpsi = h.apply(psi);
    const double energy = psi.dot(hpsi).real();
    const double residual = (hpsi - energy * psi).norm();
    if (residual > 10.0 * std::max(opt.residual_tol, opt.degeneracy_tol))
        throw NumericalError("ground_state: residual " + std::to_string(residual) + " above tolerance");

    GroundStateResult out{PureState::normalized(n, psi, ordering), energy, static_cast<int>(ground.cols()), residual, {}};
    for (const auto& s : opt.sectors) {
        CVector sp = CVector::Zero(d);
        accumulate_pauli(s.op, 1.0, out.state.amplitudes(), sp);
        out.sector_values.push_back(out.state.amplitudes().dot(sp).real());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random product states

/// n fair bits from a seeded generator; bits[q] belongs to qubit q.
inline std::vector<int> random_bits(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> bits(static_cast<std::size_t>(n));
    for (auto& b : bits) b = static_cast<int>(rng() >> 63);
    return bits;
}

inline std::uint64_t bits_to_index(const std::vector<int>& bits) {
    const int n = static_cast<int>(bits.size());
    std::uint64_t idx = 0;
    for (int q = 0; q < n; ++q)
        if (bits[static_cast<std::size_t>(q)]) idx |= std::uint64_t{1} << bit_of(n, q);
    return idx;
}

/// Uniformly random computational basis state.
inline PureState random_product_state(int n, std::uint64_t seed, ChainOrdering ordering) {
    if (n < 1) throw ValidationError("random_product_state: n must be positive");
    if (n > 30) throw ValidationError("random_product_state: n too large for a dense state");
    return PureState::basis(n, bits_to_index(random_bits(n, seed)), std::move(ordering));
}
inline PureState random_product_state(int n, std::uint64_t seed) {
    return random_product_state(n, seed, ChainOrdering::identity(n));
}

}  // namespace qckit
