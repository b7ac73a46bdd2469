#pragma once

#include "qckit/common.hpp"
#include "qckit/pauli.hpp"
#include "qckit/statespace.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace qckit {

using Matrix4c = Eigen::Matrix4cd;

// ---------------------------------------------------------------------------
// Haar two-qubit gates and brickwork circuits

/// Haar-random U(4): Ginibre draw, QR, then the phases of diag(R) folded into Q.
template <typename Rng>
Matrix4c haar_two_qubit(Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix4c g;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) g(i, j) = Complex{gauss(rng), gauss(rng)};
    Eigen::HouseholderQR<Matrix4c> qr(g);
    Matrix4c q = qr.householderQ();
    const Matrix4c r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < 4; ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
    return q;
}

/// Applies a 4x4 unitary (basis |a b>, a most significant) to qubits qa, qb.
inline void apply_two_qubit(CVector& v, int n, int qa, int qb, const Matrix4c& u) {
    const std::uint64_t ma = std::uint64_t{1} << bit_of(n, qa);
    const std::uint64_t mb = std::uint64_t{1} << bit_of(n, qb);
    for (std::uint64_t b = 0; b < dim_of(n); ++b) {
        if (b & (ma | mb)) continue;
        const Eigen::Index idx[4] = {static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b | mb),
                                     static_cast<Eigen::Index>(b | ma), static_cast<Eigen::Index>(b | ma | mb)};
        Eigen::Vector4cd in(v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]);
        const Eigen::Vector4cd out = u * in;
        for (int k = 0; k < 4; ++k) v[idx[k]] = out[k];
    }
}

struct BrickGate {
    int position = 0;  // acts on chain positions (position, position + 1)
    Matrix4c unitary;
};

struct BrickworkCircuit {
    int n = 0;
    int depth = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<BrickGate>> layers;
};

/// Layer l acts on bonds starting at chain position l % 2, stepping by 2.
inline BrickworkCircuit make_brickwork(int n, int depth, std::uint64_t seed) {
    if (depth < 0) throw ValidationError("make_brickwork: depth must be non-negative");
    if (depth > 0 && n < 2) throw ValidationError("make_brickwork: need at least 2 qubits");
    BrickworkCircuit c{n, depth, seed, {}};
    std::mt19937_64 rng(seed);
    for (int l = 0; l < depth; ++l) {
        std::vector<BrickGate> layer;
        for (int p = l % 2; p + 1 < n; p += 2) layer.push_back({p, haar_two_qubit(rng)});
        c.layers.push_back(std::move(layer));
    }
    return c;
}

inline PureState apply_circuit(const PureState& psi, const BrickworkCircuit& c) {
    if (c.n != psi.num_qubits()) throw ValidationError("apply_circuit: qubit count mismatch");
    CVector v = psi.amplitudes();
    const auto& ord = psi.ordering();
    for (const auto& layer : c.layers)
        for (const auto& g : layer)
            apply_two_qubit(v, c.n, ord.site_at(g.position), ord.site_at(g.position + 1), g.unitary);
    return PureState::normalized(c.n, std::move(v), ord);
}

/// Depth-`depth` brickwork of independent Haar gates along the state's chain ordering.
inline PureState apply_brickwork(const PureState& psi, int depth, std::uint64_t seed) {
    if (depth == 0) return psi;
    return apply_circuit(psi, make_brickwork(psi.num_qubits(), depth, seed));
}

/// Haar-random pure state: normalized complex Gaussian vector.
inline PureState random_state(int n, std::uint64_t seed, ChainOrdering ordering) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    CVector v(static_cast<Eigen::Index>(dim_of(n)));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = Complex{gauss(rng), gauss(rng)};
    return PureState::normalized(n, std::move(v), std::move(ordering));
}

// ---------------------------------------------------------------------------
// Generator paths

/// Piecewise-constant generator G_j = sum_sigma h_sigma sigma held for ds.
struct PathSegment {
    double ds = 0.0;
    std::vector<PauliTerm> terms;
};

class GeneratorPath {
public:
    GeneratorPath(int n, std::vector<PathSegment> segments) : n_(n), segs_(std::move(segments)) {
        if (segs_.empty()) throw ValidationError("GeneratorPath: no segments");
        double total = 0.0;
        for (const auto& s : segs_) {
            if (!std::isfinite(s.ds) || s.ds < 0.0) throw ValidationError("GeneratorPath: bad step length");
            total += s.ds;
            for (const auto& t : s.terms) {
                if (!std::isfinite(t.coeff)) throw ValidationError("GeneratorPath: non-finite coefficient");
                if (t.op.num_qubits() != n) throw ValidationError("GeneratorPath: term qubit count mismatch");
            }
        }
        if (std::abs(total - 1.0) > 1e-12) throw ValidationError("GeneratorPath: step lengths must sum to 1");
    }

    /// Zero generator on a single unit segment.
    static GeneratorPath zero(int n) { return {n, {{1.0, {}}}}; }

    int num_qubits() const { return n_; }
    const std::vector<PathSegment>& segments() const { return segs_; }

    /// Widest chain window covering the support of any term.
    int locality(const ChainOrdering& ord) const {
        int g = 0;
        for (const auto& s : segs_) {
            for (const auto& t : s.terms) {
                const auto sup = t.op.support();
                if (sup.empty()) continue;
                int lo = n_, hi = -1;
                for (int q : sup) {
                    lo = std::min(lo, ord.position_of(q));
                    hi = std::max(hi, ord.position_of(q));
                }
                g = std::max(g, hi - lo + 1);
            }
        }
        return g;
    }

private:
    int n_;
    std::vector<PathSegment> segs_;
};

/// m equal segments sampling a smooth generator at the left end of each slice.
inline GeneratorPath discretize_path(int n, const std::function<std::vector<PauliTerm>(double)>& generator, int m) {
    if (m < 1) throw ValidationError("discretize_path: need at least one segment");
    std::vector<PathSegment> segs;
    for (int j = 0; j < m; ++j) segs.push_back({1.0 / m, generator(static_cast<double>(j) / m)});
    // Absorb rounding so the steps sum to exactly 1.
    double rest = 1.0;
    for (int j = 0; j + 1 < m; ++j) rest -= segs[static_cast<std::size_t>(j)].ds;
    segs.back().ds = rest;
    return {n, std::move(segs)};
}

/// exp(-i t G) for G given by Pauli terms (dense; n <= 12).
inline CMatrix evolution_operator(int n, std::span<const PauliTerm> terms, double t) {
    if (n > 12) throw ValidationError("evolution_operator: too many qubits");
    const CMatrix g = dense_from_terms(n, terms);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    CVector ph(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < ph.size(); ++i) ph[i] = std::exp(Complex{0.0, -t * es.eigenvalues()[i]});
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// States at the segment boundaries: element 0 is the input, element j is
/// U_j ... U_1 |psi0> with U_j = exp(-i ds_j G_j).
inline std::vector<PureState> trotter_evolve(const PureState& psi0, const GeneratorPath& path) {
    if (path.num_qubits() != psi0.num_qubits()) throw ValidationError("trotter_evolve: qubit count mismatch");
    const int n = psi0.num_qubits();
    std::vector<PureState> out{psi0};
    CVector v = psi0.amplitudes();
    for (const auto& s : path.segments()) {
        if (!s.terms.empty() && s.ds > 0.0) v = evolution_operator(n, s.terms, s.ds) * v;
        out.push_back(PureState::normalized(n, v, psi0.ordering()));
    }
    return out;
}

/// sum_j ds_j sum_sigma |h_sigma(s_j)|: the first-order Nielsen cost of this path.
inline double nielsen_path_cost(const GeneratorPath& path) {
    double c = 0.0;
    for (const auto& s : path.segments()) {
        double l1 = 0.0;
        for (const auto& t : s.terms) l1 += std::abs(t.coeff);
        c += s.ds * l1;
    }
    return c;
}

/// 4 Var[G_j] in the state at the start of each segment. G_j generates the
/// segment's own evolution, so the variance is constant along it.
inline std::vector<double> qfi_along_path(std::span<const PureState> states, const GeneratorPath& path) {
    if (states.size() != path.segments().size() + 1)
        throw ValidationError("qfi_along_path: need one more state than segments");
    std::vector<double> out;
    for (std::size_t j = 0; j < path.segments().size(); ++j) {
        const CVector& v = states[j].amplitudes();
        const CVector gv = apply_terms(path.segments()[j].terms, v);
        const double mean = v.dot(gv).real();
        const double second = gv.squaredNorm();
        out.push_back(std::max(0.0, 4.0 * (second - mean * mean)));
    }
    return out;
}

/// (1/2) sum_j ds_j sqrt(F_Q(s_j)).
inline double qfc_path_cost(std::span<const PureState> states, const GeneratorPath& path) {
    const auto fq = qfi_along_path(states, path);
    double c = 0.0;
    for (std::size_t j = 0; j < fq.size(); ++j) c += 0.5 * path.segments()[j].ds * std::sqrt(fq[j]);
    return c;
}

/// Nearest-neighbour random path: per segment, every two-site Pauli string on each
/// chain bond (both factors non-identity) and every single-site Pauli gets a
/// coefficient uniform in [-1, 1]; 8-32 equal segments.
inline GeneratorPath random_local_path(int n, std::uint64_t seed, const ChainOrdering& ord) {
    if (n < 2) throw ValidationError("random_local_path: need at least 2 qubits");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> segs_dist(8, 32);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    const int m = segs_dist(rng);
    static constexpr char kLetters[3] = {'X', 'Y', 'Z'};
    std::vector<PathSegment> segs;
    for (int j = 0; j < m; ++j) {
        std::vector<PauliTerm> terms;
        for (int p = 0; p + 1 < n; ++p)
            for (char a : kLetters)
                for (char b : kLetters)
                    terms.push_back({PauliString::on(n, {{ord.site_at(p), a}, {ord.site_at(p + 1), b}}), coeff(rng)});
        for (int p = 0; p < n; ++p)
            for (char a : kLetters) terms.push_back({PauliString::on(n, {{ord.site_at(p), a}}), coeff(rng)});
        segs.push_back({1.0 / m, canonicalize(terms)});
    }
    double rest = 1.0;
    for (int j = 0; j + 1 < m; ++j) rest -= segs[static_cast<std::size_t>(j)].ds;
    segs.back().ds = rest;
    return {n, std::move(segs)};
}

/// Hermitian G with exp(-i G) = U up to global phase (principal logarithm,
/// identity component dropped), expanded on two qubits.
inline std::vector<PauliTerm> gate_generator(const Matrix4c& u) {
    const CMatrix um = u;
    Eigen::ComplexSchur<CMatrix> schur(um);
    const CMatrix& q = schur.matrixU();
    const CMatrix& t = schur.matrixT();
    CVector angles(4);
    for (int i = 0; i < 4; ++i) angles[i] = -std::arg(t(i, i));
    CMatrix g = q * angles.asDiagonal() * q.adjoint();
    g = 0.5 * (g + g.adjoint()).eval();
    return pauli_decompose(2, g, 1e-13);
}

/// Generator realization of a brickwork circuit: one segment per layer of length
/// 1/depth whose generator is depth times the sum of the gate logarithms.
inline GeneratorPath circuit_generator_path(const BrickworkCircuit& c, const ChainOrdering& ord) {
    if (c.depth == 0) return GeneratorPath::zero(c.n);
    std::vector<PathSegment> segs;
    for (const auto& layer : c.layers) {
        std::vector<PauliTerm> terms;
        for (const auto& g : layer) {
            const int qa = ord.site_at(g.position), qb = ord.site_at(g.position + 1);
            for (const auto& t : gate_generator(g.unitary)) {
                PauliString p = PauliString::identity(c.n);
                p.set(qa, t.op.letter(0));
                p.set(qb, t.op.letter(1));
                terms.push_back({p, t.coeff * c.depth});
            }
        }
        segs.push_back({1.0 / c.depth, std::move(terms)});
    }
    double rest = 1.0;
    for (std::size_t j = 0; j + 1 < segs.size(); ++j) rest -= segs[j].ds;
    segs.back().ds = rest;
    return {c.n, std::move(segs)};
}

// ---------------------------------------------------------------------------
// Bound verification

inline constexpr double kBoundTol = 1e-8;

/// Quantities, margins and violation flags of one verification trial.
struct BoundReport {
    std::string kind;
    std::uint64_t seed = 0;
    std::map<std::string, double> quantities;
    std::map<std::string, double> margins;
    std::map<std::string, bool> flags;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Non-overlapping windows of `width` consecutive chain sites (the last may be shorter).
inline std::vector<std::vector<int>> chain_cover(const ChainOrdering& ord, int width = 2) {
    std::vector<std::vector<int>> cover;
    for (int p = 0; p < ord.size(); p += width) {
        std::vector<int> block;
        for (int k = p; k < std::min(ord.size(), p + width); ++k) block.push_back(ord.site_at(k));
        cover.push_back(std::move(block));
    }
    return cover;
}

/// Checks nielsen >= qfc >= D_B(rho0, rho1)/sqrt2 on a concrete path, the
/// per-segment bound sqrt(F_Q) <= 2 sum|h|, and reports the local-cover sum
/// (1/sqrt2) sum_D D_B[rho0(D), rho1(D)] against the Nielsen cost.
inline BoundReport verify_theorem1(const GeneratorPath& path, std::span<const PureState> states, int cover_width = 2) {
    if (states.size() != path.segments().size() + 1)
        throw ValidationError("verify_theorem1: need one more state than segments");
    BoundReport rep;
    rep.kind = "theorem1";
    const PureState& first = states.front();
    const PureState& last = states.back();
    const double nielsen = nielsen_path_cost(path);
    const double qfc = qfc_path_cost(states, path);
    const double bures = bures_distance(DensityMatrix::from_pure(first), DensityMatrix::from_pure(last)) / std::numbers::sqrt2;

    double local = 0.0;
    for (const auto& block : chain_cover(first.ordering(), cover_width))
        local += bures_distance(partial_trace(first, block), partial_trace(last, block)) / std::numbers::sqrt2;

    const auto fq = qfi_along_path(states, path);
    int segment_violations = 0;
    for (std::size_t j = 0; j < fq.size(); ++j) {
        double l1 = 0.0;
        for (const auto& t : path.segments()[j].terms) l1 += std::abs(t.coeff);
        if (std::sqrt(fq[j]) > 2.0 * l1 + 1e-9) ++segment_violations;
    }

    rep.quantities = {{"nielsen_cost", nielsen},
                      {"qfc_cost", qfc},
                      {"bures_bound", bures},
                      {"local_bures_sum", local},
                      {"locality", static_cast<double>(path.locality(first.ordering()))}};
    rep.margins = {{"nielsen_minus_qfc", nielsen - qfc},
                   {"qfc_minus_bures", qfc - bures},
                   {"nielsen_minus_local", nielsen - local}};
    rep.flags = {{"equality_nielsen_qfc", std::abs(nielsen - qfc) <= 1e-12},
                 {"equality_qfc_bures", std::abs(qfc - bures) <= 1e-12}};
    if (nielsen - qfc < -kBoundTol) rep.violations.push_back("nielsen_ge_qfc");
    if (qfc - bures < -kBoundTol) rep.violations.push_back("qfc_ge_bures");
    if (nielsen - local < -kBoundTol) rep.violations.push_back("nielsen_ge_local_sum");
    if (segment_violations > 0) rep.violations.push_back("segment_qfi_bound");
    return rep;
}

/// (1/(n-1)) sum_k |S_k(1) - S_k(0)|.
inline double averaged_entanglement_change(const EntanglementProfile& p0, const EntanglementProfile& p1) {
    if (p0.entropies.size() != p1.entropies.size() || p0.entropies.empty())
        throw ValidationError("averaged_entanglement_change: profile length mismatch");
    double d = 0.0;
    for (std::size_t k = 0; k < p0.entropies.size(); ++k) d += std::abs(p1.entropies[k] - p0.entropies[k]);
    return d / static_cast<double>(p0.entropies.size());
}

/// Entanglement change against path cost. The ratio nielsen / change is an
/// empirical upper estimate of the constant c; nothing about c is asserted.
inline BoundReport verify_theorem2(const GeneratorPath& path, const EntanglementProfile& p0,
                                   const EntanglementProfile& p1) {
    if (p0.num_qubits() != path.num_qubits() || p1.num_qubits() != path.num_qubits())
        throw ValidationError("verify_theorem2: profile does not match path size");
    BoundReport rep;
    rep.kind = "theorem2";
    const double change = averaged_entanglement_change(p0, p1);
    const double nielsen = nielsen_path_cost(path);
    rep.quantities = {{"averaged_entanglement_change", change}, {"nielsen_cost", nielsen}};
    if (change > 0.0) rep.quantities["c_upper_estimate"] = nielsen / change;
    return rep;
}

/// Gate-by-gate check of the exact locality facts: cuts not crossed by a gate keep
/// their entropy (<= 1e-10), a crossed cut changes by at most 2 ln 2 (+1e-9).
inline BoundReport verify_theorem2(const PureState& psi0, const BrickworkCircuit& c) {
    if (c.n != psi0.num_qubits()) throw ValidationError("verify_theorem2: circuit size mismatch");
    const int n = c.n;
    const auto& ord = psi0.ordering();
    BoundReport rep;
    rep.kind = "theorem2_circuit";
    rep.seed = c.seed;
    CVector v = psi0.amplitudes();
    EntanglementProfile before = entanglement_profile(psi0);
    const EntanglementProfile initial = before;
    double max_drift = 0.0, max_crossed = 0.0;
    int drift_violations = 0, capacity_violations = 0;
    for (const auto& layer : c.layers) {
        for (const auto& g : layer) {
            apply_two_qubit(v, n, ord.site_at(g.position), ord.site_at(g.position + 1), g.unitary);
            const EntanglementProfile after = entanglement_profile(PureState::normalized(n, v, ord));
            for (int k = 1; k < n; ++k) {
                const double ds = std::abs(after.entropies[static_cast<std::size_t>(k - 1)] -
                                           before.entropies[static_cast<std::size_t>(k - 1)]);
                if (k == g.position + 1) {
                    max_crossed = std::max(max_crossed, ds);
                    if (ds > 2.0 * std::log(2.0) + 1e-9) ++capacity_violations;
                } else {
                    max_drift = std::max(max_drift, ds);
                    if (ds > 1e-10) ++drift_violations;
                }
            }
            before = after;
        }
    }
    const double change = averaged_entanglement_change(initial, before);
    const double nielsen = nielsen_path_cost(circuit_generator_path(c, ord));
    rep.quantities = {{"averaged_entanglement_change", change},
                      {"nielsen_cost", nielsen},
                      {"max_uncrossed_drift", max_drift},
                      {"max_crossed_change", max_crossed},
                      {"depth", static_cast<double>(c.depth)}};
    if (change > 0.0) rep.quantities["c_upper_estimate"] = nielsen / change;
    rep.margins = {{"drift_margin", 1e-10 - max_drift}, {"capacity_margin", 2.0 * std::log(2.0) - max_crossed}};
    if (drift_violations > 0) rep.violations.push_back("uncrossed_cut_drift");
    if (capacity_violations > 0) rep.violations.push_back("crossed_cut_capacity");
    return rep;
}

/// |0> -> |1> along G = (pi/2) Y: Nielsen cost pi/2, QFC pi/2, Bures bound 1.
inline std::pair<GeneratorPath, PureState> single_qubit_geodesic() {
    GeneratorPath path(1, {{1.0, {{PauliString::parse("Y"), std::numbers::pi / 2}}}});
    return {std::move(path), PureState::basis(1, 0)};
}

}  // namespace qckit
