#pragma once

#include "qckit/common.hpp"
#include "qckit/statespace.hpp"

#include <cmath>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace qckit {

enum class PauliBasis : std::uint8_t { X = 0, Y = 1, Z = 2 };

/// One randomized measurement: a basis and a +/-1 outcome per qubit. The local
/// estimator is sigma_i = 3 U^dag |b><b| U - I = (I + 3 s P)/2.
struct ShadowSample {
    std::vector<PauliBasis> bases;
    std::vector<std::int8_t> outcomes;
};

struct ShadowEnsemble {
    int n = 0;
    std::uint64_t seed = 0;
    std::string source;  // provenance label
    std::vector<ShadowSample> samples;

    int size() const { return static_cast<int>(samples.size()); }
};

/// 2x2 local estimator matrix (I + 3 s P)/2.
inline Eigen::Matrix2cd local_estimator(PauliBasis basis, int outcome) {
    Eigen::Matrix2cd p;
    switch (basis) {
        case PauliBasis::X: p << 0, 1, 1, 0; break;
        case PauliBasis::Y: p << 0, Complex(0, -1), Complex(0, 1), 0; break;
        case PauliBasis::Z: p << 1, 0, 0, -1; break;
    }
    return 0.5 * (Eigen::Matrix2cd::Identity() + 3.0 * outcome * p);
}

/// tr(sigma sigma') = 1/2 + (9/2) s s' [P == P'].
inline double local_overlap(PauliBasis b1, int s1, PauliBasis b2, int s2) {
    return b1 == b2 ? 0.5 + 4.5 * s1 * s2 : 0.5;
}

namespace detail {

/// Rotates qubit q so that a Z measurement samples the requested basis:
/// H for X, H S^dag for Y.
inline void rotate_to_z(CVector& v, int n, int q, PauliBasis basis) {
    if (basis == PauliBasis::Z) return;
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2cd u;
    if (basis == PauliBasis::X)
        u << r, r, r, -r;
    else
        u << r, Complex(0, -r), r, Complex(0, r);
    const std::uint64_t m = std::uint64_t{1} << bit_of(n, q);
    for (std::uint64_t b = 0; b < dim_of(n); ++b) {
        if (b & m) continue;
        const auto i0 = static_cast<Eigen::Index>(b), i1 = static_cast<Eigen::Index>(b | m);
        const Complex a0 = v[i0], a1 = v[i1];
        v[i0] = u(0, 0) * a0 + u(0, 1) * a1;
        v[i1] = u(1, 0) * a0 + u(1, 1) * a1;
    }
}

}  // namespace detail

/// T independent snapshots: uniform Pauli basis per qubit, outcome drawn from the
/// exact Born distribution. Sample t uses its own RNG stream derive_seed(seed, t).
inline ShadowEnsemble collect_shadows(const PureState& psi, int T, std::uint64_t seed, unsigned threads = 1) {
    if (T < 1) throw ValidationError("collect_shadows: T must be at least 1");
    const int n = psi.num_qubits();
    ShadowEnsemble ens{n, seed, "", std::vector<ShadowSample>(static_cast<std::size_t>(T))};
    parallel_for(static_cast<std::size_t>(T), threads, [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(seed, t));
        std::uniform_int_distribution<int> pick(0, 2);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        ShadowSample s;
        CVector v = psi.amplitudes();
        for (int q = 0; q < n; ++q) {
            s.bases.push_back(static_cast<PauliBasis>(pick(rng)));
            detail::rotate_to_z(v, n, q, s.bases.back());
        }
        double u = unif(rng), acc = 0.0;
        std::uint64_t outcome = dim_of(n) - 1;
        for (std::uint64_t b = 0; b < dim_of(n); ++b) {
            acc += std::norm(v[static_cast<Eigen::Index>(b)]);
            if (u < acc) {
                outcome = b;
                break;
            }
        }
        // Guard against the rounding tail landing on a zero-probability index.
        while (std::norm(v[static_cast<Eigen::Index>(outcome)]) == 0.0 && outcome > 0) --outcome;
        for (int q = 0; q < n; ++q) s.outcomes.push_back(((outcome >> bit_of(n, q)) & 1u) ? -1 : 1);
        ens.samples[t] = std::move(s);
    });
    return ens;
}

/// Raw Hermitian estimate (1/T) sum_t kron_{i in subset} sigma_i^(t). Trace 1,
/// not necessarily PSD.
struct ShadowEstimate {
    std::vector<int> support;
    CMatrix matrix;

    /// Eigenvalues clipped at zero and renormalized to unit trace. Biased.
    DensityMatrix project_psd() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (matrix + matrix.adjoint()));
        RVector vals = es.eigenvalues().cwiseMax(0.0);
        const double s = vals.sum();
        if (!(s > 0.0)) throw NumericalError("ShadowEstimate: projection has zero trace");
        vals /= s;
        CMatrix m = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
        m = 0.5 * (m + m.adjoint()).eval();
        return {support, std::move(m)};
    }
};

namespace detail {

inline CMatrix snapshot_product(const ShadowSample& s, std::span<const int> subset) {
    CMatrix m = CMatrix::Ones(1, 1);
    for (int q : subset) {
        const Eigen::Matrix2cd loc = local_estimator(s.bases[static_cast<std::size_t>(q)],
                                                     s.outcomes[static_cast<std::size_t>(q)]);
        CMatrix next(m.rows() * 2, m.cols() * 2);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) next.block(2 * i, 2 * j, 2, 2) = m(i, j) * loc;
        m = std::move(next);
    }
    return m;
}

inline void check_shadow_subset(const ShadowEnsemble& e, std::span<const int> subset) {
    if (subset.empty()) throw ValidationError("shadow_rdm: empty subset");
    if (subset.size() > 4) throw ValidationError("shadow_rdm: subset larger than 4 qubits");
    check_subset(e.n, subset, "shadow_rdm");
    if (e.samples.empty()) throw ValidationError("shadow_rdm: empty ensemble");
}

}  // namespace detail

inline ShadowEstimate shadow_rdm(const ShadowEnsemble& e, std::span<const int> subset) {
    detail::check_shadow_subset(e, subset);
    const auto d = static_cast<Eigen::Index>(dim_of(static_cast<int>(subset.size())));
    CMatrix acc = CMatrix::Zero(d, d);
    for (const auto& s : e.samples) acc += detail::snapshot_product(s, subset);
    acc /= static_cast<double>(e.samples.size());
    return {std::vector<int>(subset.begin(), subset.end()), std::move(acc)};
}

/// Median-of-means variant: entrywise median (real and imaginary parts separately)
/// over `groups` equal batches. Not used by the kernel.
inline ShadowEstimate shadow_rdm_median_of_means(const ShadowEnsemble& e, std::span<const int> subset, int groups) {
    detail::check_shadow_subset(e, subset);
    if (groups < 1 || groups > e.size()) throw ValidationError("shadow_rdm_median_of_means: bad group count");
    const auto d = static_cast<Eigen::Index>(dim_of(static_cast<int>(subset.size())));
    const std::size_t per = e.samples.size() / static_cast<std::size_t>(groups);
    std::vector<CMatrix> means;
    for (int g = 0; g < groups; ++g) {
        CMatrix acc = CMatrix::Zero(d, d);
        for (std::size_t t = static_cast<std::size_t>(g) * per; t < (static_cast<std::size_t>(g) + 1) * per; ++t)
            acc += detail::snapshot_product(e.samples[t], subset);
        means.push_back(acc / static_cast<double>(per));
    }
    CMatrix out(d, d);
    std::vector<double> re(means.size()), im(means.size());
    auto median = [](std::vector<double>& xs) {
        std::sort(xs.begin(), xs.end());
        const std::size_t m = xs.size();
        return m % 2 ? xs[m / 2] : 0.5 * (xs[m / 2 - 1] + xs[m / 2]);
    };
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            for (std::size_t g = 0; g < means.size(); ++g) {
                re[g] = means[g](i, j).real();
                im[g] = means[g](i, j).imag();
            }
            out(i, j) = Complex{median(re), median(im)};
        }
    return {std::vector<int>(subset.begin(), subset.end()), std::move(out)};
}

/// log K_CS = (beta / (T1 T2)) sum_{t,t'} exp[(nu/n) sum_i tr(sigma_i^t sigma~_i^t')].
inline double log_shadow_kernel(const ShadowEnsemble& a, const ShadowEnsemble& b, double beta, double nu) {
    if (a.n != b.n) throw ValidationError("shadow_kernel: qubit-count mismatch");
    if (a.samples.empty() || b.samples.empty()) throw ValidationError("shadow_kernel: empty ensemble");
    const int n = a.n;
    // Per-qubit code 0..5 = basis*2 + (outcome<0); overlap depends only on the codes.
    auto encode = [n](const ShadowEnsemble& e) {
        std::vector<std::uint8_t> codes;
        codes.reserve(e.samples.size() * static_cast<std::size_t>(n));
        for (const auto& s : e.samples)
            for (int q = 0; q < n; ++q)
                codes.push_back(static_cast<std::uint8_t>(static_cast<int>(s.bases[static_cast<std::size_t>(q)]) * 2 +
                                                          (s.outcomes[static_cast<std::size_t>(q)] < 0)));
        return codes;
    };
    // Canonical argument order makes the summation order, and so the result, symmetric.
    auto ca = encode(a), cb = encode(b);
    const bool swap = std::forward_as_tuple(b.samples.size(), cb) < std::forward_as_tuple(a.samples.size(), ca);
    if (swap) std::swap(ca, cb);
    double table[6][6];
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            table[i][j] = local_overlap(static_cast<PauliBasis>(i / 2), i % 2 ? -1 : 1, static_cast<PauliBasis>(j / 2),
                                        j % 2 ? -1 : 1);
    double total = 0.0;
    const std::size_t ta = swap ? b.samples.size() : a.samples.size();
    const std::size_t tb = swap ? a.samples.size() : b.samples.size();
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t t = 0; t < ta; ++t) {
        const std::uint8_t* ra = &ca[t * un];
        for (std::size_t u = 0; u < tb; ++u) {
            const std::uint8_t* rb = &cb[u * un];
            double s = 0.0;
            for (std::size_t q = 0; q < un; ++q) s += table[ra[q]][rb[q]];
            total += std::exp(nu / n * s);
        }
    }
    return beta * total / (static_cast<double>(ta) * static_cast<double>(tb));
}

inline double shadow_kernel(const ShadowEnsemble& a, const ShadowEnsemble& b, double beta, double nu) {
    return std::exp(log_shadow_kernel(a, b, beta, nu));
}

/// Text form: "shadows <n> <T> <seed> <source>" then one line per sample with a
/// basis string over {X,Y,Z} and an outcome bit string ('1' = outcome -1).
inline std::string to_text(const ShadowEnsemble& e) {
    std::ostringstream os;
    os << "shadows " << e.n << ' ' << e.size() << ' ' << e.seed << ' ' << (e.source.empty() ? "-" : e.source) << '\n';
    static constexpr char kName[3] = {'X', 'Y', 'Z'};
    for (const auto& s : e.samples) {
        for (auto b : s.bases) os << kName[static_cast<int>(b)];
        os << ' ';
        for (auto o : s.outcomes) os << (o < 0 ? '1' : '0');
        os << '\n';
    }
    return os.str();
}

inline ShadowEnsemble shadows_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string tag, source;
    int n = 0, T = 0;
    std::uint64_t seed = 0;
    if (!(is >> tag >> n >> T >> seed >> source) || tag != "shadows" || n < 1 || T < 1)
        throw ValidationError("shadow text: bad header");
    ShadowEnsemble e{n, seed, source == "-" ? "" : source, {}};
    for (int t = 0; t < T; ++t) {
        std::string bases, bits;
        if (!(is >> bases >> bits) || static_cast<int>(bases.size()) != n || static_cast<int>(bits.size()) != n)
            throw ValidationError("shadow text: bad sample line");
        ShadowSample s;
        for (int q = 0; q < n; ++q) {
            switch (bases[static_cast<std::size_t>(q)]) {
                case 'X': s.bases.push_back(PauliBasis::X); break;
                case 'Y': s.bases.push_back(PauliBasis::Y); break;
                case 'Z': s.bases.push_back(PauliBasis::Z); break;
                default: throw ValidationError("shadow text: bad basis letter");
            }
            const char c = bits[static_cast<std::size_t>(q)];
            if (c != '0' && c != '1') throw ValidationError("shadow text: bad outcome bit");
            s.outcomes.push_back(c == '1' ? -1 : 1);
        }
        e.samples.push_back(std::move(s));
    }
    return e;
}

}  // namespace qckit
