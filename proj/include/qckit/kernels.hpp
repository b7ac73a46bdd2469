#pragma once

#include "qckit/common.hpp"
#include "qckit/shadows.hpp"
#include "qckit/stabilizer.hpp"
#include "qckit/statespace.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qckit {

enum class KernelKind { Fidelity, Entanglement, Shadow };
enum class SubsetPolicy { Adjacent, Uniform };

inline std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::Fidelity: return "fidelity";
        case KernelKind::Entanglement: return "entanglement";
        case KernelKind::Shadow: return "shadow";
    }
    return "?";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "fidelity") return KernelKind::Fidelity;
    if (s == "entanglement") return KernelKind::Entanglement;
    if (s == "shadow") return KernelKind::Shadow;
    throw ValidationError("kernel.kind: unknown kernel '" + s + "'");
}

struct KernelConfig {
    KernelKind kind = KernelKind::Entanglement;
    double beta = 1.0;
    int r_max = 2;
    /// omega_r for r = 1..r_max; empty means omega_2 = 1/n and every other weight 0.
    std::vector<double> weights;
    /// Subsets drawn per order r; 0 means n.
    int subsets_per_order = 0;
    SubsetPolicy policy = SubsetPolicy::Adjacent;
    double nu = 1.0;
    bool normalize = true;

    void validate() const {
        if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("kernel.beta: must be positive");
        if (r_max < 1 || r_max > 4) throw ValidationError("kernel.r_max: must be in [1, 4]");
        if (!weights.empty() && static_cast<int>(weights.size()) != r_max)
            throw ValidationError("kernel.weights: need one weight per order r = 1..r_max");
        for (double w : weights)
            if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("kernel.weights: must be non-negative");
        if (subsets_per_order < 0) throw ValidationError("kernel.subsets_per_order: must be non-negative");
        if (!(nu > 0.0) || !std::isfinite(nu)) throw ValidationError("kernel.nu: must be positive");
    }

    std::vector<double> resolved_weights(int n) const {
        if (!weights.empty()) return weights;
        std::vector<double> w(static_cast<std::size_t>(r_max), 0.0);
        if (r_max >= 2) w[1] = 1.0 / n;
        else w[0] = 1.0 / n;
        return w;
    }
};

/// omega_r = nu^r / r!, the weights under which the shadow kernel is a member of
/// the fidelity-kernel family.
inline std::vector<double> shadow_limit_weights(double nu, int r_max) {
    std::vector<double> w;
    double v = 1.0;
    for (int r = 1; r <= r_max; ++r) {
        v *= nu / r;
        w.push_back(v);
    }
    return w;
}

/// The subsets shared by every pair of a dataset: subsets[r-1] lists the r-site
/// subsets and weights[r-1] their weight.
struct SubsetPlan {
    std::vector<std::vector<std::vector<int>>> subsets;
    std::vector<double> weights;
};

inline SubsetPlan sample_subsets(int n, const ChainOrdering& ord, const KernelConfig& cfg, std::uint64_t seed) {
    if (ord.size() != n) throw ValidationError("sample_subsets: ordering size mismatch");
    SubsetPlan plan;
    plan.weights = cfg.resolved_weights(n);
    std::mt19937_64 rng(seed);
    const int count = cfg.subsets_per_order > 0 ? cfg.subsets_per_order : n;
    for (int r = 1; r <= cfg.r_max; ++r) {
        std::vector<std::vector<int>> subs;
        if (plan.weights[static_cast<std::size_t>(r - 1)] > 0.0 && r <= n) {
            for (int i = 0; i < count; ++i) {
                std::vector<int> s;
                if (cfg.policy == SubsetPolicy::Adjacent) {
                    std::uniform_int_distribution<int> start(0, n - r);
                    const int p = start(rng);
                    for (int k = 0; k < r; ++k) s.push_back(ord.site_at(p + k));
                } else {
                    std::vector<int> all(static_cast<std::size_t>(n));
                    std::iota(all.begin(), all.end(), 0);
                    for (int k = 0; k < r; ++k) {
                        std::uniform_int_distribution<int> pick(k, n - 1);
                        std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
                    }
                    s.assign(all.begin(), all.begin() + r);
                }
                std::sort(s.begin(), s.end());
                subs.push_back(std::move(s));
            }
        }
        plan.subsets.push_back(std::move(subs));
    }
    return plan;
}

/// Anything that yields reduced density matrices on requested subsets.
using RdmProvider = std::function<DensityMatrix(std::span<const int>)>;

inline RdmProvider dense_provider(const PureState& psi) {
    return [&psi](std::span<const int> s) { return partial_trace(psi, s); };
}

inline RdmProvider stabilizer_provider(const StabilizerState& st) {
    return [&st](std::span<const int> s) { return stab_reduced_density_matrix(st, s); };
}

/// log K_F = beta sum_r omega_r sum_{D in plan} F[rho(D), rho~(D)].
inline double log_fidelity_kernel(const RdmProvider& a, const RdmProvider& b, double beta, const SubsetPlan& plan) {
    if (!(beta >= 0.0)) throw ValidationError("fidelity_kernel: beta must be non-negative");
    double acc = 0.0;
    for (std::size_t r = 0; r < plan.subsets.size(); ++r) {
        const double w = plan.weights[r];
        if (w == 0.0) continue;
        for (const auto& s : plan.subsets[r]) acc += w * uhlmann_fidelity(a(s), b(s));
    }
    return beta * acc;
}

inline double fidelity_kernel(const RdmProvider& a, const RdmProvider& b, double beta, const SubsetPlan& plan) {
    return std::exp(log_fidelity_kernel(a, b, beta, plan));
}

/// log K_E = -(beta/n) sum_k |S_k(p) - S_k(q)| with n = profile length + 1.
inline double log_entanglement_kernel(const EntanglementProfile& p, const EntanglementProfile& q, double beta) {
    if (p.entropies.size() != q.entropies.size()) throw ValidationError("entanglement_kernel: profile length mismatch");
    if (!(beta >= 0.0)) throw ValidationError("entanglement_kernel: beta must be non-negative");
    double l1 = 0.0;
    for (std::size_t k = 0; k < p.entropies.size(); ++k) l1 += std::abs(p.entropies[k] - q.entropies[k]);
    return -beta / p.num_qubits() * l1;
}

inline double entanglement_kernel(const EntanglementProfile& p, const EntanglementProfile& q, double beta) {
    return std::exp(log_entanglement_kernel(p, q, beta));
}

struct KernelMatrix {
    RMatrix values;   // normalized (or raw when normalization is "none")
    RMatrix log_raw;  // log of the unnormalized kernel
    std::string normalization = "cosine";

    Eigen::Index size() const { return values.rows(); }
    RMatrix raw() const { return log_raw.array().exp().matrix(); }
};

/// Assembles a kernel matrix from a pairwise log-kernel. Only the upper triangle
/// is evaluated; cosine normalization K(i,j)/sqrt(K(i,i)K(j,j)) is done in log space.
inline KernelMatrix assemble_kernel(std::size_t count, const std::function<double(std::size_t, std::size_t)>& log_k,
                                    bool normalize, unsigned threads = 1) {
    if (count == 0) throw ValidationError("build_kernel_matrix: empty dataset");
    const auto N = static_cast<Eigen::Index>(count);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = i; j < count; ++j) pairs.emplace_back(i, j);
    std::vector<double> vals(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) { vals[p] = log_k(pairs[p].first, pairs[p].second); });
    KernelMatrix km;
    km.log_raw.resize(N, N);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(pairs[p].first), j = static_cast<Eigen::Index>(pairs[p].second);
        km.log_raw(i, j) = km.log_raw(j, i) = vals[p];
    }
    km.values.resize(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            km.values(i, j) = normalize ? std::exp(km.log_raw(i, j) - 0.5 * (km.log_raw(i, i) + km.log_raw(j, j)))
                                        : std::exp(km.log_raw(i, j));
    km.normalization = normalize ? "cosine" : "none";
    return km;
}

inline KernelMatrix build_kernel_matrix(std::span<const EntanglementProfile> profiles, const KernelConfig& cfg,
                                        unsigned threads = 1) {
    cfg.validate();
    if (cfg.kind != KernelKind::Entanglement) throw ValidationError("build_kernel_matrix: config kind is not entanglement");
    for (const auto& p : profiles)
        if (p.entropies.size() != profiles.front().entropies.size())
            throw ValidationError("build_kernel_matrix: heterogeneous dataset (profile lengths differ)");
    return assemble_kernel(
        profiles.size(),
        [&](std::size_t i, std::size_t j) {
            return log_entanglement_kernel(profiles[i], profiles[j], cfg.beta);
        },
        cfg.normalize, threads);
}

/// Fidelity kernel over providers that all describe `n`-qubit states; the RDMs on
/// the plan's subsets are computed once per sample.
inline KernelMatrix build_kernel_matrix(std::span<const RdmProvider> providers, int n, const KernelConfig& cfg,
                                        const SubsetPlan& plan, unsigned threads = 1) {
    cfg.validate();
    if (cfg.kind != KernelKind::Fidelity) throw ValidationError("build_kernel_matrix: config kind is not fidelity");
    (void)n;
    std::vector<std::vector<DensityMatrix>> cache(providers.size());
    parallel_for(providers.size(), threads, [&](std::size_t i) {
        for (const auto& order : plan.subsets)
            for (const auto& s : order) cache[i].push_back(providers[i](s));
    });
    return assemble_kernel(
        providers.size(),
        [&](std::size_t i, std::size_t j) {
            double acc = 0.0;
            std::size_t idx = 0;
            for (std::size_t r = 0; r < plan.subsets.size(); ++r)
                for (std::size_t k = 0; k < plan.subsets[r].size(); ++k, ++idx)
                    if (plan.weights[r] != 0.0) acc += plan.weights[r] * uhlmann_fidelity(cache[i][idx], cache[j][idx]);
            return cfg.beta * acc;
        },
        cfg.normalize, threads);
}

inline KernelMatrix build_kernel_matrix(std::span<const PureState> states, const KernelConfig& cfg,
                                        const SubsetPlan& plan, unsigned threads = 1) {
    if (states.empty()) throw ValidationError("build_kernel_matrix: empty dataset");
    const int n = states.front().num_qubits();
    std::vector<RdmProvider> providers;
    for (const auto& s : states) {
        if (s.num_qubits() != n) throw ValidationError("build_kernel_matrix: heterogeneous dataset (qubit counts differ)");
        providers.push_back(dense_provider(s));
    }
    return build_kernel_matrix(std::span<const RdmProvider>(providers), n, cfg, plan, threads);
}

inline KernelMatrix build_kernel_matrix(std::span<const ShadowEnsemble> ensembles, const KernelConfig& cfg,
                                        unsigned threads = 1) {
    cfg.validate();
    if (cfg.kind != KernelKind::Shadow) throw ValidationError("build_kernel_matrix: config kind is not shadow");
    for (const auto& e : ensembles)
        if (e.n != ensembles.front().n) throw ValidationError("build_kernel_matrix: heterogeneous dataset (qubit counts differ)");
    return assemble_kernel(
        ensembles.size(),
        [&](std::size_t i, std::size_t j) { return log_shadow_kernel(ensembles[i], ensembles[j], cfg.beta, cfg.nu); },
        cfg.normalize, threads);
}

}  // namespace qckit
