// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.

#include "qckit/pipeline.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>

using namespace qckit;
namespace fs = std::filesystem;

namespace {

constexpr double kFidelityOracleTol = 1e-9;
constexpr double kMonotonicityTol = 1e-9;
constexpr double kChainTol = 1e-8;
constexpr double kGeodesicTol = 1e-6;
constexpr double kLocalBoundTol = 1e-6;
constexpr double kDriftTol = 1e-10;
constexpr double kCapacitySlack = 1e-9;
constexpr double kToricTol = 1e-10;
constexpr double kShadowSigmas = 3.0;
constexpr int kShadowPassesRequired = 95;
constexpr double kSymmetryTol = 1e-15;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const char* name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = limit_seconds <= 0.0 || secs < limit_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    if (limit_seconds > 0.0)
        std::printf("%s %s: %s [%.1f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs,
                    limit_seconds);
    else
        std::printf("%s %s: %s [%.1f s]\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

void info(const std::string& line) {
    std::printf("INFO %s\n", line.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

RunConfig config(const char* file) { return load_run_config(fs::path(QCKIT_CONFIG_DIR) / file); }

// Random mixed state rho = M M^dag / tr with its exact rank factor M (d x rank).
std::pair<DensityMatrix, CMatrix> ginibre_state(int n, int rank, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    const auto d = static_cast<Eigen::Index>(dim_of(n));
    CMatrix m(d, rank);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < rank; ++j) m(i, j) = Complex{g(rng), g(rng)};
    m /= m.norm();
    CMatrix rho = m * m.adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    std::vector<int> sup(static_cast<std::size_t>(n));
    std::iota(sup.begin(), sup.end(), 0);
    return {DensityMatrix(sup, rho), m};
}

Outcome fidelity_bures() {
    // Oracle: F = ||M_rho^dag M_sigma||_1 from the generating factors, no matrix roots.
    std::mt19937_64 rng(20240101);
    double worst_f = 0.0, worst_b = 0.0;
    int mono_violations = 0;
    for (int t = 0; t < 500; ++t) {
        const int n = 2 + t % 2;
        const auto [rho, mr] = ginibre_state(n, 1 + t % dim_of(n), rng);
        const auto [sigma, ms] = ginibre_state(n, 1 + (t / 2) % dim_of(n), rng);
        const double fo = Eigen::JacobiSVD<CMatrix>(mr.adjoint() * ms).singularValues().sum();
        const double f = uhlmann_fidelity(rho, sigma);
        worst_f = std::max(worst_f, std::abs(f - fo));
        worst_b = std::max(worst_b, std::abs(bures_distance(rho, sigma) - std::sqrt(std::max(0.0, 2.0 - 2.0 * fo))));
        std::vector<int> keep{t % n};
        if (n == 3 && t % 4 == 1) keep.push_back((t + 1) % n);
        const double fr = uhlmann_fidelity(partial_trace(rho, keep), partial_trace(sigma, keep));
        if (fr < f - kMonotonicityTol) ++mono_violations;
    }
    return {worst_f <= kFidelityOracleTol && worst_b <= kFidelityOracleTol && mono_violations == 0,
            fmt("500 pairs (ranks 1..d), max |F - F_oracle| = %.2e, max |D_B - oracle| = %.2e, monotonicity "
                "violations %d",
                worst_f, worst_b, mono_violations)};
}

Outcome qfi_susceptibility() {
    // C(ds) = |F_Q ds^2 / 4 - D_B^2| / ds^3 over ds = 1e-2, 5e-3, 2.5e-3, 1.25e-3.
    // The remainder is O(ds^4 |G|^4), so C must stay below |G|_1^4 and not grow.
    int bad = 0;
    double worst_ratio = 0.0, worst_c = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + t % 2;
        const auto ord = ChainOrdering::identity(n);
        const PureState psi = random_state(n, derive_seed(31, static_cast<std::uint64_t>(t)), ord);
        const auto terms = random_local_path(n, derive_seed(32, static_cast<std::uint64_t>(t)), ord).segments()[0].terms;
        double l1 = 0.0;
        for (const auto& term : terms) l1 += std::abs(term.coeff);
        std::vector<double> cs;
        const GeneratorPath unit(n, {{1.0, terms}});
        const double fq = qfi_along_path(trotter_evolve(psi, unit), unit)[0];
        for (double ds = 1e-2; ds >= 1e-3; ds /= 2.0) {
            // Evolving for time ds under G is a unit-length path under ds * G.
            auto scaled = terms;
            for (auto& term : scaled) term.coeff *= ds;
            const auto states = trotter_evolve(psi, GeneratorPath(n, {{1.0, scaled}}));
            const double db = bures_distance(DensityMatrix::from_pure(states[0]), DensityMatrix::from_pure(states[1]));
            cs.push_back(std::abs(0.25 * fq * ds * ds - db * db) / (ds * ds * ds));
        }
        const double cmax = *std::max_element(cs.begin(), cs.end());
        worst_c = std::max(worst_c, cmax / std::pow(l1, 4));
        worst_ratio = std::max(worst_ratio, cs.back() / std::max(cs.front(), 1e-300));
        if (!std::isfinite(cmax) || cmax > std::pow(l1, 4) || cs.back() > cs.front() + 1e-6) ++bad;
    }
    return {bad == 0, fmt("100 pairs, max C/|G|_1^4 = %.2e, max C(1.25e-3)/C(1e-2) = %.3f, failures %d", worst_c,
                          worst_ratio, bad)};
}

BoundCampaign path_campaign;

Outcome theorem1_chain() {
    RunConfig run = config("verify-bounds.json");
    run.bounds.gate_trials = 0;
    path_campaign = verify_bounds(run);
    int trials = 0, violations = 0;
    double min_nq = 1e300, min_qb = 1e300;
    bool geodesic_ok = false;
    std::string geo;
    for (const auto& r : path_campaign.reports) {
        if (r.kind == "theorem1_geodesic") {
            const double a = r.quantities.at("nielsen_cost"), b = r.quantities.at("qfc_cost"),
                         c = r.quantities.at("bures_bound");
            geodesic_ok = std::abs(a - std::numbers::pi / 2) <= kGeodesicTol &&
                          std::abs(b - std::numbers::pi / 2) <= kGeodesicTol && std::abs(c - 1.0) <= kGeodesicTol;
            geo = fmt("geodesic (%.9f, %.9f, %.9f)", a, b, c);
        }
        if (r.kind != "theorem1") continue;
        ++trials;
        const double nq = r.margins.at("nielsen_minus_qfc"), qb = r.margins.at("qfc_minus_bures");
        min_nq = std::min(min_nq, nq);
        min_qb = std::min(min_qb, qb);
        if (nq < -kChainTol || qb < -kChainTol) ++violations;
    }
    return {trials == 200 && violations == 0 && geodesic_ok,
            fmt("%d paths at n = 4, chain violations %d, min margins (%.3e, %.3e), ", trials, violations, min_nq,
                min_qb) +
                geo};
}

Outcome theorem1_local() {
    int trials = 0, violations = 0;
    double min_margin = 1e300;
    for (const auto& r : path_campaign.reports) {
        if (r.kind != "theorem1") continue;
        ++trials;
        const double m = r.margins.at("nielsen_minus_local");
        min_margin = std::min(min_margin, m);
        if (m < -kLocalBoundTol) ++violations;
    }
    return {trials == 200 && violations == 0,
            fmt("%d paths, 2-site covers, min (nielsen - local sum) = %.4f, violations %d", trials, min_margin,
                violations)};
}

Outcome theorem2_gates() {
    RunConfig run = config("verify-bounds.json");
    run.bounds.path_trials = 0;
    const auto c = verify_bounds(run);
    int trials = 0, violations = 0;
    double drift = 0.0, crossed = 0.0;
    for (const auto& r : c.reports) {
        if (r.kind != "theorem2_circuit") continue;
        ++trials;
        const double d = r.quantities.at("max_uncrossed_drift"), x = r.quantities.at("max_crossed_change");
        drift = std::max(drift, d);
        crossed = std::max(crossed, x);
        if (d > kDriftTol || x > 2.0 * std::log(2.0) + kCapacitySlack) ++violations;
    }
    return {trials == 100 && violations == 0,
            fmt("%d gates at n = %d, max uncrossed drift %.2e, max crossed |dS| %.4f (2 ln 2 = %.4f), violations %d",
                trials, run.bounds.gate_n, drift, crossed, 2.0 * std::log(2.0), violations)};
}

Outcome toric_exactness() {
    const ToricLattice lat(2, 2);
    const auto ord = lat.default_ordering();
    const auto h = build_toric(lat);
    Eigen::SelfAdjointEigenSolver<RMatrix> es(h.dense().real(), Eigen::EigenvaluesOnly);
    const double e0 = es.eigenvalues()[0];
    const auto count = (es.eigenvalues().array() < e0 + 1e-9).count();
    const auto gs = ground_state(h, ord);
    const auto st = toric_default_stabilizer_state(lat);
    const auto ps = stab_entanglement_profile(st, ord);
    const auto pd = entanglement_profile(gs.state);
    double prof = 0.0, rdm = 0.0;
    for (std::size_t k = 0; k < pd.entropies.size(); ++k) prof = std::max(prof, std::abs(ps.entropies[k] - pd.entropies[k]));
    for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b) {
            const std::vector<int> sub{a, b};
            rdm = std::max(rdm, testing::max_abs_diff(stab_reduced_density_matrix(st, sub).matrix(),
                                                      partial_trace(gs.state, sub).matrix()));
        }
    const bool ok = std::abs(e0 + 8.0) <= kToricTol && count == 4 && gs.degeneracy == 4 &&
                    std::abs(gs.energy + 8.0) <= kToricTol && prof <= kToricTol && rdm <= kToricTol;
    return {ok, fmt("E0 = %.12f, dense degeneracy %ld, profile diff %.2e, max 2-body RDM diff %.2e", e0,
                    static_cast<long>(count), prof, rdm)};
}

Outcome fig2() {
    const RunConfig base = config("xxz-sweep.json");
    const auto data = generate_datasets(base);
    const Dataset& d = data.at(0);
    bool ok = true;
    std::string detail;
    for (const auto& k : base.kernels) {
        std::vector<int> first;
        int contiguous = 0, stable = 0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            RunConfig run = base;
            run.seed = base.seed + s;
            const auto kr = compute_kernel(d, k, run);
            const auto emb = embed_kernel(kr.kernel.values, run.embedding);
            const auto labels = cluster_coordinates(emb.coordinates, run).labels;
            const std::set<int> distinct(labels.begin(), labels.end());
            contiguous += distinct.size() == 3 && contiguous_labels(labels);
            if (s == 0) first = labels;
            stable += same_partition(first, labels);
            if (s == 0) {
                std::string runs;
                for (int l : labels) runs += static_cast<char>('0' + l);
                info("fig2 " + to_string(k.kind) + " labels (seed " + std::to_string(run.seed) + "): " + runs);
            }
        }
        ok = ok && contiguous == 10 && stable == 10;
        if (k.kind == KernelKind::Fidelity) {
            // Same subset plan, clustering seed varied alone.
            const auto kr = compute_kernel(d, k, base);
            const auto emb = embed_kernel(kr.kernel.values, base.embedding);
            const auto ref = kmeans(emb.coordinates, 3, 0).labels;
            int same = 0;
            for (std::uint64_t s = 0; s < 10; ++s) same += same_partition(ref, kmeans(emb.coordinates, 3, s).labels);
            info(fmt("fig2 fidelity with one subset plan: %d/10 clustering seeds give the same partition", same));
        }
        detail += fmt("%s: contiguous 3-cluster %d/10, identical partitions %d/10; ", to_string(k.kind).c_str(),
                      contiguous, stable);
    }
    return {ok, detail + "n = 10, N = 30"};
}

struct Fig3Result {
    std::map<KernelKind, std::vector<double>> margins;
    int reach(KernelKind k) const {
        int r = -1;
        for (double m : margins.at(k)) {
            if (!(m > 0.0)) break;
            ++r;
        }
        return r;
    }
};

Fig3Result fig3_margins(const RunConfig& run) {
    Fig3Result r;
    for (const auto& o : run_pipeline(run))
        for (const auto& k : o.kernels) r.margins[k.run.config.kind].push_back(k.class_margin);
    return r;
}

Outcome fig3() {
    const RunConfig run = config("toric-vs-rps.json");
    const auto r = fig3_margins(run);
    const auto& f = r.margins.at(KernelKind::Fidelity);
    const auto& e = r.margins.at(KernelKind::Entanglement);
    std::string m;
    for (std::size_t i = 0; i < f.size(); ++i)
        m += fmt("d%d (F %.3f, E %.3f) ", run.toric.depths[i], f[i], e[i]);
    const bool ok = f[0] > 0.0 && e[0] > 0.0 && r.reach(KernelKind::Entanglement) >= r.reach(KernelKind::Fidelity);
    return {ok, "margins " + m + fmt("| positive through depth F %d, E %d", r.reach(KernelKind::Fidelity),
                                      r.reach(KernelKind::Entanglement))};
}

Outcome fig4() {
    const RunConfig run = config("etc-sweep.json");
    const auto out = run_pipeline(run);
    const double f = out[0].kernel(KernelKind::Fidelity).class_margin;
    const double e = out[0].kernel(KernelKind::Entanglement).class_margin;
    return {f > 0.0 && e > 0.0, fmt("h in [%.2f, %.2f], margins F %.4f, E %.4f", run.etc.h_min, run.etc.h_max, f, e)};
}

Outcome shadows() {
    int passes = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Dataset d;
        d.n = 2;
        d.ordering = ChainOrdering::identity(2);
        d.dense = {random_state(2, derive_seed(41, static_cast<std::uint64_t>(rep)), d.ordering)};
        d.shadows = {collect_shadows(d.dense[0], 10000, derive_seed(42, static_cast<std::uint64_t>(rep)))};
        bool all = true;
        for (const auto& row : shadow_summary(d).at(0).at("z_expectations")) {
            const double err = std::abs(row.at("estimate").get<double>() - row.at("exact").get<double>());
            all = all && err <= kShadowSigmas * row.at("standard_error").get<double>();
        }
        passes += all;
    }
    const auto out = run_pipeline(config("shadows.json"));
    const auto& meta = out[0].data.meta;
    auto within_minus_cross = [&](const RMatrix& k) {
        double tt = 0.0, tr = 0.0;
        int ntt = 0, ntr = 0;
        for (std::size_t i = 0; i < meta.size(); ++i)
            for (std::size_t j = 0; j < meta.size(); ++j) {
                if (i == j || meta[i].cls != "toric") continue;
                const double v = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (meta[j].cls == "toric") tt += v, ++ntt;
                else tr += v, ++ntr;
            }
        return tt / ntt - tr / ntr;
    };
    const RMatrix& ks = out[0].kernel(KernelKind::Shadow).run.kernel.values;
    const RMatrix& kf = out[0].kernel(KernelKind::Fidelity).run.kernel.values;
    const double asym = (ks - ks.transpose()).cwiseAbs().maxCoeff();
    const double gs = within_minus_cross(ks), gf = within_minus_cross(kf);
    const bool consistent = (gs > 0.0) == (gf > 0.0) && gs != 0.0 && gf != 0.0;
    return {passes >= kShadowPassesRequired && asym <= kSymmetryTol && consistent,
            fmt("Z within 3 SE in %d/100 repetitions (T = 1e4), shadow kernel asymmetry %.1e, "
                "toric-toric minus toric-RPS: shadow %.4f, fidelity %.4f",
                passes, asym, gs, gf)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv")
            out[fs::relative(e.path(), dir).generic_string()] = read_text_file(e.path());
    return out;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "qckit_acceptance_determinism";
    std::string detail;
    bool ok = true;
    for (const char* file : {"xxz-sweep.json", "toric-vs-rps.json", "etc-sweep.json", "shadows.json"}) {
        std::map<std::string, std::string> runs[2];
        for (int k = 0; k < 2; ++k) {
            RunConfig run = config(file);
            run.threads = k == 0 ? 1u : 2u;
            const fs::path dir = root / (std::string(file) + std::to_string(k));
            fs::remove_all(dir);
            stage_generate(run, dir);
            stage_kernel(run, dir);
            stage_embed(run, dir);
            stage_cluster(run, dir);
            runs[k] = csv_files(dir);
        }
        const bool same = runs[0] == runs[1] && !runs[0].empty();
        ok = ok && same;
        detail += fmt("%s %zu CSVs %s; ", file, runs[0].size(), same ? "identical" : "DIFFER");
    }
    fs::remove_all(root);
    return {ok, detail + "reruns use 1 and 2 threads"};
}

void robustness_survey() {
    // Seed sensitivity of the figure criteria; reported, not scored.
    int f3_both = 0, f3_order = 0, f4_f = 0, f4_e = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        RunConfig t = config("toric-vs-rps.json");
        t.seed = 1000 + static_cast<std::uint64_t>(s);
        const auto r = fig3_margins(t);
        f3_both += r.margins.at(KernelKind::Fidelity)[0] > 0.0 && r.margins.at(KernelKind::Entanglement)[0] > 0.0;
        f3_order += r.reach(KernelKind::Entanglement) >= r.reach(KernelKind::Fidelity);
        RunConfig e = config("etc-sweep.json");
        e.seed = 1000 + static_cast<std::uint64_t>(s);
        const auto out = run_pipeline(e);
        f4_f += out[0].kernel(KernelKind::Fidelity).class_margin > 0.0;
        f4_e += out[0].kernel(KernelKind::Entanglement).class_margin > 0.0;
    }
    info(fmt("toric-vs-rps over %d seeds: depth-0 separation by both kernels %d, ordering holds %d", seeds, f3_both,
             f3_order));
    info(fmt("etc-sweep over %d seeds: fidelity kernel separates %d, entanglement kernel separates %d", seeds, f4_f,
             f4_e));
}

}  // namespace

int main() {
    criterion("fidelity_bures", 30, fidelity_bures);
    criterion("qfi_bures_susceptibility", 60, qfi_susceptibility);
    criterion("theorem1_chain", 120, theorem1_chain);
    criterion("theorem1_local_bound", 0, theorem1_local);
    criterion("theorem2_single_gate", 60, theorem2_gates);
    criterion("toric_exactness", 60, toric_exactness);
    criterion("xxz_sweep_clusters", 300, fig2);
    criterion("toric_vs_rps_separation", 600, fig3);
    criterion("etc_sweep_separation", 600, fig4);
    criterion("shadow_estimator", 300, shadows);
    criterion("determinism", 0, determinism);
    robustness_survey();
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
    return failures == 0 ? 0 : 1;
}
