#pragma once

#include "qckit/circuits.hpp"
#include "qckit/embed.hpp"
#include "qckit/io.hpp"
#include "qckit/kernels.hpp"
#include "qckit/models.hpp"
#include "qckit/shadows.hpp"
#include "qckit/stabilizer.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qckit {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Run configuration

enum class Experiment { XXZSweep, ToricVsRps, EtcSweep, VerifyBounds, Shadows };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::XXZSweep: return "xxz-sweep";
        case Experiment::ToricVsRps: return "toric-vs-rps";
        case Experiment::EtcSweep: return "etc-sweep";
        case Experiment::VerifyBounds: return "verify-bounds";
        case Experiment::Shadows: return "shadows";
    }
    return "?";
}

struct XXZSweepModel {
    int n = 10;
    int samples = 30;
    double j1 = 1.0;
    double ratio_max = 2.5;  // grid J2/J1 = ratio_max * i / samples, i = 1..samples
    double delta = 3.0;
    double h0 = 0.0;
};

struct ToricModel {
    int lx = 2;
    int ly = 2;
    int toric_samples = 10;
    int rps_samples = 10;
    std::vector<int> depths = {0, 1, 2, 3, 4};
    std::string backend = "dense";  // or "stabilizer" (depth 0 only)
};

struct ETCModel {
    int lx = 2;
    int ly = 2;
    double jw = 1.0;
    double jh = -1.0;
    double h_min = 0.0;
    double h_max = 0.2;
    int samples = 10;
    int rps_samples = 10;
};

struct BoundsConfig {
    int n = 4;
    int path_trials = 200;
    int cover_width = 2;
    int gate_n = 8;
    int gate_trials = 100;
    int prep_depth = 2;  // brickwork depth preparing the gate-trial input states
};

struct ShadowsConfig {
    int shots = 1000;
};

struct EmbeddingConfig {
    std::string method = "diffusion_map";  // or "kernel_pca"
    std::vector<int> indices = {2, 3};     // diffusion map, 1-based
    int dims = 1;                          // kernel PCA
};

struct ClusteringConfig {
    int k = 3;
    int restarts = 10;
};

struct RunConfig {
    Experiment experiment = Experiment::XXZSweep;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string output_dir = "out";
    XXZSweepModel xxz;
    ToricModel toric;  // also the sample source of the shadows experiment
    ETCModel etc;
    BoundsConfig bounds;
    ShadowsConfig shadows;
    std::vector<KernelConfig> kernels;
    EmbeddingConfig embedding;
    ClusteringConfig clustering;

    /// Per-stage seeds, all derived from the master seed.
    std::uint64_t data_seed() const { return derive_seed(seed, 1); }
    std::uint64_t subset_seed() const { return derive_seed(seed, 2); }
    std::uint64_t cluster_seed() const { return derive_seed(seed, 3); }
    std::uint64_t shadow_seed() const { return derive_seed(seed, 4); }
    std::uint64_t bounds_seed() const { return derive_seed(seed, 5); }

    bool has_dataset() const { return experiment != Experiment::VerifyBounds; }
};

namespace detail {

/// JSON object reader that names the offending field and rejects unknown keys.
class FieldReader {
public:
    FieldReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ValidationError(path_ + ": expected an object");
    }
    ~FieldReader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k)) throw ValidationError(name(k) + ": unknown field");
    }
    FieldReader(const FieldReader&) = delete;
    FieldReader& operator=(const FieldReader&) = delete;

    bool has(const std::string& k) const { return obj_.contains(k); }
    std::string name(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    const Json* raw(const std::string& k) {
        seen_.insert(k);
        return obj_.contains(k) ? &obj_.at(k) : nullptr;
    }

    void number(const std::string& k, double& out, double lo, double hi) {
        if (const Json* v = raw(k)) {
            if (!v->is_number()) throw ValidationError(name(k) + ": expected a number");
            out = v->get<double>();
        }
        if (!(out >= lo && out <= hi) || !std::isfinite(out))
            throw ValidationError(name(k) + ": must lie in [" + format_double(lo) + ", " + format_double(hi) + "]");
    }
    void integer(const std::string& k, int& out, int lo, int hi) {
        if (const Json* v = raw(k)) {
            if (!v->is_number_integer()) throw ValidationError(name(k) + ": expected an integer");
            const auto x = v->get<long long>();
            if (x < lo || x > hi) throw ValidationError(name(k) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            out = static_cast<int>(x);
        }
        if (out < lo || out > hi) throw ValidationError(name(k) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    void text(const std::string& k, std::string& out, const std::vector<std::string>& allowed) {
        if (const Json* v = raw(k)) {
            if (!v->is_string()) throw ValidationError(name(k) + ": expected a string");
            out = v->get<std::string>();
        }
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), out) == allowed.end())
            throw ValidationError(name(k) + ": unsupported value '" + out + "'");
    }
    void flag(const std::string& k, bool& out) {
        if (const Json* v = raw(k)) {
            if (!v->is_boolean()) throw ValidationError(name(k) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void int_list(const std::string& k, std::vector<int>& out, int lo, int hi) {
        if (const Json* v = raw(k)) {
            if (!v->is_array()) throw ValidationError(name(k) + ": expected an array");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_integer()) throw ValidationError(name(k) + ": expected integers");
                const auto x = e.get<long long>();
                if (x < lo || x > hi) throw ValidationError(name(k) + ": entries must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
                out.push_back(static_cast<int>(x));
            }
        }
    }
    void number_list(const std::string& k, std::vector<double>& out) {
        if (const Json* v = raw(k)) {
            if (!v->is_array()) throw ValidationError(name(k) + ": expected an array");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) throw ValidationError(name(k) + ": expected numbers");
                out.push_back(e.get<double>());
            }
        }
    }

private:
    const Json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

inline KernelConfig kernel_from_json(const Json& j, const std::string& path) {
    FieldReader r(j, path);
    KernelConfig c;
    std::string kind;
    r.text("kind", kind, {"fidelity", "entanglement", "shadow"});
    c.kind = kernel_kind_from_string(kind);
    r.number("beta", c.beta, 1e-12, 1e6);
    r.integer("r_max", c.r_max, 1, 4);
    r.number_list("weights", c.weights);
    r.integer("subsets_per_order", c.subsets_per_order, 0, 100000);
    std::string policy = "adjacent";
    r.text("subset_policy", policy, {"adjacent", "uniform"});
    c.policy = policy == "adjacent" ? SubsetPolicy::Adjacent : SubsetPolicy::Uniform;
    r.number("nu", c.nu, 1e-12, 100.0);
    r.flag("normalize", c.normalize);
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return c;
}

inline std::vector<KernelConfig> default_kernels(Experiment e) {
    auto make = [](KernelKind kind, double beta) {
        KernelConfig c;
        c.kind = kind;
        c.beta = beta;
        return c;
    };
    switch (e) {
        case Experiment::XXZSweep: return {make(KernelKind::Entanglement, 2.0), make(KernelKind::Fidelity, 50.0)};
        case Experiment::ToricVsRps: return {make(KernelKind::Fidelity, 0.1), make(KernelKind::Entanglement, 2.0)};
        case Experiment::EtcSweep: return {make(KernelKind::Fidelity, 0.2), make(KernelKind::Entanglement, 2.0)};
        case Experiment::Shadows: return {make(KernelKind::Shadow, 1.0), make(KernelKind::Fidelity, 0.1)};
        case Experiment::VerifyBounds: return {};
    }
    return {};
}

}  // namespace detail

/// Parses and validates a run configuration; errors name the offending field.
inline RunConfig run_config_from_json(const Json& j) {
    detail::FieldReader top(j, "");
    int version = 0;
    if (!top.has("schema_version")) throw ValidationError("schema_version: required");
    top.integer("schema_version", version, 0, 1000);
    if (version != kConfigSchemaVersion)
        throw ValidationError("schema_version: unsupported version " + std::to_string(version));

    RunConfig c;
    std::string exp;
    if (!top.has("experiment")) throw ValidationError("experiment: required");
    top.text("experiment", exp, {"xxz-sweep", "toric-vs-rps", "etc-sweep", "verify-bounds", "shadows"});
    for (auto e : {Experiment::XXZSweep, Experiment::ToricVsRps, Experiment::EtcSweep, Experiment::VerifyBounds,
                   Experiment::Shadows})
        if (to_string(e) == exp) c.experiment = e;

    if (const Json* s = top.raw("seed")) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0))
            throw ValidationError("seed: expected a non-negative integer");
        c.seed = s->get<std::uint64_t>();
    } else {
        throw ValidationError("seed: required (all seeds are explicit)");
    }
    int threads = 1;
    top.integer("threads", threads, 1, 256);
    c.threads = static_cast<unsigned>(threads);
    top.text("output_dir", c.output_dir, {});

    if (c.experiment == Experiment::Shadows) {
        c.toric.depths = {0};
        c.toric.toric_samples = 5;
        c.toric.rps_samples = 5;
    }
    if (c.experiment == Experiment::ToricVsRps || c.experiment == Experiment::EtcSweep ||
        c.experiment == Experiment::Shadows) {
        c.embedding.method = "kernel_pca";
        c.clustering.k = 2;
    }

    if (const Json* m = top.raw("model")) {
        switch (c.experiment) {
            case Experiment::XXZSweep: {
                detail::FieldReader r(*m, "model");
                r.integer("n", c.xxz.n, 2, kMaxDenseQubits);
                r.integer("samples", c.xxz.samples, 1, 10000);
                r.number("j1", c.xxz.j1, -100.0, 100.0);
                r.number("ratio_max", c.xxz.ratio_max, 1e-9, 100.0);
                r.number("delta", c.xxz.delta, -100.0, 100.0);
                r.number("h0", c.xxz.h0, -100.0, 100.0);
                break;
            }
            case Experiment::ToricVsRps:
            case Experiment::Shadows: {
                detail::FieldReader r(*m, "model");
                r.integer("lx", c.toric.lx, 2, 8);
                r.integer("ly", c.toric.ly, 2, 8);
                r.integer("toric_samples", c.toric.toric_samples, 1, 1000);
                r.integer("rps_samples", c.toric.rps_samples, 1, 1000);
                r.int_list("depths", c.toric.depths, 0, 64);
                r.text("backend", c.toric.backend, {"dense", "stabilizer"});
                break;
            }
            case Experiment::EtcSweep: {
                detail::FieldReader r(*m, "model");
                r.integer("lx", c.etc.lx, 2, 8);
                r.integer("ly", c.etc.ly, 2, 8);
                r.number("jw", c.etc.jw, -100.0, 100.0);
                r.number("jh", c.etc.jh, -100.0, 100.0);
                r.number("h_min", c.etc.h_min, -100.0, 100.0);
                r.number("h_max", c.etc.h_max, -100.0, 100.0);
                r.integer("samples", c.etc.samples, 1, 1000);
                r.integer("rps_samples", c.etc.rps_samples, 0, 1000);
                break;
            }
            case Experiment::VerifyBounds:
                throw ValidationError("model: not used by verify-bounds (use 'bounds')");
        }
    }
    if (c.toric.depths.empty()) c.toric.depths = {0};

    if (const Json* b = top.raw("bounds")) {
        if (c.experiment != Experiment::VerifyBounds) throw ValidationError("bounds: only valid for verify-bounds");
        detail::FieldReader r(*b, "bounds");
        r.integer("n", c.bounds.n, 1, 8);
        r.integer("path_trials", c.bounds.path_trials, 0, 100000);
        r.integer("cover_width", c.bounds.cover_width, 1, 8);
        r.integer("gate_n", c.bounds.gate_n, 2, 12);
        r.integer("gate_trials", c.bounds.gate_trials, 0, 100000);
        r.integer("prep_depth", c.bounds.prep_depth, 0, 64);
    }
    if (const Json* s = top.raw("shadows")) {
        if (c.experiment != Experiment::Shadows) throw ValidationError("shadows: only valid for the shadows experiment");
        detail::FieldReader r(*s, "shadows");
        r.integer("shots", c.shadows.shots, 1, 1000000);
    }

    if (const Json* ks = top.raw("kernels")) {
        if (!ks->is_array() || ks->empty()) throw ValidationError("kernels: expected a nonempty array");
        std::set<KernelKind> kinds;
        for (std::size_t i = 0; i < ks->size(); ++i) {
            auto k = detail::kernel_from_json((*ks)[i], "kernels[" + std::to_string(i) + "]");
            if (!kinds.insert(k.kind).second)
                throw ValidationError("kernels[" + std::to_string(i) + "].kind: duplicate kernel kind");
            c.kernels.push_back(k);
        }
    } else {
        c.kernels = detail::default_kernels(c.experiment);
    }
    if (const Json* e = top.raw("embedding")) {
        detail::FieldReader r(*e, "embedding");
        r.text("method", c.embedding.method, {"diffusion_map", "kernel_pca"});
        r.int_list("indices", c.embedding.indices, 2, 100000);
        r.integer("dims", c.embedding.dims, 1, 100000);
        if (c.embedding.indices.empty()) throw ValidationError("embedding.indices: must not be empty");
    }
    if (const Json* cl = top.raw("clustering")) {
        detail::FieldReader r(*cl, "clustering");
        r.integer("k", c.clustering.k, 1, 100000);
        r.integer("restarts", c.clustering.restarts, 1, 10000);
    }

    // Cross-field checks.
    if (c.experiment == Experiment::XXZSweep && c.xxz.n > kMaxDenseQubits)
        throw ValidationError("model.n: exceeds the dense backend cap");
    if (c.experiment == Experiment::ToricVsRps || c.experiment == Experiment::Shadows) {
        const int n = 2 * c.toric.lx * c.toric.ly;
        if (c.toric.backend == "dense" && n > kMaxDenseQubits)
            throw ValidationError("model.lx: lattice exceeds the dense backend cap of 14 qubits");
        if (c.toric.backend == "stabilizer") {
            for (int d : c.toric.depths)
                if (d != 0) throw ValidationError("model.depths: the stabilizer backend supports depth 0 only");
            for (const auto& k : c.kernels)
                if (k.kind == KernelKind::Shadow)
                    throw ValidationError("kernels: shadow kernel needs the dense backend");
        }
        if (n > 64) throw ValidationError("model.lx: lattice too large");
    }
    if (c.experiment == Experiment::Shadows) {
        for (int d : c.toric.depths)
            if (d != 0) throw ValidationError("model.depths: the shadows experiment uses depth 0 only");
        if (c.toric.backend != "dense") throw ValidationError("model.backend: the shadows experiment needs dense states");
    }
    if (c.experiment == Experiment::EtcSweep) {
        if (2 * c.etc.lx * c.etc.ly > kMaxDenseQubits)
            throw ValidationError("model.lx: lattice exceeds the dense backend cap of 14 qubits");
        if (c.etc.h_max < c.etc.h_min) throw ValidationError("model.h_max: must not be below h_min");
    }
    for (const auto& k : c.kernels)
        if (k.kind == KernelKind::Shadow && c.experiment != Experiment::Shadows)
            throw ValidationError("kernels: the shadow kernel is only available in the shadows experiment");
    return c;
}

inline Json to_json(const RunConfig& c) {
    Json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["experiment"] = to_string(c.experiment);
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    switch (c.experiment) {
        case Experiment::XXZSweep:
            j["model"] = {{"n", c.xxz.n},       {"samples", c.xxz.samples}, {"j1", c.xxz.j1},
                          {"ratio_max", c.xxz.ratio_max}, {"delta", c.xxz.delta}, {"h0", c.xxz.h0}};
            break;
        case Experiment::ToricVsRps:
        case Experiment::Shadows:
            j["model"] = {{"lx", c.toric.lx},
                          {"ly", c.toric.ly},
                          {"toric_samples", c.toric.toric_samples},
                          {"rps_samples", c.toric.rps_samples},
                          {"depths", c.toric.depths},
                          {"backend", c.toric.backend}};
            break;
        case Experiment::EtcSweep:
            j["model"] = {{"lx", c.etc.lx},       {"ly", c.etc.ly},       {"jw", c.etc.jw},
                          {"jh", c.etc.jh},       {"h_min", c.etc.h_min}, {"h_max", c.etc.h_max},
                          {"samples", c.etc.samples}, {"rps_samples", c.etc.rps_samples}};
            break;
        case Experiment::VerifyBounds:
            j["bounds"] = {{"n", c.bounds.n},
                           {"path_trials", c.bounds.path_trials},
                           {"cover_width", c.bounds.cover_width},
                           {"gate_n", c.bounds.gate_n},
                           {"gate_trials", c.bounds.gate_trials},
                           {"prep_depth", c.bounds.prep_depth}};
            break;
    }
    if (c.experiment == Experiment::Shadows) j["shadows"] = {{"shots", c.shadows.shots}};
    if (c.has_dataset()) {
        j["kernels"] = Json::array();
        for (const auto& k : c.kernels) j["kernels"].push_back(to_json(k));
        j["embedding"] = {{"method", c.embedding.method}, {"indices", c.embedding.indices}, {"dims", c.embedding.dims}};
        j["clustering"] = {{"k", c.clustering.k}, {"restarts", c.clustering.restarts}};
    }
    return j;
}

inline RunConfig load_run_config(const std::filesystem::path& p) { return run_config_from_json(read_json_file(p)); }

// ---------------------------------------------------------------------------
// Hashing and manifests

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256: digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 15];
    }
    return out;
}

/// Lists every file under `dir` (except the manifest itself) with its SHA-256.
inline Json build_manifest(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& command,
                           double wall_seconds) {
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file()) {
            const auto rel = std::filesystem::relative(e.path(), dir).generic_string();
            if (rel != "manifest.json") files.push_back(rel);
        }
    std::sort(files.begin(), files.end());
    Json j;
    j["format"] = "qckit.manifest";
    j["format_version"] = 1;
    j["library_version"] = kLibraryVersion;
    j["command"] = command;
    j["config_hash"] = sha256_hex(to_json(cfg).dump());
    j["config"] = to_json(cfg);
    j["seeds"] = {{"master", cfg.seed},
                  {"data", cfg.data_seed()},
                  {"subsets", cfg.subset_seed()},
                  {"clustering", cfg.cluster_seed()},
                  {"shadows", cfg.shadow_seed()},
                  {"bounds", cfg.bounds_seed()}};
    j["wall_clock_seconds"] = wall_seconds;
    j["files"] = Json::array();
    for (const auto& f : files) {
        const std::string body = read_text_file(dir / f);
        j["files"].push_back({{"path", f}, {"bytes", body.size()}, {"sha256", sha256_hex(body)}});
    }
    return j;
}

// ---------------------------------------------------------------------------
// Datasets

struct SampleMeta {
    std::string cls;                // "xxz", "toric", "rps", "etc"
    std::string parameter_name;     // "j2_over_j1", "h" or "none"
    double parameter = 0.0;
    int depth = 0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::string name;
    std::string experiment;
    int n = 0;
    ChainOrdering ordering;
    std::string backend = "dense";
    std::vector<SampleMeta> meta;
    std::vector<PureState> dense;         // dense backend
    std::vector<StabilizerState> stab;    // stabilizer backend
    std::vector<EntanglementProfile> profiles;
    std::vector<ShadowEnsemble> shadows;  // shadows experiment only
    Json provenance = Json::object();

    std::size_t size() const { return meta.size(); }

    RdmProvider provider(std::size_t i) const {
        return backend == "stabilizer" ? stabilizer_provider(stab.at(i)) : dense_provider(dense.at(i));
    }
};

namespace detail {

inline void finish_dense(Dataset& d, unsigned threads) {
    d.profiles.assign(d.dense.size(), {});
    parallel_for(d.dense.size(), threads, [&](std::size_t i) { d.profiles[i] = entanglement_profile(d.dense[i]); });
}

inline std::vector<Dataset> generate_xxz(const RunConfig& c) {
    const auto& m = c.xxz;
    Dataset d;
    d.name = "xxz";
    d.experiment = to_string(c.experiment);
    d.n = m.n;
    d.ordering = ChainOrdering::identity(m.n);
    std::vector<std::optional<PureState>> states(static_cast<std::size_t>(m.samples));
    Json energies = Json::array();
    std::vector<double> e(static_cast<std::size_t>(m.samples));
    parallel_for(states.size(), c.threads, [&](std::size_t i) {
        XXZParams p;
        p.n = m.n;
        p.j1 = m.j1;
        p.j2 = m.j1 * m.ratio_max * static_cast<double>(i + 1) / m.samples;
        p.delta = m.delta;
        p.h0 = m.h0;
        auto r = ground_state(build_xxz(p), d.ordering);
        e[i] = r.energy;
        states[i] = std::move(r.state);
    });
    for (int i = 0; i < m.samples; ++i) {
        d.dense.push_back(std::move(*states[static_cast<std::size_t>(i)]));
        d.meta.push_back({"xxz", "j2_over_j1", m.ratio_max * (i + 1) / m.samples, 0, 0});
        energies.push_back(e[static_cast<std::size_t>(i)]);
    }
    d.provenance = {{"model", "xxz"}, {"boundary", "open"}, {"ground_energies", energies}};
    finish_dense(d, c.threads);
    return {std::move(d)};
}

inline std::vector<Dataset> generate_toric(const RunConfig& c) {
    const auto& m = c.toric;
    const ToricLattice lat(m.lx, m.ly);
    const int n = lat.num_qubits();
    const ChainOrdering ord = lat.default_ordering();
    const std::uint64_t rps_stream = derive_seed(c.data_seed(), 0);
    std::vector<std::uint64_t> rps_seeds;
    for (int i = 0; i < m.rps_samples; ++i) rps_seeds.push_back(derive_seed(rps_stream, static_cast<std::uint64_t>(i)));

    std::vector<Dataset> out;
    std::optional<PureState> toric_dense;
    double toric_energy = 0.0;
    int toric_degeneracy = 0;
    if (m.backend == "dense") {
        auto r = ground_state(build_toric(lat), ord);
        toric_energy = r.energy;
        toric_degeneracy = r.degeneracy;
        toric_dense = std::move(r.state);
    }
    for (int depth : m.depths) {
        Dataset d;
        d.name = "depth_" + std::to_string(depth);
        d.experiment = to_string(c.experiment);
        d.n = n;
        d.ordering = ord;
        d.backend = m.backend;
        const std::uint64_t circuit_stream = derive_seed(c.data_seed(), 1 + static_cast<std::uint64_t>(depth));
        const int total = m.toric_samples + m.rps_samples;
        for (int i = 0; i < total; ++i) {
            const bool toric = i < m.toric_samples;
            const std::uint64_t cseed = derive_seed(circuit_stream, static_cast<std::uint64_t>(i));
            const std::uint64_t seed = toric ? cseed : rps_seeds[static_cast<std::size_t>(i - m.toric_samples)];
            d.meta.push_back({toric ? "toric" : "rps", "none", 0.0, depth, depth > 0 ? cseed : seed});
        }
        if (m.backend == "stabilizer") {
            for (int i = 0; i < total; ++i) {
                if (i < m.toric_samples) {
                    d.stab.push_back(toric_default_stabilizer_state(lat));
                } else {
                    const auto bits = random_bits(n, rps_seeds[static_cast<std::size_t>(i - m.toric_samples)]);
                    d.stab.push_back(StabilizerState::basis(bits));
                }
                d.profiles.push_back(stab_entanglement_profile(d.stab.back(), ord));
            }
        } else {
            std::vector<std::optional<PureState>> states(static_cast<std::size_t>(total));
            parallel_for(states.size(), c.threads, [&](std::size_t i) {
                const PureState base = static_cast<int>(i) < m.toric_samples
                                           ? *toric_dense
                                           : random_product_state(n, rps_seeds[i - static_cast<std::size_t>(m.toric_samples)], ord);
                states[i] = apply_brickwork(base, depth, derive_seed(circuit_stream, i));
            });
            for (auto& s : states) d.dense.push_back(std::move(*s));
            finish_dense(d, c.threads);
        }
        d.provenance = {{"model", "toric"}, {"lx", m.lx}, {"ly", m.ly}, {"depth", depth}, {"ordering", "snake"}};
        if (m.backend == "dense") {
            d.provenance["toric_ground_energy"] = toric_energy;
            d.provenance["toric_ground_degeneracy"] = toric_degeneracy;
        }
        out.push_back(std::move(d));
    }
    return out;
}

inline std::vector<Dataset> generate_etc(const RunConfig& c) {
    const auto& m = c.etc;
    const ToricLattice lat(m.lx, m.ly);
    const int n = lat.num_qubits();
    Dataset d;
    d.name = "etc";
    d.experiment = to_string(c.experiment);
    d.n = n;
    d.ordering = lat.default_ordering();
    std::vector<std::optional<GroundStateResult>> res(static_cast<std::size_t>(m.samples));
    auto h_at = [&](int i) {
        return m.samples == 1 ? m.h_min : m.h_min + (m.h_max - m.h_min) * i / (m.samples - 1);
    };
    parallel_for(res.size(), c.threads, [&](std::size_t i) {
        ETCParams p;
        p.lattice = lat;
        p.jw = m.jw;
        p.jh = m.jh;
        p.h = h_at(static_cast<int>(i));
        GroundStateOptions o;
        const auto [w, hl] = etc_loop_operators(p);
        auto r = ground_state(build_etc(p), d.ordering, o);
        // Record the loop expectation values: the selected sector.
        HermitianOperator wop(n, {{w, 1.0}}), hop(n, {{hl, 1.0}});
        r.sector_values = {wop.expectation(r.state), hop.expectation(r.state)};
        res[i] = std::move(r);
    });
    Json sectors = Json::array();
    for (int i = 0; i < m.samples; ++i) {
        auto& r = *res[static_cast<std::size_t>(i)];
        d.dense.push_back(r.state);
        d.meta.push_back({"etc", "h", h_at(i), 0, 0});
        sectors.push_back({{"h", h_at(i)}, {"energy", r.energy}, {"W", r.sector_values[0]}, {"H", r.sector_values[1]}});
    }
    const std::uint64_t rps_stream = derive_seed(c.data_seed(), 0);
    for (int i = 0; i < m.rps_samples; ++i) {
        const auto s = derive_seed(rps_stream, static_cast<std::uint64_t>(i));
        d.dense.push_back(random_product_state(n, s, d.ordering));
        d.meta.push_back({"rps", "none", 0.0, 0, s});
    }
    d.provenance = {{"model", "etc"}, {"lx", m.lx}, {"ly", m.ly}, {"jw", m.jw}, {"jh", m.jh}, {"geometry", "torus"},
                    {"ordering", "snake"}, {"sectors", sectors}};
    finish_dense(d, c.threads);
    return {std::move(d)};
}

}  // namespace detail

/// Builds the experiment's datasets in memory.
inline std::vector<Dataset> generate_datasets(const RunConfig& c) {
    std::vector<Dataset> out;
    switch (c.experiment) {
        case Experiment::XXZSweep: out = detail::generate_xxz(c); break;
        case Experiment::ToricVsRps: out = detail::generate_toric(c); break;
        case Experiment::EtcSweep: out = detail::generate_etc(c); break;
        case Experiment::Shadows: {
            out = detail::generate_toric(c);
            for (auto& d : out) {
                d.shadows.resize(d.size());
                parallel_for(d.size(), c.threads, [&](std::size_t i) {
                    d.shadows[i] = collect_shadows(d.dense[i], c.shadows.shots, derive_seed(c.shadow_seed(), i));
                    d.shadows[i].source = d.meta[i].cls + "_" + std::to_string(i);
                });
            }
            break;
        }
        case Experiment::VerifyBounds:
            throw ValidationError("experiment: verify-bounds has no dataset (use the verify-bounds command)");
    }
    return out;
}

namespace detail {

inline std::string sample_stem(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%03zu", i);
    return buf;
}

inline std::string samples_csv(const Dataset& d) {
    std::string s = "sample,class,parameter_name,parameter,depth,seed\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& m = d.meta[i];
        s += std::to_string(i) + "," + m.cls + "," + m.parameter_name + "," + format_double(m.parameter) + "," +
             std::to_string(m.depth) + "," + std::to_string(m.seed) + "\n";
    }
    return s;
}

inline std::vector<SampleMeta> samples_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty() || rows[0].size() != 6 || rows[0][0] != "sample") throw ValidationError("samples.csv: bad header");
    std::vector<SampleMeta> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 6) throw ValidationError("samples.csv: ragged row");
        out.push_back({row[1], row[2], parse_double(row[3], "samples.csv parameter"), std::stoi(row[4]),
                       std::stoull(row[5])});
    }
    return out;
}

/// Metadata columns joined into embedding and label CSVs.
inline std::string meta_cells(const SampleMeta& m) {
    return m.cls + "," + m.parameter_name + "," + format_double(m.parameter) + "," + std::to_string(m.depth) + "," +
           std::to_string(m.seed);
}

}  // namespace detail

inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Json info;
    info["format"] = "qckit.dataset";
    info["format_version"] = kStateFormatVersion;
    info["name"] = d.name;
    info["experiment"] = d.experiment;
    info["num_qubits"] = d.n;
    info["backend"] = d.backend;
    info["ordering"] = d.ordering.positions();
    info["samples"] = d.size();
    info["has_shadows"] = !d.shadows.empty();
    info["provenance"] = d.provenance;
    write_json_file(dir / "dataset.json", info);
    write_text_file(dir / "samples.csv", detail::samples_csv(d));

    std::string prof = "sample";
    for (int k = 1; k < d.n; ++k) prof += ",S_" + std::to_string(k);
    prof += "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        prof += std::to_string(i);
        for (double s : d.profiles[i].entropies) prof += "," + format_double(s);
        prof += "\n";
    }
    write_text_file(dir / "profiles.csv", prof);

    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto stem = detail::sample_stem(i);
        if (d.backend == "stabilizer") {
            write_text_file(dir / "states" / (stem + ".stab"), to_text(d.stab[i]));
        } else {
            Json s = to_json(d.dense[i]);
            s["metadata"] = {{"class", d.meta[i].cls},
                             {"parameter_name", d.meta[i].parameter_name},
                             {"parameter", d.meta[i].parameter},
                             {"depth", d.meta[i].depth},
                             {"seed", d.meta[i].seed}};
            write_text_file(dir / "states" / (stem + ".json"), s.dump() + "\n");
        }
        if (!d.shadows.empty()) write_text_file(dir / "shadows" / (stem + ".shadow"), to_text(d.shadows[i]));
    }
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "dataset.json"))
        throw ValidationError("missing dataset in " + dir.string() + " (run generate first)");
    const Json info = read_json_file(dir / "dataset.json");
    if (info.value("format", "") != "qckit.dataset") throw ValidationError("dataset.json: not a dataset record");
    Dataset d;
    d.name = info.at("name").get<std::string>();
    d.experiment = info.at("experiment").get<std::string>();
    d.n = info.at("num_qubits").get<int>();
    d.backend = info.at("backend").get<std::string>();
    d.ordering = ChainOrdering(info.at("ordering").get<std::vector<int>>());
    d.provenance = info.at("provenance");
    d.meta = detail::samples_from_csv(read_text_file(dir / "samples.csv"));
    if (d.meta.size() != info.at("samples").get<std::size_t>()) throw ValidationError("samples.csv: sample count mismatch");
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto stem = detail::sample_stem(i);
        if (d.backend == "stabilizer") {
            d.stab.push_back(stabilizer_from_text(read_text_file(dir / "states" / (stem + ".stab"))));
            d.profiles.push_back(stab_entanglement_profile(d.stab.back(), d.ordering));
        } else {
            d.dense.push_back(pure_state_from_json(read_json_file(dir / "states" / (stem + ".json"))));
            if (d.dense.back().ordering() != d.ordering) throw ValidationError(stem + ": ordering differs from dataset");
        }
        if (info.value("has_shadows", false))
            d.shadows.push_back(shadows_from_text(read_text_file(dir / "shadows" / (stem + ".shadow"))));
    }
    if (d.backend != "stabilizer") detail::finish_dense(d, 1);
    return d;
}

// ---------------------------------------------------------------------------
// Kernels

struct KernelRun {
    KernelConfig config;
    KernelMatrix kernel;
    std::optional<SubsetPlan> plan;
};

inline Json plan_to_json(const SubsetPlan& p) { return {{"weights", p.weights}, {"subsets", p.subsets}}; }

inline SubsetPlan plan_from_json(const Json& j) {
    SubsetPlan p;
    p.weights = j.at("weights").get<std::vector<double>>();
    p.subsets = j.at("subsets").get<std::vector<std::vector<std::vector<int>>>>();
    if (p.weights.size() != p.subsets.size()) throw ValidationError("rdm cache: plan weights and subsets disagree");
    return p;
}

/// Reduced density matrices of every sample on every subset of the plan.
inline std::vector<std::vector<DensityMatrix>> rdm_cache(const Dataset& d, const SubsetPlan& plan, unsigned threads) {
    std::vector<std::vector<DensityMatrix>> cache(d.size());
    parallel_for(d.size(), threads, [&](std::size_t i) {
        const auto prov = d.provider(i);
        for (const auto& order : plan.subsets)
            for (const auto& s : order) cache[i].push_back(prov(s));
    });
    return cache;
}

inline Json rdm_cache_to_json(const SubsetPlan& plan, const std::vector<std::vector<DensityMatrix>>& cache) {
    Json j;
    j["format"] = "qckit.rdm_cache";
    j["format_version"] = kStateFormatVersion;
    j["plan"] = plan_to_json(plan);
    j["samples"] = Json::array();
    for (const auto& row : cache) {
        Json r = Json::array();
        for (const auto& dm : row) r.push_back(to_json(dm));
        j["samples"].push_back(std::move(r));
    }
    return j;
}

inline KernelMatrix fidelity_kernel_from_cache(const std::vector<std::vector<DensityMatrix>>& cache,
                                              const SubsetPlan& plan, const KernelConfig& cfg, unsigned threads) {
    std::vector<RdmProvider> providers;
    for (std::size_t i = 0; i < cache.size(); ++i) {
        providers.push_back([&cache, &plan, i](std::span<const int> s) -> DensityMatrix {
            std::size_t idx = 0;
            for (const auto& order : plan.subsets)
                for (const auto& sub : order) {
                    if (std::equal(sub.begin(), sub.end(), s.begin(), s.end())) return cache[i][idx];
                    ++idx;
                }
            throw ValidationError("rdm cache: subset not cached");
        });
    }
    const int n = cache.empty() || cache[0].empty() ? 0 : cache[0][0].num_qubits();
    return build_kernel_matrix(std::span<const RdmProvider>(providers), n, cfg, plan, threads);
}

inline KernelRun compute_kernel(const Dataset& d, const KernelConfig& cfg, const RunConfig& run,
                                std::vector<std::vector<DensityMatrix>>* cache_out = nullptr) {
    KernelRun out;
    out.config = cfg;
    switch (cfg.kind) {
        case KernelKind::Entanglement:
            out.kernel = build_kernel_matrix(std::span<const EntanglementProfile>(d.profiles), cfg, run.threads);
            break;
        case KernelKind::Fidelity: {
            out.plan = sample_subsets(d.n, d.ordering, cfg, run.subset_seed());
            auto cache = rdm_cache(d, *out.plan, run.threads);
            out.kernel = fidelity_kernel_from_cache(cache, *out.plan, cfg, run.threads);
            if (cache_out) *cache_out = std::move(cache);
            break;
        }
        case KernelKind::Shadow:
            if (d.shadows.size() != d.size()) throw ValidationError("shadow kernel: dataset has no shadow ensembles");
            out.kernel = build_kernel_matrix(std::span<const ShadowEnsemble>(d.shadows), cfg, run.threads);
            break;
    }
    return out;
}

inline Json kernel_sidecar(const KernelRun& k, const Dataset& d, const RunConfig& run) {
    Json j;
    j["format"] = "qckit.kernel";
    j["format_version"] = 1;
    j["dataset"] = d.name;
    j["samples"] = d.size();
    j["config"] = to_json(k.config);
    j["normalization"] = k.kernel.normalization;
    if (k.plan) {
        j["subset_seed"] = run.subset_seed();
        j["subsets"] = plan_to_json(*k.plan);
    }
    std::vector<double> raw_diag, log_diag;
    for (Eigen::Index i = 0; i < k.kernel.size(); ++i) {
        log_diag.push_back(k.kernel.log_raw(i, i));
        raw_diag.push_back(std::exp(k.kernel.log_raw(i, i)));
    }
    j["raw_diagonal"] = raw_diag;
    j["log_raw_diagonal"] = log_diag;
    return j;
}

// ---------------------------------------------------------------------------
// Embedding and clustering

/// max(min A - max B, min B - max A) on one coordinate; positive iff the two
/// classes are linearly separable along it.
inline double class_margin(const RVector& x, const std::vector<SampleMeta>& meta) {
    std::vector<std::string> classes;
    for (const auto& m : meta)
        if (std::find(classes.begin(), classes.end(), m.cls) == classes.end()) classes.push_back(m.cls);
    if (classes.size() != 2) return std::numeric_limits<double>::quiet_NaN();
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const int c = meta[static_cast<std::size_t>(i)].cls == classes[0] ? 0 : 1;
        lo[c] = std::min(lo[c], x[i]);
        hi[c] = std::max(hi[c], x[i]);
    }
    return std::max(lo[0] - hi[1], lo[1] - hi[0]);
}

/// True when every label occupies one contiguous run of sample indices.
inline bool contiguous_labels(const std::vector<int>& labels) {
    std::set<int> closed;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0 && labels[i] != labels[i - 1]) closed.insert(labels[i - 1]);
        if (closed.count(labels[i])) return false;
    }
    return true;
}

inline EmbeddingResult embed_kernel(const RMatrix& k, const EmbeddingConfig& e) {
    if (e.method == "kernel_pca") return kernel_pca(k, e.dims);
    return diffusion_map(k, e.indices);
}

inline std::string embedding_csv(const EmbeddingResult& e, const std::vector<SampleMeta>& meta) {
    std::string s = "sample,class,parameter_name,parameter,depth,seed";
    for (Eigen::Index c = 0; c < e.coordinates.cols(); ++c) s += ",dim_" + std::to_string(c + 1);
    s += "\n";
    for (Eigen::Index i = 0; i < e.coordinates.rows(); ++i) {
        s += std::to_string(i) + "," + detail::meta_cells(meta[static_cast<std::size_t>(i)]);
        for (Eigen::Index c = 0; c < e.coordinates.cols(); ++c) s += "," + format_double(e.coordinates(i, c));
        s += "\n";
    }
    return s;
}

inline RMatrix coordinates_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.size() < 2 || rows[0].size() < 7) throw ValidationError("embedding csv: bad header");
    const auto dims = static_cast<Eigen::Index>(rows[0].size() - 6);
    RMatrix x(static_cast<Eigen::Index>(rows.size() - 1), dims);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw ValidationError("embedding csv: ragged row");
        for (Eigen::Index c = 0; c < dims; ++c)
            x(static_cast<Eigen::Index>(r - 1), c) = parse_double(rows[r][static_cast<std::size_t>(6 + c)], "embedding csv");
    }
    return x;
}

inline Json embedding_sidecar(const EmbeddingResult& e, const std::vector<SampleMeta>& meta) {
    Json j;
    j["method"] = e.method;
    j["indices"] = e.indices;
    j["eigenvalues"] = e.eigenvalues;
    j["normalization"] = "eigenvalue-scaled, unit standard deviation per dimension";
    j["degenerate"] = e.degenerate;
    j["spectrum_ties"] = e.spectrum_ties;
    const double m = class_margin(e.coordinates.col(0), meta);
    if (std::isfinite(m)) j["class_margin_dim_1"] = m;
    return j;
}

inline std::string labels_csv(const ClusterAssignment& a, const std::vector<SampleMeta>& meta) {
    std::string s = "sample,class,parameter_name,parameter,depth,seed,label\n";
    for (std::size_t i = 0; i < a.labels.size(); ++i)
        s += std::to_string(i) + "," + detail::meta_cells(meta[i]) + "," + std::to_string(a.labels[i]) + "\n";
    return s;
}

inline Json cluster_sidecar(const ClusterAssignment& a, int k, std::uint64_t seed) {
    Json j;
    j["k"] = k;
    j["seed"] = seed;
    j["inertia"] = a.inertia;
    j["contiguous"] = contiguous_labels(a.labels);
    Json centers = Json::array();
    for (Eigen::Index c = 0; c < a.centers.rows(); ++c) {
        std::vector<double> row(static_cast<std::size_t>(a.centers.cols()));
        for (Eigen::Index d = 0; d < a.centers.cols(); ++d) row[static_cast<std::size_t>(d)] = a.centers(c, d);
        centers.push_back(row);
    }
    j["centers"] = centers;
    return j;
}

inline ClusterAssignment cluster_coordinates(const RMatrix& x, const RunConfig& run) {
    KMeansOptions o;
    o.restarts = run.clustering.restarts;
    return kmeans(x, std::min<int>(run.clustering.k, static_cast<int>(x.rows())), run.cluster_seed(), o);
}

// ---------------------------------------------------------------------------
// File-based stages

inline std::vector<std::string> dataset_names(const std::filesystem::path& out) {
    const auto p = out / "datasets.json";
    if (!std::filesystem::exists(p)) throw ValidationError("missing dataset index " + p.string() + " (run generate first)");
    return read_json_file(p).at("datasets").get<std::vector<std::string>>();
}

inline std::string kernel_file(KernelKind k, const char* prefix, const char* ext) {
    return std::string(prefix) + "_" + to_string(k) + ext;
}

inline void stage_generate(const RunConfig& run, const std::filesystem::path& out) {
    const auto datasets = generate_datasets(run);
    Json index;
    index["experiment"] = to_string(run.experiment);
    index["datasets"] = Json::array();
    for (const auto& d : datasets) {
        write_dataset(d, out / d.name);
        index["datasets"].push_back(d.name);
        for (const auto& k : run.kernels) {
            if (k.kind != KernelKind::Fidelity) continue;
            const auto plan = sample_subsets(d.n, d.ordering, k, run.subset_seed());
            write_json_file(out / d.name / "rdm_cache_fidelity.json", rdm_cache_to_json(plan, rdm_cache(d, plan, run.threads)));
        }
    }
    write_json_file(out / "datasets.json", index);
}

inline void stage_kernel(const RunConfig& run, const std::filesystem::path& out) {
    for (const auto& name : dataset_names(out)) {
        const auto dir = out / name;
        const Dataset d = read_dataset(dir);
        for (const auto& k : run.kernels) {
            KernelRun kr;
            const auto cache_path = dir / "rdm_cache_fidelity.json";
            if (k.kind == KernelKind::Fidelity && std::filesystem::exists(cache_path)) {
                const Json cj = read_json_file(cache_path);
                const SubsetPlan plan = plan_from_json(cj.at("plan"));
                const SubsetPlan expected = sample_subsets(d.n, d.ordering, k, run.subset_seed());
                if (plan.subsets != expected.subsets || plan.weights != expected.weights)
                    throw ValidationError("rdm_cache_fidelity.json: subset plan does not match the config");
                std::vector<std::vector<DensityMatrix>> cache;
                for (const auto& row : cj.at("samples")) {
                    cache.emplace_back();
                    for (const auto& dm : row) cache.back().push_back(density_matrix_from_json(dm));
                }
                if (cache.size() != d.size()) throw ValidationError("rdm_cache_fidelity.json: sample count mismatch");
                kr.config = k;
                kr.plan = plan;
                kr.kernel = fidelity_kernel_from_cache(cache, plan, k, run.threads);
            } else {
                kr = compute_kernel(d, k, run);
            }
            write_text_file(dir / kernel_file(k.kind, "kernel", ".csv"), matrix_to_csv(kr.kernel.values));
            write_text_file(dir / kernel_file(k.kind, "kernel_raw_log", ".csv"), matrix_to_csv(kr.kernel.log_raw));
            write_json_file(dir / kernel_file(k.kind, "kernel", ".json"), kernel_sidecar(kr, d, run));
        }
    }
}

inline void stage_embed(const RunConfig& run, const std::filesystem::path& out) {
    for (const auto& name : dataset_names(out)) {
        const auto dir = out / name;
        const auto meta = detail::samples_from_csv(read_text_file(dir / "samples.csv"));
        for (const auto& k : run.kernels) {
            const auto kpath = dir / kernel_file(k.kind, "kernel", ".csv");
            if (!std::filesystem::exists(kpath)) throw ValidationError("missing " + kpath.string() + " (run kernel first)");
            const RMatrix km = matrix_from_csv(read_text_file(kpath));
            if (static_cast<std::size_t>(km.rows()) != meta.size())
                throw ValidationError(kpath.string() + ": size does not match the dataset");
            const auto e = embed_kernel(km, run.embedding);
            write_text_file(dir / kernel_file(k.kind, "embedding", ".csv"), embedding_csv(e, meta));
            write_json_file(dir / kernel_file(k.kind, "embedding", ".json"), embedding_sidecar(e, meta));
        }
    }
}

inline void stage_cluster(const RunConfig& run, const std::filesystem::path& out) {
    for (const auto& name : dataset_names(out)) {
        const auto dir = out / name;
        const auto meta = detail::samples_from_csv(read_text_file(dir / "samples.csv"));
        for (const auto& k : run.kernels) {
            const auto epath = dir / kernel_file(k.kind, "embedding", ".csv");
            if (!std::filesystem::exists(epath)) throw ValidationError("missing " + epath.string() + " (run embed first)");
            const RMatrix x = coordinates_from_csv(read_text_file(epath));
            if (static_cast<std::size_t>(x.rows()) != meta.size())
                throw ValidationError(epath.string() + ": size does not match the dataset");
            const auto a = cluster_coordinates(x, run);
            write_text_file(dir / kernel_file(k.kind, "labels", ".csv"), labels_csv(a, meta));
            write_json_file(dir / kernel_file(k.kind, "clusters", ".json"),
                            cluster_sidecar(a, std::min<int>(run.clustering.k, static_cast<int>(x.rows())), run.cluster_seed()));
        }
    }
}

// ---------------------------------------------------------------------------
// In-memory pipeline

struct KernelOutcome {
    KernelRun run;
    EmbeddingResult embedding;
    ClusterAssignment clusters;
    double class_margin = std::numeric_limits<double>::quiet_NaN();
};

struct DatasetOutcome {
    Dataset data;
    std::vector<KernelOutcome> kernels;

    const KernelOutcome& kernel(KernelKind k) const {
        for (const auto& o : kernels)
            if (o.run.config.kind == k) return o;
        throw ValidationError("no kernel of kind " + to_string(k) + " in this run");
    }
};

/// generate -> kernel -> embed -> cluster without touching the filesystem.
inline std::vector<DatasetOutcome> run_pipeline(const RunConfig& run) {
    std::vector<DatasetOutcome> out;
    for (auto& d : generate_datasets(run)) {
        DatasetOutcome o{std::move(d), {}};
        for (const auto& k : run.kernels) {
            KernelOutcome ko;
            ko.run = compute_kernel(o.data, k, run);
            ko.embedding = embed_kernel(ko.run.kernel.values, run.embedding);
            ko.clusters = cluster_coordinates(ko.embedding.coordinates, run);
            ko.class_margin = class_margin(ko.embedding.coordinates.col(0), o.data.meta);
            o.kernels.push_back(std::move(ko));
        }
        out.push_back(std::move(o));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bound-verification campaign

struct BoundCampaign {
    std::vector<BoundReport> reports;
    Json summary;
};

inline BoundCampaign verify_bounds(const RunConfig& run) {
    const auto& b = run.bounds;
    const std::uint64_t base = run.bounds_seed();
    BoundCampaign out;
    const auto np = static_cast<std::size_t>(b.path_trials);
    const auto ng = static_cast<std::size_t>(b.gate_trials);
    std::vector<BoundReport> t1(np), t2(np), gates(ng);

    parallel_for(np, run.threads, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(base, i);
        const auto ord = ChainOrdering::identity(b.n);
        const PureState psi0 = random_state(b.n, derive_seed(seed, 0), ord);
        const GeneratorPath path = random_local_path(b.n, derive_seed(seed, 1), ord);
        const auto states = trotter_evolve(psi0, path);
        t1[i] = verify_theorem1(path, states, b.cover_width);
        t1[i].seed = seed;
        t2[i] = verify_theorem2(path, entanglement_profile(states.front()), entanglement_profile(states.back()));
        t2[i].seed = seed;
    });
    parallel_for(ng, run.threads, [&](std::size_t j) {
        const std::uint64_t seed = derive_seed(base, 1'000'000 + j);
        const auto ord = ChainOrdering::identity(b.gate_n);
        const PureState psi0 = apply_brickwork(random_product_state(b.gate_n, derive_seed(seed, 0), ord), b.prep_depth,
                                               derive_seed(seed, 1));
        std::mt19937_64 rng(derive_seed(seed, 2));
        std::uniform_int_distribution<int> pos(0, b.gate_n - 2);
        const int p = pos(rng);
        BrickworkCircuit c{b.gate_n, 1, seed, {{BrickGate{p, haar_two_qubit(rng)}}}};
        gates[j] = verify_theorem2(psi0, c);
        gates[j].quantities["gate_position"] = p;
    });

    // Closed-form trials.
    {
        const auto ord = ChainOrdering::identity(b.n);
        const PureState psi0 = random_state(b.n, derive_seed(base, 2'000'000), ord);
        const GeneratorPath path = GeneratorPath::zero(b.n);
        auto rep = verify_theorem1(path, trotter_evolve(psi0, path), b.cover_width);
        rep.kind = "theorem1_trivial";
        out.reports.push_back(rep);
        const auto [gpath, g0] = single_qubit_geodesic();
        auto geo = verify_theorem1(gpath, trotter_evolve(g0, gpath), 1);
        geo.kind = "theorem1_geodesic";
        out.reports.push_back(geo);
    }
    for (auto* v : {&t1, &t2, &gates})
        for (auto& r : *v) out.reports.push_back(std::move(r));

    std::map<std::string, int> violations, trials;
    std::map<std::string, std::vector<double>> margins;
    for (const auto& r : out.reports) {
        ++trials[r.kind];
        for (const auto& v : r.violations) ++violations[r.kind + "." + v];
        for (const auto& [k, m] : r.margins) margins[r.kind + "." + k].push_back(m);
    }
    Json s;
    s["trials"] = Json::object();
    for (const auto& [k, v] : trials) s["trials"][k] = v;
    int total = 0;
    s["violations"] = Json::object();
    for (const auto& [k, v] : violations) {
        s["violations"][k] = v;
        total += v;
    }
    s["total_violations"] = total;
    s["margins"] = Json::object();
    for (const auto& [k, v] : margins) {
        double lo = 1e300, hi = -1e300, mean = 0.0;
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            mean += x;
        }
        s["margins"][k] = {{"min", lo}, {"mean", mean / v.size()}, {"max", hi}, {"count", v.size()}};
    }
    out.summary = s;
    return out;
}

inline void write_bound_campaign(const BoundCampaign& c, const std::filesystem::path& out) {
    std::string lines;
    for (const auto& r : c.reports) lines += to_json(r).dump() + "\n";
    write_text_file(out / "bounds.jsonl", lines);
    write_json_file(out / "bounds_summary.json", c.summary);
}

// ---------------------------------------------------------------------------
// Shadow estimator summary

/// Single-qubit Z expectations from each ensemble against the exact values.
inline Json shadow_summary(const Dataset& d) {
    Json j = Json::array();
    for (std::size_t i = 0; i < d.shadows.size(); ++i) {
        const auto& e = d.shadows[i];
        Json rows = Json::array();
        for (int q = 0; q < d.n; ++q) {
            double sum = 0.0, sum2 = 0.0;
            for (const auto& s : e.samples) {
                const double v = s.bases[static_cast<std::size_t>(q)] == PauliBasis::Z ? 3.0 * s.outcomes[static_cast<std::size_t>(q)] : 0.0;
                sum += v;
                sum2 += v * v;
            }
            const double T = e.size();
            const double mean = sum / T;
            const double se = std::sqrt(std::max(0.0, sum2 / T - mean * mean) / T);
            const HermitianOperator z(d.n, {{PauliString::on(d.n, {{q, 'Z'}}), 1.0}});
            rows.push_back({{"qubit", q}, {"estimate", mean}, {"standard_error", se},
                            {"exact", z.expectation(d.dense[i])}});
        }
        j.push_back({{"sample", i}, {"z_expectations", rows}});
    }
    return j;
}

}  // namespace qckit
