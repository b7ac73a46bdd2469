// qckit command-line driver: experiment pipelines and bound campaigns.

#include "qckit/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace qckit;
namespace fs = std::filesystem;

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

/// Config fields that determine the dataset; kernel, embedding and clustering
/// settings may change between stages without regenerating.
Json data_fields(const RunConfig& c) {
    Json j = to_json(c);
    for (const char* k : {"threads", "output_dir", "kernels", "embedding", "clustering"}) j.erase(k);
    return j;
}

RunConfig resolve_config(const Flags& f, const char* default_experiment, bool allow_stored) {
    Json j;
    if (!f.config.empty()) {
        j = read_json_file(f.config);
    } else if (allow_stored && !f.out.empty() && fs::exists(fs::path(f.out) / "config.json")) {
        j = read_json_file(fs::path(f.out) / "config.json");
    } else if (default_experiment) {
        j = Json{{"schema_version", kConfigSchemaVersion}, {"experiment", default_experiment}};
    } else {
        throw ValidationError("--config: required");
    }
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    if (f.seed) j["seed"] = *f.seed;
    if (f.threads) j["threads"] = *f.threads;
    if (!f.out.empty()) j["output_dir"] = f.out;
    RunConfig c = run_config_from_json(j);
    if (default_experiment && to_string(c.experiment) != default_experiment)
        throw ValidationError(std::string("experiment: this command runs '") + default_experiment + "'");
    return c;
}

void check_matches_dataset(const RunConfig& c, const fs::path& out) {
    const auto stored = out / "config.json";
    if (!fs::exists(stored)) throw ValidationError("missing " + stored.string() + " (run generate first)");
    if (data_fields(run_config_from_json(read_json_file(stored))) != data_fields(c))
        throw ValidationError("config does not match the dataset in " + out.string());
}

void finish(const RunConfig& c, const fs::path& out, const std::string& command,
            std::chrono::steady_clock::time_point start) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json_file(out / "manifest.json", build_manifest(out, c, command, secs));
}

Json pipeline_summary(const RunConfig& c, const fs::path& out) {
    Json s;
    s["experiment"] = to_string(c.experiment);
    s["datasets"] = Json::array();
    for (const auto& name : dataset_names(out)) {
        Json d{{"name", name}, {"kernels", Json::array()}};
        for (const auto& k : c.kernels) {
            const Json e = read_json_file(out / name / kernel_file(k.kind, "embedding", ".json"));
            const Json cl = read_json_file(out / name / kernel_file(k.kind, "clusters", ".json"));
            Json row{{"kind", to_string(k.kind)},
                     {"eigenvalues", e.at("eigenvalues")},
                     {"degenerate", e.at("degenerate")},
                     {"contiguous_clusters", cl.at("contiguous")},
                     {"inertia", cl.at("inertia")}};
            if (e.contains("class_margin_dim_1")) row["class_margin_dim_1"] = e.at("class_margin_dim_1");
            d["kernels"].push_back(row);
        }
        s["datasets"].push_back(d);
    }
    return s;
}

int run(const std::string& cmd, const Flags& f, const std::string& command_line) {
    const auto start = std::chrono::steady_clock::now();
    if (cmd == "generate") {
        const RunConfig c = resolve_config(f, nullptr, false);
        const fs::path out = c.output_dir;
        if (!c.has_dataset()) throw ValidationError("experiment: verify-bounds has no dataset (use verify-bounds)");
        stage_generate(c, out);
        write_json_file(out / "config.json", to_json(c));
        finish(c, out, command_line, start);
    } else if (cmd == "kernel" || cmd == "embed" || cmd == "cluster") {
        if (f.out.empty() && f.config.empty()) throw ValidationError("--out: required");
        const RunConfig c = resolve_config(f, nullptr, true);
        const fs::path out = c.output_dir;
        check_matches_dataset(c, out);
        if (cmd == "kernel") stage_kernel(c, out);
        if (cmd == "embed") stage_embed(c, out);
        if (cmd == "cluster") stage_cluster(c, out);
        finish(c, out, command_line, start);
    } else if (cmd == "pipeline" || cmd == "shadows") {
        const RunConfig c = resolve_config(f, cmd == "shadows" ? "shadows" : nullptr, false);
        if (!c.has_dataset()) throw ValidationError("experiment: verify-bounds has no dataset (use verify-bounds)");
        const fs::path out = c.output_dir;
        stage_generate(c, out);
        write_json_file(out / "config.json", to_json(c));
        stage_kernel(c, out);
        stage_embed(c, out);
        stage_cluster(c, out);
        if (c.experiment == Experiment::Shadows)
            for (const auto& name : dataset_names(out))
                write_json_file(out / name / "shadow_estimates.json", shadow_summary(read_dataset(out / name)));
        write_json_file(out / "summary.json", pipeline_summary(c, out));
        finish(c, out, command_line, start);
    } else if (cmd == "verify-bounds") {
        const RunConfig c = resolve_config(f, "verify-bounds", false);
        const fs::path out = c.output_dir;
        const auto campaign = verify_bounds(c);
        write_bound_campaign(campaign, out);
        write_json_file(out / "config.json", to_json(c));
        finish(c, out, command_line, start);
        std::cout << "violations: " << campaign.summary.at("total_violations").get<int>() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qckit: quantum state clustering kit"};
    app.require_subcommand(1, 1);
    Flags flags;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"generate", "Generate dataset states, profiles and RDM caches"},
        {"kernel", "Compute kernel matrices for a generated dataset"},
        {"embed", "Embed kernel matrices (diffusion map or kernel PCA)"},
        {"cluster", "Run k-means on embedding coordinates"},
        {"pipeline", "generate, kernel, embed and cluster in one run"},
        {"verify-bounds", "Randomized verification of the complexity bounds"},
        {"shadows", "Classical-shadow dataset, shadow kernel and estimator checks"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "Run configuration (JSON)");
        sub->add_option("--out", flags.out, "Output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "Master seed (overrides the config)");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) flags.seed = seed;
    if (sub->count("--threads")) flags.threads = threads;

    std::string command_line = "qckit";
    for (int i = 1; i < argc; ++i) command_line += std::string(" ") + argv[i];
    try {
        return run(sub->get_name(), flags, command_line);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed record: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
