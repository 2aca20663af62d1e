#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "forkscope/error.hpp"
#include "forkscope/pipeline.hpp"

namespace fs = std::filesystem;
using namespace forkscope;

namespace {

enum Exit { kOk = 0, kPartial = 1, kUsage = 2, kFatal = 3 };

struct Globals {
    std::string config = "forkscope.yaml";
    std::string output;
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";
};

std::set<Stage> configured_stages(const PipelineConfig& cfg) {
    std::set<Stage> s{Stage::Ingest, Stage::Features, Stage::Cluster, Stage::SelectFeatures, Stage::Similarity};
    if (cfg.parent_repo_id) s.insert(Stage::Lineage);
    if (!cfg.signature_file.empty()) {
        s.insert(Stage::Vulnscan);
        s.insert(Stage::Stats);
    }
    if (!cfg.registry_file.empty()) s.insert(Stage::Crosstab);
    return s;
}

int execute(const Globals& g, std::optional<Stage> only) {
    PipelineConfig cfg = load_config(g.config);
    if (!g.output.empty()) cfg.output_dir = fs::absolute(g.output);
    if (g.jobs) cfg.jobs = *g.jobs;
    if (g.seed) cfg.seed = *g.seed;

    std::set<Stage> stages;
    if (only) {
        stages.insert(*only);
    } else {
        stages = configured_stages(cfg);
        for (Stage s : all_stages())
            if (!stages.count(s)) spdlog::info("stage {} not configured; not run", stage_name(s));
    }
    const RunManifest m = run_pipeline(cfg, stages);
    for (const auto& st : m.stages) spdlog::info("{}: {} outputs in {:.3f}s", st.stage, st.outputs.size(), st.wall_seconds);
    if (!m.skipped.empty()) {
        spdlog::warn("{} item(s) skipped; see skipped.csv", m.skipped.size());
        return kPartial;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forkscope: maintenance, lineage, similarity and patch-propagation analysis of repository families"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "pipeline configuration (YAML)");
    app.add_option("--output", g.output, "output directory (overrides output_dir)");
    app.add_option("--jobs", g.jobs, "worker threads; 0 = logical CPUs");
    app.add_option("--seed", g.seed, "k-means seed (overrides kmeans.seed)");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

    std::optional<Stage> only;
    bool full = false;
    for (Stage s : all_stages()) {
        auto* sub = app.add_subcommand(stage_name(s), std::string("run only the ") + stage_name(s) + " stage");
        sub->callback([&only, s] { only = s; });
    }
    app.add_subcommand("run", "run every configured stage")->callback([&full] { full = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    spdlog::set_pattern("%^%l%$: %v");

    try {
        return execute(g, full ? std::nullopt : only);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::StageDependencyMissing) return kUsage;
        return kFatal;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFatal;
    }
}
