#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forkscope/history.hpp"
#include "forkscope/lineage.hpp"
#include "forkscope/similarity.hpp"

namespace forkscope {

struct RepoSpec {
    std::string repo_id;
    std::filesystem::path source;    // History Fixture or local repository
    std::string metadata;            // optional: fixture file, fixture directory or REST base URL
};

struct PipelineConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    std::vector<RepoSpec> repos;
    std::optional<std::string> parent_repo_id;
    std::optional<UnixSeconds> as_of;  // default: newest head commit across repos
    std::string hosting_endpoint;      // fallback metadata source for every repo
    std::size_t max_commits = 0;

    std::size_t k_min = 2;
    std::size_t k_max = 8;
    std::uint64_t seed = 42;
    std::size_t kmeans_restarts = 10;
    std::size_t stop_after = 5;

    SimilarityConfig similarity;

    std::size_t prefix_probe = kDefaultPrefixProbe;
    UnixSeconds window_secs = kDefaultWindowSecs;
    std::size_t stride = 1;
    double default_threshold = kDefaultForkThreshold;

    std::filesystem::path signature_file;
    std::size_t fallback_file_limit = 30;
    std::vector<std::string> scan_extensions{".c", ".cc", ".cpp", ".cxx", ".h", ".hpp"};

    std::filesystem::path registry_file;
    std::filesystem::path market_cap_file;  // optional CSV repo_id,market_cap
    std::vector<std::size_t> vuln_buckets{1, 2, 3, 4};
    std::vector<double> similarity_buckets{0.95, 0.90, 0.80, 0.60};
    double similarity_low_bucket = 0.50;

    std::filesystem::path output_dir{"forkscope-out"};
    std::size_t jobs = 0;  // 0 = logical CPUs

    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// YAML document; see README for every key. Throws ConfigInvalid naming the
/// offending field.
PipelineConfig config_from_yaml(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical rendering used for the manifest's config digest.
std::string config_fingerprint(const PipelineConfig& cfg);

enum class Stage { Ingest, Features, Cluster, SelectFeatures, Similarity, Lineage, Vulnscan, Crosstab, Stats };

const std::vector<Stage>& all_stages();
const char* stage_name(Stage s) noexcept;
std::optional<Stage> stage_from_name(std::string_view name);

struct StageRecord {
    std::string stage;
    std::map<std::string, std::string> inputs;   // relative path -> sha256
    std::map<std::string, std::string> outputs;  // relative path -> sha256
    double wall_seconds = 0;
};

struct SkipRecord {
    std::string stage;
    std::string repo_id;
    std::string reason;
};

struct RunManifest {
    std::string config_sha256;
    std::string tool_version;
    std::vector<StageRecord> stages;
    std::vector<SkipRecord> skipped;
};

/// Runs the selected stages in dependency order. Inputs of a stage that is not
/// selected must already exist in output_dir (StageDependencyMissing
/// otherwise). Reports are written atomically; manifest.json is written last.
RunManifest run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages);

}  // namespace forkscope
