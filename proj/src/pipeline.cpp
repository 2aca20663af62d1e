#include "forkscope/pipeline.hpp"

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>

#include "forkscope/analytics.hpp"
#include "forkscope/clustering.hpp"
#include "forkscope/error.hpp"
#include "forkscope/hosting.hpp"
#include "forkscope/io.hpp"
#include "forkscope/maintenance.hpp"
#include "forkscope/parallel.hpp"
#include "forkscope/vulnscan.hpp"

#ifndef FORKSCOPE_VERSION
#define FORKSCOPE_VERSION "dev"
#endif

namespace forkscope {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::ConfigInvalid, field + ": " + what);
}

void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) invalid(path.empty() ? "<root>" : path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            invalid(path.empty() ? key : path + "." + key, "unknown key");
    }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

std::string as_string(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) invalid(field, "expected a string");
    return n.as<std::string>();
}

long long as_integer(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) invalid(field, "expected an integer");
    try {
        return n.as<long long>();
    } catch (const YAML::Exception&) {
        invalid(field, "expected an integer, got '" + n.Scalar() + "'");
    }
}

std::size_t as_count(const YAML::Node& n, const std::string& field, long long min = 0) {
    long long v = as_integer(n, field);
    if (v < min) invalid(field, "must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

double as_real(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) invalid(field, "expected a number");
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        invalid(field, "expected a number, got '" + n.Scalar() + "'");
    }
}

std::vector<std::string> as_strings(const YAML::Node& n, const std::string& field) {
    if (!n.IsSequence()) invalid(field, "expected a list");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(as_string(n[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

bool safe_repo_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '/';
    }) && id.front() != '/' && id.back() != '/' && id.find("..") == std::string::npos;
}

// File stem for per-repo outputs ("owner/name" -> "owner__name").
std::string stem(const std::string& repo_id) {
    std::string out;
    for (char c : repo_id) {
        if (c == '/') out += "__";
        else out += c;
    }
    return out;
}

}  // namespace

fs::path PipelineConfig::resolve(const fs::path& p) const {
    if (p.empty() || p.is_absolute()) return p;
    return base_dir / p;
}

PipelineConfig config_from_yaml(const std::string& text, const fs::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    check_keys(root, "",
               {"repos", "parent_repo_id", "as_of", "hosting_endpoint", "ingest", "kmeans", "select_features",
                "similarity", "lineage", "vulnscan", "registry_file", "market_cap_file", "analytics", "output_dir",
                "jobs", "windows"});

    PipelineConfig cfg;
    cfg.base_dir = base_dir;

    if (!root["repos"]) invalid("repos", "required");
    const YAML::Node repos = root["repos"];
    if (!repos.IsSequence() || repos.size() == 0) invalid("repos", "expected a non-empty list");
    std::set<std::string> ids, stems;
    for (std::size_t i = 0; i < repos.size(); ++i) {
        const std::string path = "repos[" + std::to_string(i) + "]";
        check_keys(repos[i], path, {"repo_id", "source", "metadata"});
        RepoSpec spec;
        if (!repos[i]["repo_id"]) invalid(join(path, "repo_id"), "required");
        spec.repo_id = as_string(repos[i]["repo_id"], join(path, "repo_id"));
        if (!safe_repo_id(spec.repo_id)) invalid(join(path, "repo_id"), "'" + spec.repo_id + "' is not a usable identifier");
        if (!ids.insert(spec.repo_id).second) invalid(join(path, "repo_id"), "duplicate repo_id '" + spec.repo_id + "'");
        if (!stems.insert(stem(spec.repo_id)).second) invalid(join(path, "repo_id"), "collides with another repo_id on disk");
        if (!repos[i]["source"]) invalid(join(path, "source"), "required");
        spec.source = as_string(repos[i]["source"], join(path, "source"));
        if (repos[i]["metadata"]) spec.metadata = as_string(repos[i]["metadata"], join(path, "metadata"));
        cfg.repos.push_back(std::move(spec));
    }

    if (root["parent_repo_id"]) {
        cfg.parent_repo_id = as_string(root["parent_repo_id"], "parent_repo_id");
        if (!ids.count(*cfg.parent_repo_id)) invalid("parent_repo_id", "'" + *cfg.parent_repo_id + "' is not listed in repos");
    }
    if (root["as_of"]) cfg.as_of = as_integer(root["as_of"], "as_of");
    if (root["hosting_endpoint"]) cfg.hosting_endpoint = as_string(root["hosting_endpoint"], "hosting_endpoint");
    if (root["windows"]) {
        auto w = as_strings(root["windows"], "windows");
        if (w != std::vector<std::string>{"3m", "6m", "12m"}) invalid("windows", "only [3m, 6m, 12m] is supported");
    }
    if (const auto n = root["ingest"]) {
        check_keys(n, "ingest", {"max_commits"});
        if (n["max_commits"]) cfg.max_commits = as_count(n["max_commits"], "ingest.max_commits");
    }
    if (const auto n = root["kmeans"]) {
        check_keys(n, "kmeans", {"k_range", "seed", "restarts"});
        if (const auto r = n["k_range"]) {
            if (!r.IsSequence() || r.size() != 2) invalid("kmeans.k_range", "expected [k_min, k_max]");
            cfg.k_min = as_count(r[0], "kmeans.k_range[0]", 2);
            cfg.k_max = as_count(r[1], "kmeans.k_range[1]", 2);
            if (cfg.k_min > cfg.k_max) invalid("kmeans.k_range", "k_min exceeds k_max");
        }
        if (n["seed"]) cfg.seed = as_count(n["seed"], "kmeans.seed");
        if (n["restarts"]) cfg.kmeans_restarts = as_count(n["restarts"], "kmeans.restarts", 1);
    }
    if (const auto n = root["select_features"]) {
        check_keys(n, "select_features", {"stop_after"});
        if (n["stop_after"]) cfg.stop_after = as_count(n["stop_after"], "select_features.stop_after", 1);
    }
    if (const auto n = root["similarity"]) {
        check_keys(n, "similarity", {"min_match", "extensions", "pairing"});
        if (n["min_match"]) cfg.similarity.min_match = as_count(n["min_match"], "similarity.min_match", 1);
        if (n["extensions"]) cfg.similarity.extensions = as_strings(n["extensions"], "similarity.extensions");
        if (n["pairing"]) {
            auto p = as_string(n["pairing"], "similarity.pairing");
            if (p == "greedy") cfg.similarity.pairing = Pairing::Greedy;
            else if (p == "optimal") cfg.similarity.pairing = Pairing::Optimal;
            else invalid("similarity.pairing", "expected greedy or optimal");
        }
    }
    if (const auto n = root["lineage"]) {
        check_keys(n, "lineage", {"prefix_probe", "window_secs", "stride", "default_threshold"});
        if (n["prefix_probe"]) cfg.prefix_probe = as_count(n["prefix_probe"], "lineage.prefix_probe", 1);
        if (n["window_secs"]) cfg.window_secs = static_cast<UnixSeconds>(as_count(n["window_secs"], "lineage.window_secs", 1));
        if (n["stride"]) cfg.stride = as_count(n["stride"], "lineage.stride", 1);
        if (n["default_threshold"]) {
            cfg.default_threshold = as_real(n["default_threshold"], "lineage.default_threshold");
            if (!(cfg.default_threshold > 0 && cfg.default_threshold <= 1)) invalid("lineage.default_threshold", "must lie in (0, 1]");
        }
    }
    if (const auto n = root["vulnscan"]) {
        check_keys(n, "vulnscan", {"signature_file", "fallback_file_limit", "extensions"});
        if (n["signature_file"]) cfg.signature_file = as_string(n["signature_file"], "vulnscan.signature_file");
        if (n["fallback_file_limit"]) cfg.fallback_file_limit = as_count(n["fallback_file_limit"], "vulnscan.fallback_file_limit");
        if (n["extensions"]) cfg.scan_extensions = as_strings(n["extensions"], "vulnscan.extensions");
    }
    if (root["registry_file"]) cfg.registry_file = as_string(root["registry_file"], "registry_file");
    if (root["market_cap_file"]) cfg.market_cap_file = as_string(root["market_cap_file"], "market_cap_file");
    if (const auto n = root["analytics"]) {
        check_keys(n, "analytics", {"vuln_buckets", "similarity_buckets", "similarity_low_bucket"});
        if (const auto b = n["vuln_buckets"]) {
            if (!b.IsSequence()) invalid("analytics.vuln_buckets", "expected a list");
            cfg.vuln_buckets.clear();
            for (std::size_t i = 0; i < b.size(); ++i)
                cfg.vuln_buckets.push_back(as_count(b[i], "analytics.vuln_buckets[" + std::to_string(i) + "]", 1));
        }
        if (const auto b = n["similarity_buckets"]) {
            if (!b.IsSequence()) invalid("analytics.similarity_buckets", "expected a list");
            cfg.similarity_buckets.clear();
            for (std::size_t i = 0; i < b.size(); ++i)
                cfg.similarity_buckets.push_back(as_real(b[i], "analytics.similarity_buckets[" + std::to_string(i) + "]"));
        }
        if (n["similarity_low_bucket"]) cfg.similarity_low_bucket = as_real(n["similarity_low_bucket"], "analytics.similarity_low_bucket");
    }
    if (root["output_dir"]) cfg.output_dir = as_string(root["output_dir"], "output_dir");
    if (root["jobs"]) cfg.jobs = as_count(root["jobs"], "jobs");
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigInvalid, e.what());
    }
    return config_from_yaml(text, fs::absolute(path).parent_path());
}

std::string config_fingerprint(const PipelineConfig& cfg) {
    json j;
    json repos = json::array();
    for (const auto& r : cfg.repos) repos.push_back({r.repo_id, r.source.generic_string(), r.metadata});
    j["repos"] = repos;
    j["parent_repo_id"] = cfg.parent_repo_id ? json(*cfg.parent_repo_id) : json();
    j["as_of"] = cfg.as_of ? json(*cfg.as_of) : json();
    j["hosting_endpoint"] = cfg.hosting_endpoint;
    j["max_commits"] = cfg.max_commits;
    j["kmeans"] = {cfg.k_min, cfg.k_max, cfg.seed, cfg.kmeans_restarts};
    j["stop_after"] = cfg.stop_after;
    j["similarity"] = {cfg.similarity.min_match, cfg.similarity.extensions, cfg.similarity.pairing == Pairing::Optimal};
    j["lineage"] = {cfg.prefix_probe, cfg.window_secs, cfg.stride, cfg.default_threshold};
    j["vulnscan"] = {cfg.signature_file.generic_string(), cfg.fallback_file_limit, cfg.scan_extensions};
    j["registry_file"] = cfg.registry_file.generic_string();
    j["market_cap_file"] = cfg.market_cap_file.generic_string();
    j["analytics"] = {cfg.vuln_buckets, cfg.similarity_buckets, cfg.similarity_low_bucket};
    return j.dump();
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::Ingest,     Stage::Features, Stage::Cluster,
                                           Stage::SelectFeatures, Stage::Similarity, Stage::Lineage,
                                           Stage::Vulnscan,   Stage::Crosstab, Stage::Stats};
    return stages;
}

const char* stage_name(Stage s) noexcept {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Features: return "features";
        case Stage::Cluster: return "cluster";
        case Stage::SelectFeatures: return "select-features";
        case Stage::Similarity: return "similarity";
        case Stage::Lineage: return "lineage";
        case Stage::Vulnscan: return "vulnscan";
        case Stage::Crosstab: return "crosstab";
        case Stage::Stats: return "stats";
    }
    return "?";
}

std::optional<Stage> stage_from_name(std::string_view name) {
    for (Stage s : all_stages())
        if (name == stage_name(s)) return s;
    return std::nullopt;
}

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Table {
    CsvRow header;
    std::vector<CsvRow> rows;

    std::size_t column(const std::string& name, const std::string& file) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorCode::StageDependencyMissing, file + " lacks column " + name);
        return static_cast<std::size_t>(it - header.begin());
    }
};

double parse_real(const std::string& cell, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidInput, what + ": '" + cell + "' is not a number");
    }
}

class Runner {
public:
    explicit Runner(const PipelineConfig& cfg) : cfg_(cfg), out_(cfg.resolve(cfg.output_dir)) {}

    RunManifest run(const std::set<Stage>& stages) {
        fs::create_directories(out_);
        RunManifest manifest;
        manifest.tool_version = FORKSCOPE_VERSION;
        manifest.config_sha256 = sha256_hex(config_fingerprint(cfg_));
        for (Stage s : all_stages()) {
            if (!stages.count(s)) continue;
            StageRecord record;
            record.stage = stage_name(s);
            current_ = &record;
            stage_ = s;
            spdlog::info("stage {}", record.stage);
            const auto start = std::chrono::steady_clock::now();
            try {
                dispatch(s);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::StageDependencyMissing || e.code() == ErrorCode::ConfigInvalid ||
                    e.code() == ErrorCode::StageFailed)
                    throw;
                throw Error(ErrorCode::StageFailed, record.stage + ": " + e.what());
            }
            record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            manifest.stages.push_back(std::move(record));
        }
        current_ = nullptr;
        write_skipped(stages);
        manifest.skipped = skipped_;

        json stages_json = json::array();
        for (const auto& r : manifest.stages)
            stages_json.push_back({{"stage", r.stage}, {"inputs", r.inputs}, {"outputs", r.outputs}, {"wall_seconds", r.wall_seconds}});
        json m{{"tool_version", manifest.tool_version},
               {"config_sha256", manifest.config_sha256},
               {"stages", stages_json},
               {"skipped", skipped_.size()}};
        write_file_atomic(out_ / "manifest.json", dump(m));
        return manifest;
    }

private:
    const PipelineConfig& cfg_;
    fs::path out_;
    StageRecord* current_ = nullptr;
    Stage stage_ = Stage::Ingest;
    std::vector<SkipRecord> skipped_;
    std::mutex skip_mutex_;
    std::map<std::string, RepoHistory> histories_;

    void dispatch(Stage s) {
        switch (s) {
            case Stage::Ingest: return ingest();
            case Stage::Features: return features();
            case Stage::Cluster: return cluster();
            case Stage::SelectFeatures: return select_features();
            case Stage::Similarity: return similarity();
            case Stage::Lineage: return lineage();
            case Stage::Vulnscan: return vulnscan();
            case Stage::Crosstab: return crosstab_stage();
            case Stage::Stats: return stats();
        }
    }

    // -- file plumbing -------------------------------------------------------

    void write(const std::string& rel, const std::string& content) {
        fs::create_directories((out_ / rel).parent_path());
        write_file_atomic(out_ / rel, content);
        current_->outputs[rel] = sha256_hex(content);
    }

    bool have(const std::string& rel) const { return fs::exists(out_ / rel); }

    std::string input(const std::string& rel) {
        if (!have(rel))
            throw Error(ErrorCode::StageDependencyMissing,
                        std::string(stage_name(stage_)) + " needs " + (out_ / rel).string() + "; run the stage that produces it first");
        std::string content = read_file(out_ / rel);
        current_->inputs[rel] = sha256_hex(content);
        return content;
    }

    std::string external(const fs::path& path, const char* field) {
        if (path.empty()) throw Error(ErrorCode::ConfigInvalid, std::string(field) + ": required by stage " + stage_name(stage_));
        std::string content = read_file(cfg_.resolve(path));
        current_->inputs[path.generic_string()] = sha256_hex(content);
        return content;
    }

    Table table(const std::string& rel) {
        auto rows = parse_csv(input(rel));
        Table t;
        if (rows.empty()) throw Error(ErrorCode::StageDependencyMissing, rel + " is empty");
        t.header = std::move(rows.front());
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].size() == 1 && rows[i][0].empty())) t.rows.push_back(std::move(rows[i]));
        return t;
    }

    void skip(const std::string& repo, const std::string& reason) {
        spdlog::warn("{}: skipping {}: {}", stage_name(stage_), repo, reason);
        std::lock_guard lock(skip_mutex_);
        skipped_.push_back({stage_name(stage_), repo, reason});
    }

    void write_skipped(const std::set<Stage>& ran) {
        std::vector<SkipRecord> rows;
        if (have("skipped.csv")) {
            auto old = parse_csv(read_file(out_ / "skipped.csv"));
            for (std::size_t i = 1; i < old.size(); ++i) {
                if (old[i].size() != 3) continue;
                auto s = stage_from_name(old[i][0]);
                if (s && !ran.count(*s)) rows.push_back({old[i][0], old[i][1], old[i][2]});
            }
        }
        rows.insert(rows.end(), skipped_.begin(), skipped_.end());
        auto order = [](const SkipRecord& r) {
            auto s = stage_from_name(r.stage);
            return s ? static_cast<int>(*s) : 99;
        };
        std::stable_sort(rows.begin(), rows.end(), [&](const SkipRecord& a, const SkipRecord& b) {
            return std::make_tuple(order(a), a.repo_id, a.reason) < std::make_tuple(order(b), b.repo_id, b.reason);
        });
        std::string csv = csv_line({"stage", "repo_id", "reason"});
        for (const auto& r : rows) csv += csv_line({r.stage, r.repo_id, r.reason});
        write_file_atomic(out_ / "skipped.csv", csv);
    }

    // -- shared loaders ------------------------------------------------------

    std::vector<std::string> ingested() {
        Table t = table("ingest.csv");
        const auto c = t.column("repo_id", "ingest.csv");
        std::vector<std::string> ids;
        for (const auto& r : t.rows) ids.push_back(r.at(c));
        return ids;
    }

    const RepoHistory& history(const std::string& id) {
        auto it = histories_.find(id);
        if (it != histories_.end()) {
            input("histories/" + stem(id) + ".json");
            return it->second;
        }
        const std::string rel = "histories/" + stem(id) + ".json";
        const std::string text = input(rel);
        return histories_.emplace(id, history_from_json(json::parse(text))).first->second;
    }

    void preload(const std::vector<std::string>& ids) {
        for (const auto& id : ids) history(id);
    }

    HostingMetadata metadata(const std::string& id) {
        return metadata_from_json(json::parse(input("metadata/" + stem(id) + ".json")), id);
    }

    std::map<std::string, std::size_t> cluster_labels() {
        Table t = table("clusters.csv");
        const auto rc = t.column("repo_id", "clusters.csv"), cc = t.column("cluster", "clusters.csv");
        std::map<std::string, std::size_t> out;
        for (const auto& r : t.rows) out[r.at(rc)] = static_cast<std::size_t>(std::stoul(r.at(cc)));
        return out;
    }

    std::map<std::string, std::size_t> census() {
        Table t = table("census.csv");
        const auto rc = t.column("repo_id", "census.csv"), uc = t.column("unpatched_count", "census.csv");
        std::map<std::string, std::size_t> out;
        for (const auto& r : t.rows) out[r.at(rc)] = static_cast<std::size_t>(std::stoul(r.at(uc)));
        return out;
    }

    struct FeatureTable {
        std::vector<std::string> ids;
        Matrix values;
    };

    FeatureTable feature_table() {
        Table t = table("features.csv");
        const auto& names = feature_names();
        std::vector<std::size_t> cols;
        for (auto n : names) cols.push_back(t.column(std::string(n), "features.csv"));
        const auto rc = t.column("repo_id", "features.csv");
        FeatureTable ft;
        std::vector<std::vector<double>> rows;
        for (const auto& r : t.rows) {
            ft.ids.push_back(r.at(rc));
            std::vector<double> v;
            for (auto c : cols) v.push_back(parse_real(r.at(c), "features.csv"));
            rows.push_back(std::move(v));
        }
        ft.values = Matrix::from_rows(rows);
        ft.values.cols = names.size();
        return ft;
    }

    // -- ingest --------------------------------------------------------------

    void ingest() {
        IngestLimits limits{cfg_.max_commits};
        const std::size_t n = cfg_.repos.size();
        std::vector<std::optional<RepoHistory>> loaded(n);
        std::vector<std::optional<HostingMetadata>> meta(n);
        parallel_for(n, cfg_.jobs, [&](std::size_t i) {
            const RepoSpec& spec = cfg_.repos[i];
            try {
                RepoHistory h = load_history(cfg_.resolve(spec.source), limits);
                if (h.empty()) throw Error(ErrorCode::EmptyHistory, "no commits");
                std::vector<CommitRecord> commits = h.commits();
                loaded[i] = RepoHistory::build(spec.repo_id, std::move(commits), h.truncated());

                std::string endpoint = spec.metadata.empty() ? cfg_.hosting_endpoint : spec.metadata;
                if (endpoint.empty()) {
                    spdlog::warn("{}: no metadata source configured; popularity counters are zero", spec.repo_id);
                    HostingMetadata m;
                    m.repo_id = spec.repo_id;
                    meta[i] = m;
                } else {
                    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
                        endpoint = cfg_.resolve(endpoint).string();
                    meta[i] = fetch_hosting_metadata(endpoint, spec.repo_id);
                }
            } catch (const Error& e) {
                loaded[i].reset();
                skip(spec.repo_id, e.what());
            }
        });

        std::string csv = csv_line({"repo_id", "commits", "truncated", "head", "head_time"});
        for (std::size_t i = 0; i < n; ++i) {
            if (!loaded[i]) continue;
            const RepoHistory& h = *loaded[i];
            const std::string s = stem(h.repo_id());
            write("histories/" + s + ".json", dump(history_to_json(h)));
            write("metadata/" + s + ".json", dump(metadata_to_json(*meta[i])));
            csv += csv_line({h.repo_id(), std::to_string(h.size()), h.truncated() ? "true" : "false", h.head(),
                             std::to_string(h.commits().back().author_time)});
            histories_.insert_or_assign(h.repo_id(), h);
        }
        write("ingest.csv", csv);
    }

    // -- features ------------------------------------------------------------

    UnixSeconds as_of(const std::vector<std::string>& ids) {
        if (cfg_.as_of) return *cfg_.as_of;
        UnixSeconds latest = 0;
        for (const auto& id : ids) latest = std::max(latest, history(id).commits().back().author_time);
        return latest;
    }

    void features() {
        const auto ids = ingested();
        preload(ids);
        const UnixSeconds when = as_of(ids);
        std::vector<std::optional<FeatureVector>> vectors(ids.size());
        std::vector<HostingMetadata> metas;
        for (const auto& id : ids) metas.push_back(metadata(id));
        parallel_for(ids.size(), cfg_.jobs, [&](std::size_t i) {
            try {
                vectors[i] = extract_features(histories_.at(ids[i]), metas[i], when);
            } catch (const Error& e) {
                skip(ids[i], e.what());
            }
        });
        CsvRow header{"repo_id"};
        for (auto n : feature_names()) header.emplace_back(n);
        std::string csv = csv_line(header);
        for (const auto& v : vectors) {
            if (!v) continue;
            CsvRow row{v->repo_id};
            for (double x : v->flatten()) row.push_back(format_double(x));
            csv += csv_line(row);
        }
        write("features.csv", csv);
    }

    // -- clustering ------------------------------------------------------------

    void cluster() {
        FeatureTable ft = feature_table();
        if (ft.ids.size() < 2) throw Error(ErrorCode::TooFewVectors, "clustering needs at least 2 repositories");
        const Standardized st = standardize(ft.values);
        const std::size_t k_max = std::min(cfg_.k_max, ft.ids.size());
        if (cfg_.k_min > k_max)
            throw Error(ErrorCode::KTooLarge, "k_min = " + std::to_string(cfg_.k_min) + " but only " +
                                                  std::to_string(ft.ids.size()) + " repositories");
        KMeansOptions opts;
        opts.restarts = cfg_.kmeans_restarts;
        const KSelection sel = select_k(st.z, cfg_.k_min, k_max, cfg_.seed, opts);
        const ClusteringResult res = kmeans(st.z, sel.best_k, cfg_.seed, opts);

        std::string csv = csv_line({"repo_id", "cluster", "silhouette_point"});
        for (std::size_t i = 0; i < ft.ids.size(); ++i)
            csv += csv_line({ft.ids[i], std::to_string(res.assignments[i]), format_double(res.per_point[i].s)});
        write("clusters.csv", csv);

        json scores = json::array();
        for (auto [k, s] : sel.scores) scores.push_back({{"k", k}, {"silhouette", s}});
        json centroids = json::array();
        for (std::size_t c = 0; c < res.k; ++c) {
            auto row = res.centroids.row(c);
            centroids.push_back(std::vector<double>(row.begin(), row.end()));
        }
        std::vector<std::string> constant;
        for (std::size_t c = 0; c < st.zero_variance.size(); ++c)
            if (st.zero_variance[c]) constant.emplace_back(feature_names()[c]);
        std::vector<std::string> names(feature_names().begin(), feature_names().end());
        json summary{{"k", sel.best_k},
                     {"seed", cfg_.seed},
                     {"silhouette", res.silhouette},
                     {"silhouette_by_k", scores},
                     {"iterations", res.iterations},
                     {"inertia_trace", res.inertia_trace},
                     {"features", names},
                     {"feature_mean", st.mean},
                     {"feature_stddev", st.stddev},
                     {"zero_variance_features", constant},
                     {"centroids", centroids}};
        write("cluster_summary.json", dump(summary));
    }

    void select_features() {
        FeatureTable ft = feature_table();
        auto labels_by_repo = cluster_labels();
        std::vector<std::size_t> labels;
        for (const auto& id : ft.ids) {
            auto it = labels_by_repo.find(id);
            if (it == labels_by_repo.end())
                throw Error(ErrorCode::StageDependencyMissing, "clusters.csv has no row for " + id + "; rerun cluster");
            labels.push_back(it->second);
        }
        const Standardized st = standardize(ft.values);
        std::vector<std::string> names(feature_names().begin(), feature_names().end());
        const AttributeSelection sel = best_first_attributes(st.z, names, labels, cfg_.stop_after);
        json trace = json::array();
        for (const auto& [subset, merit] : sel.trace) trace.push_back({{"subset", subset}, {"merit", merit}});
        write("key_features.json", dump({{"selected", sel.selected}, {"merit", sel.merit}, {"stop_after", cfg_.stop_after},
                                         {"evaluated", sel.trace.size()}, {"trace", trace}}));
    }

    // -- similarity ------------------------------------------------------------

    std::map<std::string, std::shared_ptr<const SnapshotTree>> heads(const std::vector<std::string>& ids) {
        std::map<std::string, std::shared_ptr<const SnapshotTree>> out;
        std::vector<std::shared_ptr<const SnapshotTree>> trees(ids.size());
        parallel_for(ids.size(), cfg_.jobs, [&](std::size_t i) {
            try {
                const RepoHistory& h = histories_.at(ids[i]);
                trees[i] = std::make_shared<const SnapshotTree>(checkout_snapshot(h, h.head()));
            } catch (const Error& e) {
                skip(ids[i], e.what());
            }
        });
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (trees[i]) out.emplace(ids[i], trees[i]);
        return out;
    }

    void similarity() {
        const auto ids = ingested();
        preload(ids);
        auto snaps = heads(ids);
        std::vector<std::pair<std::string, std::string>> pairs;
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j)
                if (snaps.count(ids[i]) && snaps.count(ids[j])) pairs.emplace_back(ids[i], ids[j]);

        SimilarityCache cache;
        std::vector<std::optional<RepoSimilarity>> results(pairs.size());
        parallel_for(pairs.size(), cfg_.jobs, [&](std::size_t p) {
            try {
                results[p] = repo_similarity(*snaps.at(pairs[p].first), *snaps.at(pairs[p].second), cfg_.similarity, &cache);
            } catch (const Error& e) {
                skip(pairs[p].first + " vs " + pairs[p].second, e.what());
            }
        });

        std::string csv = csv_line({"repo_a", "repo_b", "value", "matched_tokens", "total_tokens_a", "total_tokens_b"});
        std::vector<double> values;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            if (!results[p]) continue;
            const auto& r = *results[p];
            csv += csv_line({pairs[p].first, pairs[p].second, format_double(r.overall.value),
                             std::to_string(r.overall.matched_tokens), std::to_string(r.overall.total_tokens_a),
                             std::to_string(r.overall.total_tokens_b)});
            values.push_back(r.overall.value);
            std::string detail = csv_line({"path_a", "path_b", "value", "matched_tokens"});
            for (const auto& fp : r.pairs)
                detail += csv_line({fp.path_a, fp.path_b, format_double(fp.value), std::to_string(fp.matched_tokens)});
            write("similarity/" + stem(pairs[p].first) + "--" + stem(pairs[p].second) + ".csv", detail);
        }
        write("similarity_pairs.csv", csv);
        std::string cdf = csv_line({"score", "fraction"});
        if (!values.empty())
            for (const auto& pt : similarity_cdf(values)) cdf += csv_line({format_double(pt.score), format_double(pt.fraction)});
        write("similarity_cdf.csv", cdf);
    }

    // -- lineage ---------------------------------------------------------------

    void lineage() {
        if (!cfg_.parent_repo_id) throw Error(ErrorCode::ConfigInvalid, "parent_repo_id: required by stage lineage");
        const auto ids = ingested();
        const std::string& parent_id = *cfg_.parent_repo_id;
        if (std::find(ids.begin(), ids.end(), parent_id) == ids.end())
            throw Error(ErrorCode::StageFailed, "lineage: parent " + parent_id + " was not ingested");
        preload(ids);
        std::vector<const RepoHistory*> children;
        for (const auto& id : ids)
            if (id != parent_id) children.push_back(&histories_.at(id));
        const RepoHistory& parent = histories_.at(parent_id);

        LineageConfig lc;
        lc.prefix_probe = cfg_.prefix_probe;
        lc.window_secs = cfg_.window_secs;
        lc.stride = cfg_.stride;
        lc.default_threshold = cfg_.default_threshold;
        lc.jobs = cfg_.jobs;
        lc.similarity = cfg_.similarity;
        const LineageResult res = lineage_sweep(children, parent, lc);

        auto opt_str = [](const auto& v) { return v ? std::string(*v) : std::string(); };
        std::string csv = csv_line({"child", "parent", "heuristic", "verdict", "fork_time", "parent_version",
                                    "similarity_at_fork", "fork_commit_child", "sampled"});
        for (const auto& r : res.reports)
            csv += csv_line({r.child_id, r.parent_id, to_string(r.heuristic), to_string(r.verdict),
                             r.fork_time ? std::to_string(*r.fork_time) : "", opt_str(r.parent_version),
                             r.similarity_at_fork ? format_double(*r.similarity_at_fork) : "", opt_str(r.fork_commit_child),
                             r.sampled ? "true" : "false"});
        write("lineage.csv", csv);
        write("threshold.json", dump({{"sample_scores", res.threshold.sample_scores},
                                      {"mean", res.threshold.mean},
                                      {"three_sigma", res.threshold.three_sigma},
                                      {"threshold", res.threshold.threshold},
                                      {"fallback_to_default", res.threshold.fallback}}));

        // Similarity between each fork's head and the parent version it came from.
        SimilarityCache cache;
        SnapshotCache parent_snaps(parent, 8);
        std::string fsim = csv_line({"child", "parent_version", "value"});
        for (std::size_t i = 0; i < res.reports.size(); ++i) {
            const ForkReport& r = res.reports[i];
            if (r.verdict != Verdict::Forked || !r.parent_version) continue;
            try {
                const SnapshotTree child_head = checkout_snapshot(*children[i], children[i]->head());
                auto base = parent_snaps.get(*r.parent_version);
                const double v = repo_similarity(child_head, *base, cfg_.similarity, &cache).overall.value;
                fsim += csv_line({r.child_id, *r.parent_version, format_double(v)});
            } catch (const Error& e) {
                skip(r.child_id, e.what());
            }
        }
        write("forked_similarity.csv", fsim);
    }

    // -- vulnscan --------------------------------------------------------------

    void vulnscan() {
        const auto sigs = signatures_from_json(json::parse(external(cfg_.signature_file, "vulnscan.signature_file")));
        const auto ids = ingested();
        preload(ids);
        ScanOptions opts;
        opts.extensions = cfg_.scan_extensions;
        opts.fallback_file_limit = cfg_.fallback_file_limit;
        std::vector<std::vector<VulnFinding>> per_repo(ids.size());
        std::vector<bool> ok(ids.size(), false);
        parallel_for(ids.size(), cfg_.jobs, [&](std::size_t i) {
            try {
                for (const auto& sig : sigs) per_repo[i].push_back(scan_history(histories_.at(ids[i]), sig, opts));
                ok[i] = true;
            } catch (const Error& e) {
                per_repo[i].clear();
                skip(ids[i], e.what());
            }
        });
        std::vector<VulnFinding> findings;
        std::string csv = csv_line({"repo_id", "cve_id", "status", "introduced_at", "patched_at", "time_to_patch_days"});
        auto ts = [](const std::optional<UnixSeconds>& t) { return t ? std::to_string(*t) : std::string(); };
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!ok[i]) continue;
            for (const auto& f : per_repo[i]) {
                csv += csv_line({f.repo_id, f.cve_id, to_string(f.status), ts(f.introduced_at), ts(f.patched_at),
                                 f.time_to_patch_secs ? format_double(static_cast<double>(*f.time_to_patch_secs) /
                                                                      static_cast<double>(kSecondsPerDay))
                                                      : ""});
                findings.push_back(f);
            }
        }
        write("findings.csv", csv);
        std::string cen = csv_line({"repo_id", "unpatched_count"});
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ok[i] && sigs.empty()) cen += csv_line({ids[i], "0"});
        for (const auto& row : vuln_census(findings)) cen += csv_line({row.repo_id, std::to_string(row.unpatched_count)});
        write("census.csv", cen);
        json pts;
        try {
            const PatchTimeStats s = patch_time_stats(findings);
            pts = {{"count", s.count}, {"median_days", s.median_days}, {"mean_days", s.mean_days},
                   {"std_days", s.std_days}, {"within_16_days_fraction", s.within_16_days_fraction}};
        } catch (const Error&) {
            pts = {{"count", 0}};
        }
        write("patch_times.json", dump(pts));
    }

    // -- analytics ---------------------------------------------------------------

    void crosstab_stage() {
        const auto registry = parse_registry(external(cfg_.registry_file, "registry_file"));

        auto labels = cluster_labels();
        std::size_t k = 0;
        for (const auto& [id, c] : labels) k = std::max(k, c + 1);
        Groups by_cluster(k);
        for (std::size_t c = 0; c < k; ++c) by_cluster[c].first = "cluster_" + std::to_string(c);
        for (const auto& [id, c] : labels) by_cluster[c].second.push_back(id);
        emit_crosstab("crosstab_clusters", crosstab("cluster", by_cluster, registry));

        if (have("census.csv")) {
            auto counts = census();
            Groups g;
            g.emplace_back("0", std::vector<std::string>{});
            for (const auto& [id, n] : counts)
                if (n == 0) g.back().second.push_back(id);
            for (std::size_t t : cfg_.vuln_buckets) {
                g.emplace_back(">=" + std::to_string(t), std::vector<std::string>{});
                for (const auto& [id, n] : counts)
                    if (n >= t) g.back().second.push_back(id);
            }
            emit_crosstab("crosstab_vulns", crosstab("unpatched_vulnerabilities", g, registry));
        }

        if (have("forked_similarity.csv")) {
            Table t = table("forked_similarity.csv");
            const auto cc = t.column("child", "forked_similarity.csv"), vc = t.column("value", "forked_similarity.csv");
            Groups g;
            auto pct = [](double x) {
                std::ostringstream o;
                o << std::lround(x * 100.0) << "%";
                return o.str();
            };
            for (double b : cfg_.similarity_buckets) {
                g.emplace_back(">=" + pct(b), std::vector<std::string>{});
                for (const auto& r : t.rows)
                    if (parse_real(r.at(vc), "forked_similarity.csv") >= b) g.back().second.push_back(r.at(cc));
            }
            g.emplace_back("<" + pct(cfg_.similarity_low_bucket), std::vector<std::string>{});
            for (const auto& r : t.rows)
                if (parse_real(r.at(vc), "forked_similarity.csv") < cfg_.similarity_low_bucket) g.back().second.push_back(r.at(cc));
            CrossTab tab = crosstab("similarity", g, registry);
            // The All row covers every fork, including those outside the buckets.
            CrossTab all = crosstab("similarity", {{"All", [&] {
                                                        std::vector<std::string> v;
                                                        for (const auto& r : t.rows) v.push_back(r.at(cc));
                                                        return v;
                                                    }()}},
                                    registry);
            tab.rows.back() = all.rows.front();
            tab.rows.back().group = "All";
            emit_crosstab("crosstab_similarity", tab);
        }
    }

    void emit_crosstab(const std::string& name, const CrossTab& tab) {
        for (const auto& id : tab.unregistered) spdlog::warn("{}: {} is not in the registry; counted as active", name, id);
        write(name + ".csv", crosstab_csv(tab));
        write(name + ".json", dump(crosstab_json(tab)));
    }

    static json correlation_json(const std::function<Correlation()>& f) {
        try {
            const Correlation c = f();
            return {{"r", c.r}, {"p", c.p}, {"n", c.n}};
        } catch (const Error& e) {
            return {{"error", e.what()}};
        }
    }

    void stats() {
        auto labels = cluster_labels();
        auto counts = census();
        json out;

        std::map<std::size_t, std::vector<double>> by_cluster;
        for (const auto& [id, c] : labels)
            if (auto it = counts.find(id); it != counts.end()) by_cluster[c].push_back(static_cast<double>(it->second));
        json clusters = json::array();
        std::vector<std::vector<double>> groups;
        for (const auto& [c, values] : by_cluster) {
            const SummaryStats s = summary_stats(values);
            clusters.push_back({{"cluster", c}, {"count", s.count}, {"median", s.median}, {"mean", s.mean}, {"stddev", s.stddev}});
            groups.push_back(values);
        }
        out["unpatched_by_cluster"] = clusters;
        try {
            const KruskalWallis kw = kruskal_wallis(groups);
            out["kruskal_wallis"] = {{"h", kw.h}, {"p", kw.p}, {"dof", kw.dof}};
        } catch (const Error& e) {
            out["kruskal_wallis"] = {{"error", e.what()}};
        }

        if (have("patch_times.json")) out["time_to_patch"] = json::parse(input("patch_times.json"));

        if (!cfg_.market_cap_file.empty()) {
            auto rows = parse_csv(external(cfg_.market_cap_file, "market_cap_file"));
            std::map<std::string, double> cap;
            for (std::size_t i = 1; i < rows.size(); ++i)
                if (rows[i].size() >= 2) cap[rows[i][0]] = parse_real(rows[i][1], "market_cap_file");

            auto correlate = [&](const std::map<std::string, double>& metric) {
                return correlation_json([&] {
                    std::vector<double> x, y;
                    for (const auto& [id, v] : metric)
                        if (auto it = cap.find(id); it != cap.end()) {
                            x.push_back(it->second);
                            y.push_back(v);
                        }
                    return pearson(x, y);
                });
            };
            json corr;
            std::map<std::string, double> unpatched;
            for (const auto& [id, n] : counts) unpatched[id] = static_cast<double>(n);
            corr["unpatched_vulnerabilities"] = correlate(unpatched);
            if (have("features.csv")) {
                FeatureTable ft = feature_table();
                std::map<std::string, double> commits;
                for (std::size_t i = 0; i < ft.ids.size(); ++i) commits[ft.ids[i]] = ft.values(i, 0);
                corr["commits"] = correlate(commits);
            }
            if (cfg_.parent_repo_id && have("similarity_pairs.csv")) {
                Table t = table("similarity_pairs.csv");
                const auto a = t.column("repo_a", "similarity_pairs.csv"), b = t.column("repo_b", "similarity_pairs.csv"),
                           v = t.column("value", "similarity_pairs.csv");
                std::map<std::string, double> sim;
                for (const auto& r : t.rows) {
                    if (r.at(a) == *cfg_.parent_repo_id) sim[r.at(b)] = parse_real(r.at(v), "similarity_pairs.csv");
                    if (r.at(b) == *cfg_.parent_repo_id) sim[r.at(a)] = parse_real(r.at(v), "similarity_pairs.csv");
                }
                corr["similarity_to_parent"] = correlate(sim);
            }
            out["market_cap_pearson"] = corr;
        }
        write("stats.json", dump(out));
    }
};

}  // namespace

RunManifest run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages) {
    Runner runner(cfg);
    return runner.run(stages);
}

}  // namespace forkscope
