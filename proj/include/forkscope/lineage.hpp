#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "forkscope/history.hpp"
#include "forkscope/similarity.hpp"

namespace forkscope {

enum class Heuristic { H1, H2, None };
enum class Verdict { Forked, NotForked, Identical, Undetermined };

const char* to_string(Heuristic h) noexcept;
const char* to_string(Verdict v) noexcept;

struct ForkReport {
    std::string child_id;
    std::string parent_id;
    Heuristic heuristic = Heuristic::None;
    std::optional<CommitId> fork_commit_child;
    std::optional<CommitId> parent_version;
    std::optional<UnixSeconds> fork_time;
    std::optional<double> similarity_at_fork;
    Verdict verdict = Verdict::Undetermined;
    bool sampled = false;  // H2 visited only every stride-th parent commit
};

struct ThresholdDerivation {
    std::vector<double> sample_scores;
    double mean = 0;
    double three_sigma = 0;
    double threshold = 0;
    bool fallback = false;  // too few samples; the configured default was used
};

inline constexpr std::size_t kDefaultPrefixProbe = 10;
inline constexpr UnixSeconds kDefaultWindowSecs = 6 * 30 * kSecondsPerDay;
inline constexpr double kDefaultForkThreshold = 0.929;

/// Shared first-parent history. Forked reports carry the last shared commit
/// (fork_commit_child and parent_version), the author time of the first
/// divergent child commit, and the similarity between the child at that
/// commit and the parent at the shared one.
ForkReport heuristic1(const RepoHistory& child, const RepoHistory& parent, std::size_t prefix_probe = kDefaultPrefixProbe,
                      const SimilarityConfig& sim = {}, SimilarityCache* cache = nullptr);

struct Heuristic2Options {
    UnixSeconds window_secs = kDefaultWindowSecs;
    std::size_t stride = 1;
    std::size_t jobs = 1;
    SimilarityConfig similarity;
};

/// Bulk-upload detection. Compares the child's largest file-change commit to
/// every parent commit authored in the closed window before it. Returns verdict
/// Undetermined when that window holds no parent commit.
ForkReport heuristic2(const RepoHistory& child, const RepoHistory& parent, double threshold,
                      const Heuristic2Options& options = {}, SimilarityCache* cache = nullptr);

/// Child commit with the most Added + Modified files (earliest on ties).
const CommitRecord& largest_change_commit(const RepoHistory& history);

/// mean - 3 * population std, clamped at 0. Needs at least two scores.
ThresholdDerivation derive_threshold(std::vector<double> scores);

struct LineageConfig {
    std::size_t prefix_probe = kDefaultPrefixProbe;
    UnixSeconds window_secs = kDefaultWindowSecs;
    std::size_t stride = 1;
    double default_threshold = kDefaultForkThreshold;
    std::size_t jobs = 1;
    SimilarityConfig similarity;
};

struct LineageResult {
    std::vector<ForkReport> reports;  // same order as the children
    ThresholdDerivation threshold;
};

/// H1 on every child, a threshold from the H1 forks, then H2 on the children
/// H1 rejected.
LineageResult lineage_sweep(const std::vector<const RepoHistory*>& children, const RepoHistory& parent,
                            const LineageConfig& cfg = {});

}  // namespace forkscope
