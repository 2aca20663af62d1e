#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forkscope/history.hpp"

namespace forkscope {

enum class MatchMode { All, Any };

struct VulnSignature {
    std::string cve_id;
    double cvss = 0;
    std::string category;
    UnixSeconds reference_patch_time = 0;
    std::vector<std::string> vuln_fragments;
    std::vector<std::string> patch_fragments;
    MatchMode match_mode = MatchMode::All;
};

/// Parses `{"signatures": [...]}` and validates every entry.
std::vector<VulnSignature> signatures_from_json(const nlohmann::json& doc);
std::vector<VulnSignature> load_signatures(const std::filesystem::path& path);

enum class VulnStatus { Vulnerable, Patched, NeverPresent };
const char* to_string(VulnStatus s) noexcept;

struct VulnFinding {
    std::string repo_id;
    std::string cve_id;
    VulnStatus status = VulnStatus::NeverPresent;
    std::optional<UnixSeconds> introduced_at;
    std::optional<UnixSeconds> patched_at;
    std::optional<UnixSeconds> time_to_patch_secs;
    std::optional<CommitId> introduced_commit;
    std::optional<CommitId> patched_commit;

    friend bool operator==(const VulnFinding&, const VulnFinding&) = default;
};

/// Removes every Unicode whitespace code point; nothing else changes.
std::string normalize_code(std::string_view text);

struct ScanOptions {
    std::vector<std::string> extensions{".c", ".cc", ".cpp", ".cxx", ".h", ".hpp"};
    std::size_t fallback_file_limit = 30;
};

struct ScanMatch {
    bool matched = false;
    std::vector<std::string> files;  // eligible files holding at least one vulnerable fragment
};

/// Fragments match inside a single file's whitespace-free text.
ScanMatch scan_latest(const SnapshotTree& snapshot, const VulnSignature& sig, const ScanOptions& options = {});

/// Verdict from commit diffs. Per-file fragment occurrence counts are carried
/// along first parents and updated from each hunk's context window; a commit
/// touching more than `fallback_file_limit` files, or whose windows are too
/// narrow to decide, is handled by rebuilding its snapshot.
///
/// introduced_at is the first commit (history order) whose snapshot matches the
/// vulnerable fragments. A repository whose head does not match is Patched at
/// the first commit from there on whose snapshot matches the patch fragments,
/// or else at the first later commit where the vulnerable code is gone.
VulnFinding scan_history(const RepoHistory& history, const VulnSignature& sig, const ScanOptions& options = {});

/// Same verdict, computed by checking out every commit.
VulnFinding scan_history_oracle(const RepoHistory& history, const VulnSignature& sig, const ScanOptions& options = {});

struct PatchTimeStats {
    double median_days = 0;
    double mean_days = 0;
    double std_days = 0;
    double within_16_days_fraction = 0;
    std::size_t count = 0;
};

/// Over Patched findings that carry a time to patch.
PatchTimeStats patch_time_stats(const std::vector<VulnFinding>& findings);

struct CensusRow {
    std::string repo_id;
    std::size_t unpatched_count = 0;
};

/// One row per repository (sorted by id); DuplicateFinding when a repository
/// has two findings for one CVE.
std::vector<CensusRow> vuln_census(const std::vector<VulnFinding>& findings);

/// Number of repositories with at least `t` unpatched findings, per t.
std::vector<std::pair<std::size_t, std::size_t>> census_at_least(const std::vector<CensusRow>& census,
                                                                 const std::vector<std::size_t>& thresholds);

}  // namespace forkscope
