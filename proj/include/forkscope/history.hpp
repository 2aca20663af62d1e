#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace forkscope {

using CommitId = std::string;
using UnixSeconds = std::int64_t;

inline constexpr UnixSeconds kSecondsPerDay = 86400;

enum class ChangeStatus { Added, Modified, Deleted, Renamed };

char status_letter(ChangeStatus s) noexcept;

// One contiguous replaced block. Indices are 0-based line positions;
// old_count lines starting at old_start in the pre-image are replaced by
// new_count lines starting at new_start in the post-image. Context lines are
// unchanged lines adjacent to the block (at most a few, never crossing into a
// neighbouring hunk).
struct Hunk {
    std::size_t old_start = 0;
    std::size_t old_count = 0;
    std::size_t new_start = 0;
    std::size_t new_count = 0;
    std::vector<std::string> context_before;
    std::vector<std::string> context_after;

    friend bool operator==(const Hunk&, const Hunk&) = default;
};

struct FileChange {
    std::string path;
    ChangeStatus status = ChangeStatus::Modified;
    std::string old_path;  // only for Renamed
    bool binary = false;
    std::vector<std::string> added_lines;
    std::vector<std::string> deleted_lines;
    // Positions of the blocks; added_lines/deleted_lines are the concatenation
    // of every hunk's new/old block in order. May be empty for Modified files
    // from sources that do not record positions.
    std::vector<Hunk> hunks;

    friend bool operator==(const FileChange&, const FileChange&) = default;
};

struct CommitRecord {
    CommitId id;
    std::vector<CommitId> parents;
    UnixSeconds author_time = 0;
    std::string author_id;
    std::vector<FileChange> file_changes;

    bool is_merge() const noexcept { return parents.size() > 1; }
    std::size_t added_line_count() const noexcept;
    std::size_t deleted_line_count() const noexcept;

    friend bool operator==(const CommitRecord&, const CommitRecord&) = default;
};

/// Immutable, validated commit graph of one repository. Commits are kept in
/// topological order (parents first); `head` is the last commit.
class RepoHistory {
public:
    RepoHistory() = default;

    /// Validates every invariant (unique ids, known parents unless truncated,
    /// topological order, no cycles, sane paths) and throws Error otherwise.
    static RepoHistory build(std::string repo_id, std::vector<CommitRecord> commits, bool truncated);

    const std::string& repo_id() const noexcept { return repo_id_; }
    const std::vector<CommitRecord>& commits() const noexcept { return commits_; }
    const CommitId& head() const noexcept { return commits_.back().id; }
    bool truncated() const noexcept { return truncated_; }
    bool empty() const noexcept { return commits_.empty(); }
    std::size_t size() const noexcept { return commits_.size(); }

    const CommitRecord* find(const CommitId& id) const noexcept;
    std::optional<std::size_t> index_of(const CommitId& id) const noexcept;
    const CommitRecord& at(const CommitId& id) const;  // UnknownCommit

    /// Parent id that is not part of this history (only legal when truncated).
    bool is_boundary(const CommitId& parent) const noexcept;

    /// Commits from the root (or truncation boundary) to `id`, following first
    /// parents, oldest first.
    std::vector<const CommitRecord*> first_parent_chain(const CommitId& id) const;

    friend bool operator==(const RepoHistory& a, const RepoHistory& b) {
        return a.repo_id_ == b.repo_id_ && a.truncated_ == b.truncated_ && a.commits_ == b.commits_;
    }

private:
    std::string repo_id_;
    std::vector<CommitRecord> commits_;
    bool truncated_ = false;
    std::unordered_map<CommitId, std::size_t> index_;
};

struct IngestLimits {
    std::size_t max_commits = 0;  // keep only the newest N commits; 0 = all
};

/// `source` is either a History Fixture (.json) or a local repository
/// working directory (read through the system `git`).
RepoHistory load_history(const std::filesystem::path& source, const IngestLimits& limits = {});

RepoHistory history_from_json(const nlohmann::json& doc, const IngestLimits& limits = {});
nlohmann::json history_to_json(const RepoHistory& history);
void save_history(const RepoHistory& history, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

struct SnapshotFile {
    std::vector<std::string> lines;
    bool binary = false;

    std::string text() const;
    friend bool operator==(const SnapshotFile&, const SnapshotFile&) = default;
};

using SnapshotTree = std::map<std::string, SnapshotFile>;

/// Applies one commit's changes to `tree` in place (first-parent semantics).
void apply_commit(SnapshotTree& tree, const CommitRecord& commit);
void apply_file_change(SnapshotTree& tree, const FileChange& change);

/// Full file contents at `commit`, replayed from the root along first parents.
SnapshotTree checkout_snapshot(const RepoHistory& history, const CommitId& commit);

/// Memoizing snapshot reconstruction. Replays from the nearest cached
/// first-parent ancestor. Thread-safe.
class SnapshotCache {
public:
    explicit SnapshotCache(const RepoHistory& history, std::size_t capacity = 32);

    std::shared_ptr<const SnapshotTree> get(const CommitId& commit);

private:
    const RepoHistory& history_;
    std::size_t capacity_;
    std::mutex mutex_;
    std::map<CommitId, std::shared_ptr<const SnapshotTree>> cache_;
    std::vector<CommitId> order_;
};

// ---------------------------------------------------------------------------
// Line diff
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultContextLines = 3;

/// Line diff of two file versions as a Modified change with positioned hunks.
FileChange diff_file(const std::string& path, const std::vector<std::string>& before,
                     const std::vector<std::string>& after,
                     std::size_t context = kDefaultContextLines);

/// Changes turning tree `before` into tree `after` (Added/Modified/Deleted,
/// sorted by path).
std::vector<FileChange> diff_trees(const SnapshotTree& before, const SnapshotTree& after,
                                   std::size_t context = kDefaultContextLines);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace forkscope
