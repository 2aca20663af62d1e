#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "forkscope/history.hpp"

namespace fixtures {

using forkscope::CommitId;
using forkscope::CommitRecord;
using forkscope::RepoHistory;
using forkscope::SnapshotTree;
using forkscope::UnixSeconds;

SnapshotTree tree(std::initializer_list<std::pair<std::string, std::string>> files);
SnapshotTree tree(const std::vector<std::pair<std::string, std::string>>& files);

// Linear (or hand-wired) history whose diffs are computed from full trees.
class Builder {
public:
    explicit Builder(std::string repo_id) : repo_id_(std::move(repo_id)) {}

    // Continue from commits copied out of another history, with `tree` being
    // the snapshot at the last copied commit.
    Builder& adopt(const std::vector<CommitRecord>& commits, SnapshotTree tree);

    Builder& commit(const CommitId& id, UnixSeconds time, const SnapshotTree& after, const std::string& author = "alice");
    Builder& commit_with_parents(const CommitId& id, UnixSeconds time, const SnapshotTree& after,
                                 std::vector<CommitId> parents, const std::string& author = "alice");

    Builder& put(const std::string& path, const std::string& text);
    Builder& erase(const std::string& path);
    Builder& commit_staged(const CommitId& id, UnixSeconds time, const std::string& author = "alice");

    const SnapshotTree& current() const { return tree_; }
    const std::vector<CommitRecord>& commits() const { return commits_; }
    RepoHistory build(bool truncated = false) const;

private:
    std::string repo_id_;
    std::vector<CommitRecord> commits_;
    SnapshotTree tree_;
    SnapshotTree staged_;
    std::map<CommitId, SnapshotTree> trees_;
    bool staging_ = false;
};

// Deterministic pseudo C source of roughly `functions` functions.
std::string c_source(std::mt19937_64& rng, std::size_t functions, const std::string& prefix = "f");

// Same text with every identifier replaced through a bijective rename.
std::string rename_identifiers(const std::string& source, const std::string& suffix);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fixtures
