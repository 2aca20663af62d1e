#include "forkscope/history.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "forkscope/error.hpp"
#include "forkscope/io.hpp"

namespace forkscope {

using nlohmann::json;

RepoHistory load_history_from_git(const std::filesystem::path& dir, const IngestLimits& limits);

char status_letter(ChangeStatus s) noexcept {
    switch (s) {
        case ChangeStatus::Added: return 'A';
        case ChangeStatus::Modified: return 'M';
        case ChangeStatus::Deleted: return 'D';
        case ChangeStatus::Renamed: return 'R';
    }
    return '?';
}

std::size_t CommitRecord::added_line_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : file_changes) n += f.added_lines.size();
    return n;
}

std::size_t CommitRecord::deleted_line_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : file_changes) n += f.deleted_lines.size();
    return n;
}

std::string SnapshotFile::text() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::MalformedFixture, "at " + where + ": " + what);
}

bool path_is_safe(const std::string& path) {
    if (path.empty() || path.front() == '/') return false;
    std::size_t start = 0;
    while (start <= path.size()) {
        auto slash = path.find('/', start);
        auto part = path.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
        if (part == ".." || part.empty()) return false;
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    return true;
}

void validate_change(const FileChange& fc, const std::string& where) {
    if (!path_is_safe(fc.path)) malformed(where + "/path", "unsafe or empty path '" + fc.path + "'");
    if (fc.status == ChangeStatus::Added && !fc.deleted_lines.empty())
        malformed(where + "/deleted", "added file carries deleted lines");
    if (fc.status == ChangeStatus::Deleted && !fc.added_lines.empty())
        malformed(where + "/added", "deleted file carries added lines");
    if (fc.status == ChangeStatus::Renamed && !path_is_safe(fc.old_path))
        malformed(where + "/old_path", "rename without a valid old_path");
    if (fc.hunks.empty()) return;
    std::size_t olds = 0, news = 0, prev_old = 0, prev_new = 0;
    for (std::size_t i = 0; i < fc.hunks.size(); ++i) {
        const Hunk& h = fc.hunks[i];
        if (h.old_start < prev_old || h.new_start < prev_new)
            malformed(where + "/hunks/" + std::to_string(i), "hunks out of order");
        prev_old = h.old_start + h.old_count;
        prev_new = h.new_start + h.new_count;
        olds += h.old_count;
        news += h.new_count;
    }
    if (olds != fc.deleted_lines.size() || news != fc.added_lines.size())
        malformed(where + "/hunks", "hunk line counts disagree with added/deleted lists");
}

}  // namespace

RepoHistory RepoHistory::build(std::string repo_id, std::vector<CommitRecord> commits, bool truncated) {
    if (commits.empty()) malformed("/commits", "history has no commits");

    RepoHistory h;
    h.repo_id_ = std::move(repo_id);
    h.truncated_ = truncated;
    h.index_.reserve(commits.size());
    for (std::size_t i = 0; i < commits.size(); ++i) {
        const auto& c = commits[i];
        const std::string where = "/commits/" + std::to_string(i);
        if (c.id.empty()) malformed(where + "/id", "empty commit id");
        if (!h.index_.emplace(c.id, i).second) malformed(where + "/id", "duplicate commit id '" + c.id + "'");
        if (c.author_time <= 0) malformed(where + "/author_time", "author_time must be positive");
        for (std::size_t f = 0; f < c.file_changes.size(); ++f)
            validate_change(c.file_changes[f], where + "/files/" + std::to_string(f));
    }

    // Parent edges: unknown parents are only legal at a truncation boundary.
    std::vector<std::vector<std::size_t>> children(commits.size());
    std::vector<std::size_t> indegree(commits.size(), 0);
    for (std::size_t i = 0; i < commits.size(); ++i) {
        for (std::size_t p = 0; p < commits[i].parents.size(); ++p) {
            const auto& pid = commits[i].parents[p];
            auto it = h.index_.find(pid);
            if (it == h.index_.end()) {
                if (!truncated)
                    malformed("/commits/" + std::to_string(i) + "/parents/" + std::to_string(p),
                              "unknown parent '" + pid + "' in a non-truncated history");
                continue;
            }
            children[it->second].push_back(i);
            ++indegree[i];
        }
    }

    std::queue<std::size_t> ready;
    for (std::size_t i = 0; i < commits.size(); ++i)
        if (indegree[i] == 0) ready.push(i);
    std::size_t visited = 0;
    while (!ready.empty()) {
        auto n = ready.front();
        ready.pop();
        ++visited;
        for (auto child : children[n])
            if (--indegree[child] == 0) ready.push(child);
    }
    if (visited != commits.size()) {
        for (std::size_t i = 0; i < commits.size(); ++i)
            if (indegree[i] > 0) throw Error(ErrorCode::CycleDetected, "commit '" + commits[i].id + "' is part of a cycle");
    }

    for (std::size_t i = 0; i < commits.size(); ++i) {
        for (std::size_t p = 0; p < commits[i].parents.size(); ++p) {
            auto it = h.index_.find(commits[i].parents[p]);
            if (it != h.index_.end() && it->second >= i)
                malformed("/commits/" + std::to_string(i) + "/parents/" + std::to_string(p),
                          "parent '" + commits[i].parents[p] + "' listed after its child");
        }
    }

    h.commits_ = std::move(commits);
    return h;
}

const CommitRecord* RepoHistory::find(const CommitId& id) const noexcept {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &commits_[it->second];
}

std::optional<std::size_t> RepoHistory::index_of(const CommitId& id) const noexcept {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const CommitRecord& RepoHistory::at(const CommitId& id) const {
    const auto* c = find(id);
    if (!c) throw Error(ErrorCode::UnknownCommit, "commit '" + id + "' not in history of " + repo_id_);
    return *c;
}

bool RepoHistory::is_boundary(const CommitId& parent) const noexcept {
    return truncated_ && !index_.count(parent);
}

std::vector<const CommitRecord*> RepoHistory::first_parent_chain(const CommitId& id) const {
    std::vector<const CommitRecord*> chain;
    const CommitRecord* c = &at(id);
    while (true) {
        chain.push_back(c);
        if (c->parents.empty()) break;
        const CommitRecord* p = find(c->parents.front());
        if (!p) break;  // truncation boundary
        c = p;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

// ---------------------------------------------------------------------------
// Fixture format
// ---------------------------------------------------------------------------

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) malformed(where, std::string("missing field '") + key + "'");
    return *it;
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
    if (!v.is_array()) malformed(where, "expected an array of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) malformed(where + "/" + std::to_string(i), "expected a string");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

std::size_t count_field(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        malformed(where + "/" + key, "expected a non-negative integer");
    return v.get<std::size_t>();
}

FileChange change_from_json(const json& f, const std::string& where) {
    if (!f.is_object()) malformed(where, "expected an object");
    FileChange fc;
    const json& path = require(f, "path", where);
    if (!path.is_string()) malformed(where + "/path", "expected a string");
    fc.path = path.get<std::string>();

    const json& status = require(f, "status", where);
    std::string s = status.is_string() ? status.get<std::string>() : std::string{};
    if (s == "A") fc.status = ChangeStatus::Added;
    else if (s == "M") fc.status = ChangeStatus::Modified;
    else if (s == "D") fc.status = ChangeStatus::Deleted;
    else if (s == "R") fc.status = ChangeStatus::Renamed;
    else malformed(where + "/status", "status must be one of A, M, D, R");

    if (auto it = f.find("old_path"); it != f.end()) {
        if (!it->is_string()) malformed(where + "/old_path", "expected a string");
        fc.old_path = it->get<std::string>();
    }
    if (auto it = f.find("binary"); it != f.end()) {
        if (!it->is_boolean()) malformed(where + "/binary", "expected a boolean");
        fc.binary = it->get<bool>();
    }
    fc.added_lines = string_list(require(f, "added", where), where + "/added");
    fc.deleted_lines = string_list(require(f, "deleted", where), where + "/deleted");

    if (auto it = f.find("hunks"); it != f.end()) {
        if (!it->is_array()) malformed(where + "/hunks", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string hw = where + "/hunks/" + std::to_string(i);
            const json& hj = (*it)[i];
            if (!hj.is_object()) malformed(hw, "expected an object");
            Hunk h;
            h.old_start = count_field(hj, "old_start", hw);
            h.old_count = count_field(hj, "old_count", hw);
            h.new_start = count_field(hj, "new_start", hw);
            h.new_count = count_field(hj, "new_count", hw);
            if (auto b = hj.find("before"); b != hj.end()) h.context_before = string_list(*b, hw + "/before");
            if (auto a = hj.find("after"); a != hj.end()) h.context_after = string_list(*a, hw + "/after");
            fc.hunks.push_back(std::move(h));
        }
    }
    return fc;
}

json change_to_json(const FileChange& fc) {
    json f = json::object();
    f["path"] = fc.path;
    f["status"] = std::string(1, status_letter(fc.status));
    if (fc.status == ChangeStatus::Renamed) f["old_path"] = fc.old_path;
    if (fc.binary) f["binary"] = true;
    f["added"] = fc.added_lines;
    f["deleted"] = fc.deleted_lines;
    if (!fc.hunks.empty()) {
        json hunks = json::array();
        for (const auto& h : fc.hunks) {
            hunks.push_back({{"old_start", h.old_start},
                             {"old_count", h.old_count},
                             {"new_start", h.new_start},
                             {"new_count", h.new_count},
                             {"before", h.context_before},
                             {"after", h.context_after}});
        }
        f["hunks"] = std::move(hunks);
    }
    return f;
}

// Drops the oldest commits so that at most `max_commits` remain.
void apply_limits(std::vector<CommitRecord>& commits, bool& truncated, const IngestLimits& limits) {
    if (limits.max_commits == 0 || commits.size() <= limits.max_commits) return;
    commits.erase(commits.begin(), commits.end() - static_cast<std::ptrdiff_t>(limits.max_commits));
    truncated = true;
}

}  // namespace

RepoHistory history_from_json(const json& doc, const IngestLimits& limits) {
    if (!doc.is_object()) malformed("", "fixture root must be an object");
    const json& repo = require(doc, "repo_id", "");
    if (!repo.is_string()) malformed("/repo_id", "expected a string");

    bool truncated = false;
    if (auto it = doc.find("truncated"); it != doc.end()) {
        if (!it->is_boolean()) malformed("/truncated", "expected a boolean");
        truncated = it->get<bool>();
    }

    const json& cj = require(doc, "commits", "");
    if (!cj.is_array()) malformed("/commits", "expected an array");
    std::vector<CommitRecord> commits;
    commits.reserve(cj.size());
    for (std::size_t i = 0; i < cj.size(); ++i) {
        const std::string where = "/commits/" + std::to_string(i);
        const json& c = cj[i];
        if (!c.is_object()) malformed(where, "expected an object");
        CommitRecord rec;
        const json& id = require(c, "id", where);
        if (!id.is_string()) malformed(where + "/id", "expected a string");
        rec.id = id.get<std::string>();
        rec.parents = string_list(require(c, "parents", where), where + "/parents");
        const json& t = require(c, "author_time", where);
        if (!t.is_number_integer()) malformed(where + "/author_time", "expected an integer");
        rec.author_time = t.get<UnixSeconds>();
        const json& author = require(c, "author_id", where);
        if (!author.is_string()) malformed(where + "/author_id", "expected a string");
        rec.author_id = author.get<std::string>();
        const json& files = require(c, "files", where);
        if (!files.is_array()) malformed(where + "/files", "expected an array");
        for (std::size_t f = 0; f < files.size(); ++f)
            rec.file_changes.push_back(change_from_json(files[f], where + "/files/" + std::to_string(f)));
        commits.push_back(std::move(rec));
    }
    apply_limits(commits, truncated, limits);
    return RepoHistory::build(repo.get<std::string>(), std::move(commits), truncated);
}

json history_to_json(const RepoHistory& history) {
    json commits = json::array();
    for (const auto& c : history.commits()) {
        json files = json::array();
        for (const auto& fc : c.file_changes) files.push_back(change_to_json(fc));
        commits.push_back({{"id", c.id},
                           {"parents", c.parents},
                           {"author_time", c.author_time},
                           {"author_id", c.author_id},
                           {"files", std::move(files)}});
    }
    return {{"repo_id", history.repo_id()}, {"truncated", history.truncated()}, {"commits", std::move(commits)}};
}

void save_history(const RepoHistory& history, const std::filesystem::path& path) {
    write_file_atomic(path, history_to_json(history).dump(1) + "\n");
}

RepoHistory load_history(const std::filesystem::path& source, const IngestLimits& limits) {
    std::error_code ec;
    if (std::filesystem::is_directory(source, ec)) return load_history_from_git(source, limits);
    if (!std::filesystem::is_regular_file(source, ec))
        throw Error(ErrorCode::UnreadableSource, "'" + source.string() + "' is neither a fixture file nor a directory");

    std::ifstream in(source, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open '" + source.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedFixture, "at /: " + std::string(e.what()));
    }
    return history_from_json(doc, limits);
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void bad_replay(const FileChange& fc, const std::string& what) {
    throw Error(ErrorCode::MalformedFixture, "cannot apply change to '" + fc.path + "': " + what);
}

void check_range(const std::vector<std::string>& lines, std::size_t start, const std::vector<std::string>& expect,
                 const FileChange& fc, const char* what) {
    if (start + expect.size() > lines.size() ||
        !std::equal(expect.begin(), expect.end(), lines.begin() + static_cast<std::ptrdiff_t>(start)))
        bad_replay(fc, std::string(what) + " does not match the pre-image");
}

void apply_hunks(std::vector<std::string>& lines, const FileChange& fc) {
    if (fc.hunks.empty()) {
        if (fc.deleted_lines.empty()) {
            lines.insert(lines.end(), fc.added_lines.begin(), fc.added_lines.end());
            return;
        }
        // Unpositioned change: replace the first occurrence of the deleted block.
        auto it = std::search(lines.begin(), lines.end(), fc.deleted_lines.begin(), fc.deleted_lines.end());
        if (it == lines.end()) bad_replay(fc, "deleted block not found");
        it = lines.erase(it, it + static_cast<std::ptrdiff_t>(fc.deleted_lines.size()));
        lines.insert(it, fc.added_lines.begin(), fc.added_lines.end());
        return;
    }

    std::vector<std::string> out;
    out.reserve(lines.size() + fc.added_lines.size());
    std::size_t cursor = 0, del = 0, add = 0;
    for (const Hunk& h : fc.hunks) {
        if (h.old_start < cursor || h.old_start + h.old_count > lines.size()) bad_replay(fc, "hunk out of range");
        if (h.old_start < h.context_before.size()) bad_replay(fc, "context before runs past file start");
        out.insert(out.end(), lines.begin() + static_cast<std::ptrdiff_t>(cursor),
                   lines.begin() + static_cast<std::ptrdiff_t>(h.old_start));
        if (out.size() != h.new_start) bad_replay(fc, "hunk new_start disagrees with replay position");
        check_range(lines, h.old_start - h.context_before.size(), h.context_before, fc, "context before");
        std::vector<std::string> removed(fc.deleted_lines.begin() + static_cast<std::ptrdiff_t>(del),
                                         fc.deleted_lines.begin() + static_cast<std::ptrdiff_t>(del + h.old_count));
        check_range(lines, h.old_start, removed, fc, "deleted block");
        check_range(lines, h.old_start + h.old_count, h.context_after, fc, "context after");
        out.insert(out.end(), fc.added_lines.begin() + static_cast<std::ptrdiff_t>(add),
                   fc.added_lines.begin() + static_cast<std::ptrdiff_t>(add + h.new_count));
        del += h.old_count;
        add += h.new_count;
        cursor = h.old_start + h.old_count;
    }
    out.insert(out.end(), lines.begin() + static_cast<std::ptrdiff_t>(cursor), lines.end());
    lines = std::move(out);
}

}  // namespace

void apply_file_change(SnapshotTree& tree, const FileChange& fc) {
    switch (fc.status) {
        case ChangeStatus::Added: {
            if (tree.count(fc.path)) bad_replay(fc, "added over an existing file");
            SnapshotFile file;
            file.binary = fc.binary;
            if (!fc.binary) file.lines = fc.added_lines;
            tree.emplace(fc.path, std::move(file));
            return;
        }
        case ChangeStatus::Deleted:
            if (!tree.erase(fc.path)) bad_replay(fc, "deleted file does not exist");
            return;
        case ChangeStatus::Renamed: {
            auto node = tree.extract(fc.old_path);
            if (node.empty()) bad_replay(fc, "rename source '" + fc.old_path + "' does not exist");
            if (tree.count(fc.path)) bad_replay(fc, "rename target already exists");
            node.key() = fc.path;
            tree.insert(std::move(node));
            break;
        }
        case ChangeStatus::Modified:
            if (!tree.count(fc.path)) bad_replay(fc, "modified file does not exist");
            break;
    }
    SnapshotFile& file = tree.at(fc.path);
    if (fc.binary) {
        file.binary = true;
        file.lines.clear();
        return;
    }
    file.binary = false;
    if (fc.added_lines.empty() && fc.deleted_lines.empty()) return;
    apply_hunks(file.lines, fc);
}

void apply_commit(SnapshotTree& tree, const CommitRecord& commit) {
    for (const auto& fc : commit.file_changes) apply_file_change(tree, fc);
}

namespace {

std::vector<const CommitRecord*> replay_chain(const RepoHistory& history, const CommitId& commit) {
    auto chain = history.first_parent_chain(commit);
    const CommitRecord* root = chain.front();
    if (!root->parents.empty())
        throw Error(ErrorCode::TruncatedAncestry, "reconstructing '" + commit + "' in " + history.repo_id() +
                                                      " crosses the truncation boundary at '" + root->id + "'");
    return chain;
}

}  // namespace

SnapshotTree checkout_snapshot(const RepoHistory& history, const CommitId& commit) {
    SnapshotTree tree;
    for (const CommitRecord* c : replay_chain(history, commit)) apply_commit(tree, *c);
    return tree;
}

SnapshotCache::SnapshotCache(const RepoHistory& history, std::size_t capacity)
    : history_(history), capacity_(std::max<std::size_t>(capacity, 1)) {}

std::shared_ptr<const SnapshotTree> SnapshotCache::get(const CommitId& commit) {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(commit); it != cache_.end()) return it->second;

    auto chain = replay_chain(history_, commit);
    SnapshotTree tree;
    std::size_t start = 0;
    for (std::size_t i = chain.size(); i-- > 0;) {
        if (auto it = cache_.find(chain[i]->id); it != cache_.end()) {
            tree = *it->second;
            start = i + 1;
            break;
        }
    }
    for (std::size_t i = start; i < chain.size(); ++i) apply_commit(tree, *chain[i]);

    auto result = std::make_shared<const SnapshotTree>(std::move(tree));
    cache_.emplace(commit, result);
    order_.push_back(commit);
    if (order_.size() > capacity_) {
        cache_.erase(order_.front());
        order_.erase(order_.begin());
    }
    return result;
}

}  // namespace forkscope
