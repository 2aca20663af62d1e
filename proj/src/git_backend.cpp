// Local repository ingest through the `git` command line tool.

#include <array>
#include <cstdio>
#include <optional>
#include <unordered_set>
#include <sys/wait.h>

#include <spdlog/spdlog.h>

#include "forkscope/error.hpp"
#include "forkscope/history.hpp"

namespace forkscope {

namespace {

struct CommandResult {
    int status = -1;
    std::string output;
};

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += '\'';
    return out;
}

CommandResult run_command(const std::string& cmd) {
    CommandResult result;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return result;
    std::array<char, 1 << 16> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
    int raw = ::pclose(pipe);
    result.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return result;
}

struct PendingLine {
    char tag;
    std::string text;
};

// Splits one unified-diff hunk into blocks of consecutive +/- lines, each
// with its own bounded context.
void split_hunk(FileChange& fc, const std::vector<PendingLine>& lines, std::size_t old_pos, std::size_t new_pos) {
    std::size_t i = 0;
    std::vector<std::string> recent_context;
    while (i < lines.size()) {
        if (lines[i].tag == ' ') {
            recent_context.push_back(lines[i].text);
            ++old_pos;
            ++new_pos;
            ++i;
            continue;
        }
        Hunk h;
        h.old_start = old_pos;
        h.new_start = new_pos;
        std::size_t keep = std::min(recent_context.size(), kDefaultContextLines);
        h.context_before.assign(recent_context.end() - static_cast<std::ptrdiff_t>(keep), recent_context.end());
        while (i < lines.size() && lines[i].tag != ' ') {
            if (lines[i].tag == '-') {
                fc.deleted_lines.push_back(lines[i].text);
                ++h.old_count;
                ++old_pos;
            } else {
                fc.added_lines.push_back(lines[i].text);
                ++h.new_count;
                ++new_pos;
            }
            ++i;
        }
        for (std::size_t j = i; j < lines.size() && lines[j].tag == ' ' && h.context_after.size() < kDefaultContextLines;
             ++j)
            h.context_after.push_back(lines[j].text);
        fc.hunks.push_back(std::move(h));
        recent_context.clear();
    }
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& spec) {
    auto comma = spec.find(',');
    std::size_t start = std::stoul(spec.substr(0, comma));
    std::size_t count = comma == std::string::npos ? 1 : std::stoul(spec.substr(comma + 1));
    return {start, count};
}

class LogParser {
public:
    std::vector<CommitRecord> commits;

    void feed(const std::string& line) {
        if (!line.empty() && line[0] == '\x01') {
            finish_file();
            start_commit(line.substr(1));
            return;
        }
        if (in_hunk()) {
            hunk_line(line);
            return;
        }
        if (line.rfind("diff --git ", 0) == 0) {
            finish_file();
            file_ = FileChange{};
            file_->status = ChangeStatus::Modified;
            // "diff --git a/X b/X": the exact split is refined by ---/+++ or rename lines.
            auto body = line.substr(11);
            auto mid = body.find(" b/");
            if (mid != std::string::npos) file_->path = body.substr(mid + 3);
            return;
        }
        if (!file_) return;
        if (line.rfind("new file mode", 0) == 0) file_->status = ChangeStatus::Added;
        else if (line.rfind("deleted file mode", 0) == 0) file_->status = ChangeStatus::Deleted;
        else if (line.rfind("rename from ", 0) == 0) {
            file_->status = ChangeStatus::Renamed;
            file_->old_path = line.substr(12);
        } else if (line.rfind("rename to ", 0) == 0) file_->path = line.substr(10);
        else if (line.rfind("Binary files ", 0) == 0) file_->binary = true;
        else if (line.rfind("--- ", 0) == 0) {
            if (line != "--- /dev/null" && line.size() > 6 && file_->status == ChangeStatus::Deleted)
                file_->path = line.substr(6);
        } else if (line.rfind("+++ ", 0) == 0) {
            if (line != "+++ /dev/null" && line.size() > 6) file_->path = line.substr(6);
        } else if (line.rfind("@@ -", 0) == 0) {
            start_hunk(line);
        }
    }

    void finish() { finish_file(); }

private:
    std::optional<FileChange> file_;
    std::vector<PendingLine> hunk_;
    std::size_t old_remaining_ = 0, new_remaining_ = 0, old_pos_ = 0, new_pos_ = 0;

    bool in_hunk() const { return old_remaining_ > 0 || new_remaining_ > 0; }

    void start_commit(const std::string& header) {
        CommitRecord c;
        std::array<std::string, 4> fields;
        std::size_t f = 0, start = 0;
        for (std::size_t i = 0; i <= header.size() && f < fields.size(); ++i) {
            if (i == header.size() || header[i] == '\x02') {
                fields[f++] = header.substr(start, i - start);
                start = i + 1;
            }
        }
        c.id = fields[0];
        std::size_t p = 0;
        while (p < fields[1].size()) {
            auto sp = fields[1].find(' ', p);
            auto id = fields[1].substr(p, sp == std::string::npos ? std::string::npos : sp - p);
            if (!id.empty()) c.parents.push_back(id);
            if (sp == std::string::npos) break;
            p = sp + 1;
        }
        c.author_time = fields[2].empty() ? 0 : std::stoll(fields[2]);
        c.author_id = fields[3];
        commits.push_back(std::move(c));
    }

    void start_hunk(const std::string& line) {
        // @@ -a,b +c,d @@
        auto minus = line.find('-');
        auto plus = line.find(" +", minus);
        auto end = line.find(" @@", plus);
        auto [a, b] = parse_range(line.substr(minus + 1, plus - minus - 1));
        auto [c, d] = parse_range(line.substr(plus + 2, end - plus - 2));
        old_pos_ = b == 0 ? a : a - 1;
        new_pos_ = d == 0 ? c : c - 1;
        old_remaining_ = b;
        new_remaining_ = d;
        hunk_.clear();
    }

    void hunk_line(const std::string& line) {
        if (line.empty()) {
            // Some tools strip the single space of empty context lines.
            hunk_.push_back({' ', ""});
            --old_remaining_;
            --new_remaining_;
        } else if (line[0] == '\\') {
            return;
        } else {
            char tag = line[0];
            hunk_.push_back({tag, line.substr(1)});
            if (tag != '+') --old_remaining_;
            if (tag != '-') --new_remaining_;
        }
        if (!in_hunk()) split_hunk(*file_, hunk_, old_pos_, new_pos_);
    }

    void finish_file() {
        if (!file_) return;
        if (file_->status != ChangeStatus::Modified && file_->status != ChangeStatus::Renamed) file_->hunks.clear();
        if (!commits.empty()) commits.back().file_changes.push_back(std::move(*file_));
        file_.reset();
    }
};

}  // namespace

RepoHistory load_history_from_git(const std::filesystem::path& dir, const IngestLimits& limits) {
    auto probe = run_command("git --version 2>/dev/null");
    if (probe.status != 0)
        throw Error(ErrorCode::UnreadableSource,
                    "the `git` executable was not found; install git or export the history to a fixture file");

    const std::string git = "git -c core.quotePath=false -C " + shell_quote(dir.string());
    auto top = run_command(git + " rev-parse --is-inside-work-tree 2>/dev/null");
    if (top.status != 0) throw Error(ErrorCode::UnreadableSource, "'" + dir.string() + "' is not a git repository");

    std::string cmd = git +
                      " log --reverse --topo-order --no-color --no-ext-diff -M --diff-merges=first-parent -U3"
                      " --format=%x01%H%x02%P%x02%at%x02%ae -p";
    if (limits.max_commits > 0) cmd += " -n " + std::to_string(limits.max_commits);
    cmd += " HEAD 2>/dev/null";
    auto log = run_command(cmd);
    if (log.status != 0) throw Error(ErrorCode::UnreadableSource, "git log failed in '" + dir.string() + "'");

    LogParser parser;
    std::size_t start = 0;
    while (start < log.output.size()) {
        auto nl = log.output.find('\n', start);
        if (nl == std::string::npos) nl = log.output.size();
        parser.feed(log.output.substr(start, nl - start));
        start = nl + 1;
    }
    parser.finish();

    std::unordered_set<std::string> ids;
    for (const auto& c : parser.commits) ids.insert(c.id);
    bool truncated = false;
    for (const auto& c : parser.commits)
        for (const auto& p : c.parents)
            if (!ids.count(p)) truncated = true;
    if (truncated) spdlog::debug("{}: history truncated (shallow clone or commit limit)", dir.string());

    auto name = std::filesystem::weakly_canonical(dir).filename().string();
    return RepoHistory::build(name, std::move(parser.commits), truncated);
}

}  // namespace forkscope
