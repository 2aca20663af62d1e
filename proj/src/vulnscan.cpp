#include "forkscope/vulnscan.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>

#include "forkscope/analytics.hpp"
#include "forkscope/error.hpp"
#include "forkscope/io.hpp"
#include "forkscope/similarity.hpp"

namespace forkscope {

using nlohmann::json;

namespace {

// Byte length of the whitespace code point starting at s[i], or 0.
std::size_t whitespace_at(std::string_view s, std::size_t i) {
    auto b = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u; };
    const unsigned c = b(0);
    if (c == ' ' || (c >= 0x09 && c <= 0x0D)) return 1;
    if (c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
    if (c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;
    if (c == 0xE2 && b(1) == 0x80 && ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF))
        return 3;
    if (c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;
    if (c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;
    return 0;
}

std::uint32_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::uint32_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

struct Fragments {
    std::vector<std::string> text;  // normalized, unique
    std::vector<std::size_t> vuln;
    std::vector<std::size_t> patch;
    MatchMode mode = MatchMode::All;

    explicit Fragments(const VulnSignature& sig) : mode(sig.match_mode) {
        auto index = [&](const std::string& raw) {
            std::string n = normalize_code(raw);
            auto it = std::find(text.begin(), text.end(), n);
            if (it != text.end()) return static_cast<std::size_t>(it - text.begin());
            text.push_back(std::move(n));
            return text.size() - 1;
        };
        for (const auto& f : sig.vuln_fragments) vuln.push_back(index(f));
        for (const auto& f : sig.patch_fragments) patch.push_back(index(f));
    }

    template <typename Present>
    bool matches(const std::vector<std::size_t>& set, Present present) const {
        if (set.empty()) return false;
        if (mode == MatchMode::All) return std::all_of(set.begin(), set.end(), present);
        return std::any_of(set.begin(), set.end(), present);
    }
};

// Fragment presence of a whole snapshot, file by file.
std::vector<bool> snapshot_presence(const SnapshotTree& tree, const Fragments& fr, const ScanOptions& options,
                                    std::vector<std::string>* files_with_vuln = nullptr) {
    std::vector<bool> present(fr.text.size(), false);
    for (const auto& [path, file] : tree) {
        if (file.binary || !is_eligible(path, options.extensions)) continue;
        const std::string norm = normalize_code(file.text());
        bool listed = false;
        for (std::size_t f = 0; f < fr.text.size(); ++f) {
            if (norm.find(fr.text[f]) == std::string::npos) continue;
            present[f] = true;
            if (files_with_vuln && !listed && std::find(fr.vuln.begin(), fr.vuln.end(), f) != fr.vuln.end()) {
                files_with_vuln->push_back(path);
                listed = true;
            }
        }
    }
    return present;
}

// ---------------------------------------------------------------------------
// Diff-driven state
// ---------------------------------------------------------------------------

using Lines = std::vector<std::string>;

struct FileState {
    std::size_t lines = 0;
    bool binary = false;
    std::vector<std::uint32_t> counts;  // occurrences of each fragment in the normalized text
    std::shared_ptr<const Lines> text;
};

FileState state_from_lines(std::shared_ptr<const Lines> text, const Fragments& fr) {
    std::string norm;
    for (const auto& l : *text) norm += normalize_code(l);
    FileState s;
    s.lines = text->size();
    for (const auto& f : fr.text) s.counts.push_back(count_occurrences(norm, f));
    s.text = std::move(text);
    return s;
}

FileState state_from_lines(const Lines& lines, const Fragments& fr) {
    return state_from_lines(std::make_shared<const Lines>(lines), fr);
}

FileState binary_state(const Fragments& fr) {
    FileState s;
    s.binary = true;
    s.counts.assign(fr.text.size(), 0);
    s.text = std::make_shared<const Lines>();
    return s;
}

struct RepoState {
    std::map<std::string, FileState> files;
    std::vector<std::uint32_t> holders;  // files containing each fragment

    void erase(const std::string& path) {
        auto it = files.find(path);
        if (it == files.end()) return;
        for (std::size_t f = 0; f < holders.size(); ++f)
            if (it->second.counts[f]) --holders[f];
        files.erase(it);
    }

    void set(const std::string& path, FileState s) {
        erase(path);
        for (std::size_t f = 0; f < holders.size(); ++f)
            if (s.counts[f]) ++holders[f];
        files.emplace(path, std::move(s));
    }
};

struct Site {
    std::size_t start;
    std::size_t count;
};

struct KnownLines {
    std::map<std::size_t, const std::string*> lines;
    bool conflict = false;

    void put(std::size_t index, const std::string& text) {
        auto [it, inserted] = lines.emplace(index, &text);
        if (!inserted && *it->second != text) conflict = true;
    }
};

// Occurrences that overlap a changed block, per fragment. Returns nullopt when
// some window is too narrow to contain every such occurrence.
std::optional<std::vector<std::uint32_t>> overlapping(const KnownLines& known, const std::vector<Site>& sites,
                                                      std::size_t total_lines, const Fragments& fr) {
    struct Run {
        std::size_t first = 0, end = 0;
        std::vector<const std::string*> lines;
        std::vector<Site> sites;
    };
    std::vector<Run> runs;
    for (const auto& [index, text] : known.lines) {
        if (runs.empty() || runs.back().end != index) runs.push_back({index, index, {}, {}});
        runs.back().lines.push_back(text);
        runs.back().end = index + 1;
    }
    for (const Site& s : sites) {
        auto it = std::find_if(runs.begin(), runs.end(),
                               [&](const Run& r) { return r.first <= s.start && s.start + s.count <= r.end; });
        if (it == runs.end()) {
            Run empty;
            empty.first = empty.end = s.start;
            runs.push_back(empty);
            it = runs.end() - 1;
        }
        it->sites.push_back(s);
    }

    std::vector<std::uint32_t> out(fr.text.size(), 0);
    for (const Run& r : runs) {
        if (r.sites.empty()) continue;
        std::string text;
        std::vector<std::size_t> offset;
        for (const auto* l : r.lines) {
            offset.push_back(text.size());
            text += normalize_code(*l);
        }
        offset.push_back(text.size());
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (const Site& s : r.sites) spans.emplace_back(offset[s.start - r.first], offset[s.start + s.count - r.first]);
        std::sort(spans.begin(), spans.end());
        const std::size_t before = spans.front().first;
        std::size_t last_end = 0;
        for (const auto& sp : spans) last_end = std::max(last_end, sp.second);
        const std::size_t after = text.size() - last_end;

        for (std::size_t f = 0; f < fr.text.size(); ++f) {
            const std::size_t len = fr.text[f].size();
            if ((r.first != 0 && before + 1 < len) || (r.end != total_lines && after + 1 < len)) return std::nullopt;
            for (auto pos = text.find(fr.text[f]); pos != std::string::npos; pos = text.find(fr.text[f], pos + 1)) {
                const bool hits = std::any_of(spans.begin(), spans.end(), [&](const auto& sp) {
                    return pos < sp.second && pos + len > sp.first;
                });
                if (hits) ++out[f];
            }
        }
    }
    return out;
}

std::optional<FileState> apply_hunks_to_state(const FileState& old, const FileChange& fc, const Fragments& fr) {
    if (fc.hunks.empty()) return std::nullopt;  // positions unknown
    KnownLines old_known, new_known;
    std::vector<Site> old_sites, new_sites;
    std::size_t cursor = 0, del = 0, add = 0;
    for (const Hunk& h : fc.hunks) {
        const std::size_t cb = h.context_before.size(), ca = h.context_after.size();
        if (h.old_start < cursor || h.old_start < cb || h.old_start + h.old_count + ca > old.lines) return std::nullopt;
        if (del + h.old_count > fc.deleted_lines.size() || add + h.new_count > fc.added_lines.size()) return std::nullopt;
        if (h.new_start != h.old_start + add - del || h.new_start < cb) return std::nullopt;
        for (std::size_t i = 0; i < cb; ++i) {
            old_known.put(h.old_start - cb + i, h.context_before[i]);
            new_known.put(h.new_start - cb + i, h.context_before[i]);
        }
        for (std::size_t i = 0; i < h.old_count; ++i) old_known.put(h.old_start + i, fc.deleted_lines[del + i]);
        for (std::size_t i = 0; i < h.new_count; ++i) new_known.put(h.new_start + i, fc.added_lines[add + i]);
        for (std::size_t i = 0; i < ca; ++i) {
            old_known.put(h.old_start + h.old_count + i, h.context_after[i]);
            new_known.put(h.new_start + h.new_count + i, h.context_after[i]);
        }
        old_sites.push_back({h.old_start, h.old_count});
        new_sites.push_back({h.new_start, h.new_count});
        del += h.old_count;
        add += h.new_count;
        cursor = h.old_start + h.old_count;
    }
    if (del != fc.deleted_lines.size() || add != fc.added_lines.size()) return std::nullopt;
    if (old_known.conflict || new_known.conflict) return std::nullopt;
    const std::size_t new_total = old.lines - del + add;
    if (!new_known.lines.empty() && new_known.lines.rbegin()->first >= new_total) return std::nullopt;

    auto destroyed = overlapping(old_known, old_sites, old.lines, fr);
    if (!destroyed) return std::nullopt;
    auto created = overlapping(new_known, new_sites, new_total, fr);
    if (!created) return std::nullopt;

    FileState s = old;
    s.lines = new_total;
    s.binary = false;
    for (std::size_t f = 0; f < s.counts.size(); ++f) {
        if ((*destroyed)[f] > s.counts[f]) return std::nullopt;
        s.counts[f] = s.counts[f] - (*destroyed)[f] + (*created)[f];
    }
    return s;
}

// Replays the change on this one file's text.
std::optional<Lines> replay_file(const FileState& s, const FileChange& fc) {
    if (!s.text) return std::nullopt;
    const std::string& key = fc.status == ChangeStatus::Renamed ? fc.old_path : fc.path;
    SnapshotTree one;
    one.emplace(key, SnapshotFile{*s.text, s.binary});
    try {
        apply_file_change(one, fc);
    } catch (const Error&) {
        return std::nullopt;
    }
    return std::move(one.at(fc.path).lines);
}

std::optional<FileState> apply_content(FileState s, const FileChange& fc, const Fragments& fr) {
    if (fc.binary) return binary_state(fr);
    if (fc.added_lines.empty() && fc.deleted_lines.empty()) {
        s.binary = false;
        return s;
    }
    auto lines = replay_file(s, fc);
    if (!lines) return std::nullopt;
    auto text = std::make_shared<const Lines>(std::move(*lines));
    if (auto next = apply_hunks_to_state(s, fc, fr)) {
        next->text = std::move(text);
        return next;
    }
    return state_from_lines(std::move(text), fr);
}

// Next state from the first parent's state and the commit's diff, or nullopt
// when the diff alone cannot decide.
std::optional<RepoState> advance(RepoState state, const CommitRecord& commit, const Fragments& fr,
                                 const ScanOptions& options) {
    if (commit.file_changes.size() > options.fallback_file_limit) return std::nullopt;
    for (const FileChange& fc : commit.file_changes) {
        const bool eligible = is_eligible(fc.path, options.extensions);
        switch (fc.status) {
            case ChangeStatus::Added:
                if (eligible) state.set(fc.path, fc.binary ? binary_state(fr) : state_from_lines(fc.added_lines, fr));
                break;
            case ChangeStatus::Deleted:
                state.erase(fc.path);
                break;
            case ChangeStatus::Renamed: {
                std::optional<FileState> source;
                if (is_eligible(fc.old_path, options.extensions)) {
                    auto it = state.files.find(fc.old_path);
                    if (it == state.files.end()) return std::nullopt;
                    source = it->second;
                    state.erase(fc.old_path);
                }
                if (!eligible) break;
                if (!source) return std::nullopt;  // content of an untracked file
                auto next = apply_content(std::move(*source), fc, fr);
                if (!next) return std::nullopt;
                state.set(fc.path, std::move(*next));
                break;
            }
            case ChangeStatus::Modified: {
                if (!eligible) break;
                auto it = state.files.find(fc.path);
                if (it == state.files.end()) return std::nullopt;
                auto next = apply_content(it->second, fc, fr);
                if (!next) return std::nullopt;
                state.set(fc.path, std::move(*next));
                break;
            }
        }
    }
    return state;
}

RepoState state_from_snapshot(const SnapshotTree& tree, const Fragments& fr, const ScanOptions& options) {
    RepoState s;
    s.holders.assign(fr.text.size(), 0);
    for (const auto& [path, file] : tree) {
        if (!is_eligible(path, options.extensions)) continue;
        s.set(path, file.binary ? binary_state(fr) : state_from_lines(file.lines, fr));
    }
    return s;
}

VulnFinding decide(const RepoHistory& history, const VulnSignature& sig, const std::vector<bool>& vuln,
                   const std::vector<bool>& patch) {
    const auto& commits = history.commits();
    VulnFinding out;
    out.repo_id = history.repo_id();
    out.cve_id = sig.cve_id;
    out.status = VulnStatus::NeverPresent;

    auto first = std::find(vuln.begin(), vuln.end(), true);
    if (first == vuln.end()) return out;
    const auto intro = static_cast<std::size_t>(first - vuln.begin());
    out.introduced_at = commits[intro].author_time;
    out.introduced_commit = commits[intro].id;
    if (vuln.back()) {
        out.status = VulnStatus::Vulnerable;
        return out;
    }

    std::size_t fix = commits.size();
    for (std::size_t i = intro; i < commits.size() && fix == commits.size(); ++i)
        if (patch[i]) fix = i;
    for (std::size_t i = intro + 1; i < commits.size() && fix == commits.size(); ++i)
        if (!vuln[i]) fix = i;
    out.status = VulnStatus::Patched;
    out.patched_at = commits[fix].author_time;
    out.patched_commit = commits[fix].id;
    out.time_to_patch_secs = *out.patched_at - sig.reference_patch_time;
    return out;
}

[[noreturn]] void truncated(const RepoHistory& history, const CommitRecord& c) {
    throw Error(ErrorCode::TruncatedAncestry, "reconstructing '" + c.id + "' in " + history.repo_id() +
                                                  " crosses the truncation boundary at '" + c.id + "'");
}

std::string pointer(std::size_t i, const char* key) {
    return "/signatures/" + std::to_string(i) + "/" + key;
}

std::vector<std::string> fragment_list(const json& entry, std::size_t i, const char* key) {
    if (!entry.contains(key) || !entry[key].is_array() || entry[key].empty())
        throw Error(ErrorCode::InvalidInput, "at " + pointer(i, key) + ": expected a non-empty array of strings");
    std::vector<std::string> out;
    for (const auto& v : entry[key]) {
        if (!v.is_string()) throw Error(ErrorCode::InvalidInput, "at " + pointer(i, key) + ": fragments must be strings");
        if (normalize_code(v.get<std::string>()).empty())
            throw Error(ErrorCode::InvalidInput, "at " + pointer(i, key) + ": fragment is empty once whitespace is removed");
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

const char* to_string(VulnStatus s) noexcept {
    switch (s) {
        case VulnStatus::Vulnerable: return "Vulnerable";
        case VulnStatus::Patched: return "Patched";
        case VulnStatus::NeverPresent: return "NeverPresent";
    }
    return "?";
}

std::string normalize_code(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (std::size_t n = whitespace_at(text, i)) {
            i += n;
        } else {
            out += text[i++];
        }
    }
    return out;
}

std::vector<VulnSignature> signatures_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("signatures") || !doc["signatures"].is_array())
        throw Error(ErrorCode::InvalidInput, "at /signatures: expected an array");
    std::vector<VulnSignature> out;
    std::set<std::string> ids;
    const auto& list = doc["signatures"];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const json& e = list[i];
        if (!e.is_object()) throw Error(ErrorCode::InvalidInput, "at /signatures/" + std::to_string(i) + ": expected an object");
        VulnSignature s;
        if (!e.contains("cve_id") || !e["cve_id"].is_string() || e["cve_id"].get<std::string>().empty())
            throw Error(ErrorCode::InvalidInput, "at " + pointer(i, "cve_id") + ": expected a non-empty string");
        s.cve_id = e["cve_id"].get<std::string>();
        if (!ids.insert(s.cve_id).second)
            throw Error(ErrorCode::InvalidInput, "at " + pointer(i, "cve_id") + ": duplicate id " + s.cve_id);
        if (e.contains("cvss")) {
            if (!e["cvss"].is_number() || e["cvss"].get<double>() < 0 || e["cvss"].get<double>() > 10)
                throw Error(ErrorCode::InvalidInput, "at " + pointer(i, "cvss") + ": expected a number in [0, 10]");
            s.cvss = e["cvss"].get<double>();
        }
        if (e.contains("category")) {
            if (!e["category"].is_string()) throw Error(ErrorCode::InvalidInput, "at " + pointer(i, "category") + ": expected a string");
            s.category = e["category"].get<std::string>();
        }
        if (!e.contains("reference_patch_time") || !e["reference_patch_time"].is_number_integer())
            throw Error(ErrorCode::InvalidInput, "at " + pointer(i, "reference_patch_time") + ": expected Unix seconds");
        s.reference_patch_time = e["reference_patch_time"].get<UnixSeconds>();
        const std::string mode = e.value("match_mode", std::string("all"));
        if (mode == "all") s.match_mode = MatchMode::All;
        else if (mode == "any") s.match_mode = MatchMode::Any;
        else throw Error(ErrorCode::InvalidInput, "at " + pointer(i, "match_mode") + ": expected \"all\" or \"any\"");
        s.vuln_fragments = fragment_list(e, i, "vuln_fragments");
        s.patch_fragments = fragment_list(e, i, "patch_fragments");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<VulnSignature> load_signatures(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidInput, path.string() + ": " + e.what());
    }
    return signatures_from_json(doc);
}

ScanMatch scan_latest(const SnapshotTree& snapshot, const VulnSignature& sig, const ScanOptions& options) {
    const Fragments fr(sig);
    ScanMatch out;
    auto present = snapshot_presence(snapshot, fr, options, &out.files);
    out.matched = fr.matches(fr.vuln, [&](std::size_t f) { return present[f]; });
    return out;
}

VulnFinding scan_history(const RepoHistory& history, const VulnSignature& sig, const ScanOptions& options) {
    if (history.empty()) throw Error(ErrorCode::EmptyHistory, history.repo_id() + " has no commits");
    const Fragments fr(sig);
    const auto& commits = history.commits();
    const std::size_t n = commits.size();

    std::vector<std::optional<std::size_t>> first_parent(n);
    std::vector<std::size_t> pending(n, 0);  // children still to consume each state
    for (std::size_t i = 0; i < n; ++i) {
        if (commits[i].parents.empty()) continue;
        first_parent[i] = history.index_of(commits[i].parents.front());
        if (first_parent[i]) ++pending[*first_parent[i]];
    }

    SnapshotCache snapshots(history, 8);
    std::vector<std::optional<RepoState>> states(n);
    std::vector<bool> vuln(n), patch(n);
    for (std::size_t i = 0; i < n; ++i) {
        const CommitRecord& c = commits[i];
        RepoState base;
        base.holders.assign(fr.text.size(), 0);
        if (!c.parents.empty()) {
            if (!first_parent[i]) truncated(history, c);
            const std::size_t p = *first_parent[i];
            if (--pending[p] == 0) {
                base = std::move(*states[p]);
                states[p].reset();
            } else {
                base = *states[p];
            }
        }
        auto next = advance(std::move(base), c, fr, options);
        if (!next) next = state_from_snapshot(*snapshots.get(c.id), fr, options);
        auto present = [&](std::size_t f) { return next->holders[f] > 0; };
        vuln[i] = fr.matches(fr.vuln, present);
        patch[i] = fr.matches(fr.patch, present);
        if (pending[i] > 0) states[i] = std::move(*next);
    }
    return decide(history, sig, vuln, patch);
}

VulnFinding scan_history_oracle(const RepoHistory& history, const VulnSignature& sig, const ScanOptions& options) {
    if (history.empty()) throw Error(ErrorCode::EmptyHistory, history.repo_id() + " has no commits");
    const Fragments fr(sig);
    std::vector<bool> vuln, patch;
    for (const auto& c : history.commits()) {
        const SnapshotTree tree = checkout_snapshot(history, c.id);
        auto present = snapshot_presence(tree, fr, options);
        vuln.push_back(fr.matches(fr.vuln, [&](std::size_t f) { return present[f]; }));
        patch.push_back(fr.matches(fr.patch, [&](std::size_t f) { return present[f]; }));
    }
    return decide(history, sig, vuln, patch);
}

PatchTimeStats patch_time_stats(const std::vector<VulnFinding>& findings) {
    std::vector<double> days;
    for (const auto& f : findings)
        if (f.status == VulnStatus::Patched && f.time_to_patch_secs)
            days.push_back(static_cast<double>(*f.time_to_patch_secs) / static_cast<double>(kSecondsPerDay));
    if (days.empty()) throw Error(ErrorCode::EmptyInput, "no patched findings with a time to patch");
    const SummaryStats s = summary_stats(days);
    PatchTimeStats out;
    out.median_days = s.median;
    out.mean_days = s.mean;
    out.std_days = s.stddev;
    out.count = days.size();
    out.within_16_days_fraction =
        static_cast<double>(std::count_if(days.begin(), days.end(), [](double d) { return d <= 16.0; })) /
        static_cast<double>(days.size());
    return out;
}

std::vector<CensusRow> vuln_census(const std::vector<VulnFinding>& findings) {
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::size_t> counts;
    for (const auto& f : findings) {
        if (!seen.emplace(f.repo_id, f.cve_id).second)
            throw Error(ErrorCode::DuplicateFinding, "two findings for " + f.repo_id + " / " + f.cve_id);
        counts[f.repo_id] += f.status == VulnStatus::Vulnerable ? 1 : 0;
    }
    std::vector<CensusRow> out;
    for (const auto& [repo, n] : counts) out.push_back({repo, n});
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> census_at_least(const std::vector<CensusRow>& census,
                                                                 const std::vector<std::size_t>& thresholds) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t t : thresholds)
        out.emplace_back(t, static_cast<std::size_t>(std::count_if(census.begin(), census.end(),
                                                                   [&](const CensusRow& r) { return r.unpatched_count >= t; })));
    return out;
}

}  // namespace forkscope
