#include "forkscope/history.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>

namespace forkscope {

namespace {

// Above this many DP cells the middle section is emitted as one block.
constexpr std::size_t kMaxLcsCells = std::size_t{1} << 24;

struct Block {
    std::size_t old_start, old_count, new_start, new_count;
};

// Edit blocks for the differing middle of two sequences via LCS.
void lcs_blocks(const std::vector<std::string>& a, std::size_t a0, std::size_t a1,
                const std::vector<std::string>& b, std::size_t b0, std::size_t b1,
                std::vector<Block>& out) {
    const std::size_t n = a1 - a0;
    const std::size_t m = b1 - b0;
    if (n == 0 && m == 0) return;
    if (n == 0 || m == 0 || (n + 1) * (m + 1) > kMaxLcsCells) {
        out.push_back({a0, n, b0, m});
        return;
    }
    std::vector<std::uint32_t> table((n + 1) * (m + 1), 0);
    auto cell = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return table[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            cell(i, j) = a[a0 + i] == b[b0 + j] ? cell(i + 1, j + 1) + 1
                                                 : std::max(cell(i + 1, j), cell(i, j + 1));
        }
    }
    std::size_t i = 0, j = 0;
    std::optional<Block> open;
    auto flush = [&] {
        if (open) {
            out.push_back(*open);
            open.reset();
        }
    };
    while (i < n || j < m) {
        if (i < n && j < m && a[a0 + i] == b[b0 + j]) {
            flush();
            ++i;
            ++j;
            continue;
        }
        if (!open) open = Block{a0 + i, 0, b0 + j, 0};
        if (j < m && (i == n || cell(i, j + 1) >= cell(i + 1, j))) {
            ++open->new_count;
            ++j;
        } else {
            ++open->old_count;
            ++i;
        }
    }
    flush();
}

}  // namespace

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        auto line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

FileChange diff_file(const std::string& path, const std::vector<std::string>& before,
                     const std::vector<std::string>& after, std::size_t context) {
    FileChange change;
    change.path = path;
    change.status = ChangeStatus::Modified;

    std::size_t prefix = 0;
    while (prefix < before.size() && prefix < after.size() && before[prefix] == after[prefix]) ++prefix;
    std::size_t suffix = 0;
    while (suffix < before.size() - prefix && suffix < after.size() - prefix &&
           before[before.size() - 1 - suffix] == after[after.size() - 1 - suffix])
        ++suffix;

    std::vector<Block> blocks;
    lcs_blocks(before, prefix, before.size() - suffix, after, prefix, after.size() - suffix, blocks);

    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const Block& blk = blocks[k];
        Hunk h{blk.old_start, blk.old_count, blk.new_start, blk.new_count, {}, {}};

        // Context never reaches into the neighbouring block.
        std::size_t lower = k == 0 ? 0 : blocks[k - 1].new_start + blocks[k - 1].new_count;
        std::size_t from = blk.new_start >= lower + context ? blk.new_start - context : lower;
        h.context_before.assign(after.begin() + static_cast<std::ptrdiff_t>(from),
                                after.begin() + static_cast<std::ptrdiff_t>(blk.new_start));

        std::size_t tail = blk.new_start + blk.new_count;
        std::size_t upper = k + 1 < blocks.size() ? blocks[k + 1].new_start : after.size();
        std::size_t to = std::min(upper, tail + context);
        h.context_after.assign(after.begin() + static_cast<std::ptrdiff_t>(tail),
                               after.begin() + static_cast<std::ptrdiff_t>(to));

        change.deleted_lines.insert(change.deleted_lines.end(),
                                    before.begin() + static_cast<std::ptrdiff_t>(blk.old_start),
                                    before.begin() + static_cast<std::ptrdiff_t>(blk.old_start + blk.old_count));
        change.added_lines.insert(change.added_lines.end(),
                                  after.begin() + static_cast<std::ptrdiff_t>(blk.new_start),
                                  after.begin() + static_cast<std::ptrdiff_t>(blk.new_start + blk.new_count));
        change.hunks.push_back(std::move(h));
    }
    return change;
}

std::vector<FileChange> diff_trees(const SnapshotTree& before, const SnapshotTree& after, std::size_t context) {
    std::vector<FileChange> changes;
    for (const auto& [path, file] : before) {
        if (after.count(path)) continue;
        FileChange del;
        del.path = path;
        del.status = ChangeStatus::Deleted;
        del.binary = file.binary;
        if (!file.binary) del.deleted_lines = file.lines;
        changes.push_back(std::move(del));
    }
    for (const auto& [path, file] : after) {
        auto it = before.find(path);
        if (it == before.end()) {
            FileChange add;
            add.path = path;
            add.status = ChangeStatus::Added;
            add.binary = file.binary;
            if (!file.binary) add.added_lines = file.lines;
            changes.push_back(std::move(add));
            continue;
        }
        if (it->second == file) continue;
        if (file.binary || it->second.binary) {
            FileChange mod;
            mod.path = path;
            mod.status = ChangeStatus::Modified;
            mod.binary = file.binary;
            if (!file.binary) {
                // binary -> text: the whole text is one inserted block
                mod.added_lines = file.lines;
                mod.hunks.push_back(Hunk{0, 0, 0, file.lines.size(), {}, {}});
            }
            changes.push_back(std::move(mod));
            continue;
        }
        changes.push_back(diff_file(path, it->second.lines, file.lines, context));
    }
    std::sort(changes.begin(), changes.end(),
              [](const FileChange& x, const FileChange& y) { return x.path < y.path; });
    return changes;
}

}  // namespace forkscope
