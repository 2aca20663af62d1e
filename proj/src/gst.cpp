#include <algorithm>
#include <unordered_map>

#include "forkscope/similarity.hpp"

namespace forkscope {

namespace {

// run[i] = number of consecutive unmarked tokens starting at i.
std::vector<std::size_t> unmarked_runs(const std::vector<bool>& marked) {
    std::vector<std::size_t> run(marked.size() + 1, 0);
    for (std::size_t i = marked.size(); i-- > 0;) run[i] = marked[i] ? 0 : run[i + 1] + 1;
    return run;
}

std::vector<Tile> tile(std::span<const TokenClass> a, std::span<const TokenClass> b, std::size_t min_match) {
    std::vector<Tile> tiles;
    min_match = std::max<std::size_t>(min_match, 1);
    if (a.size() < min_match || b.size() < min_match) return tiles;

    std::unordered_map<TokenClass, std::vector<std::size_t>> where;
    for (std::size_t t = 0; t < b.size(); ++t) where[b[t]].push_back(t);

    std::vector<bool> marked_a(a.size(), false), marked_b(b.size(), false);
    for (;;) {
        const auto run_a = unmarked_runs(marked_a);
        const auto run_b = unmarked_runs(marked_b);
        std::size_t best = min_match;
        std::vector<Tile> matches;
        for (std::size_t p = 0; p < a.size(); ++p) {
            if (run_a[p] < best) continue;
            auto it = where.find(a[p]);
            if (it == where.end()) continue;
            for (std::size_t t : it->second) {
                if (run_b[t] < best) continue;
                std::size_t limit = std::min(run_a[p], run_b[t]);
                std::size_t j = 1;
                while (j < limit && a[p + j] == b[t + j]) ++j;
                if (j == best) {
                    matches.push_back({p, t, j});
                } else if (j > best) {
                    best = j;
                    matches.assign(1, {p, t, j});
                }
            }
        }
        if (matches.empty()) break;
        for (const Tile& m : matches) {
            bool free = true;
            for (std::size_t j = 0; j < m.length && free; ++j)
                free = !marked_a[m.a_start + j] && !marked_b[m.b_start + j];
            if (!free) continue;
            for (std::size_t j = 0; j < m.length; ++j) marked_a[m.a_start + j] = marked_b[m.b_start + j] = true;
            tiles.push_back(m);
        }
        // A round at the minimum length leaves no further match behind.
        if (best == min_match) break;
    }
    return tiles;
}

}  // namespace

double similarity_value(std::size_t matched, std::size_t total_a, std::size_t total_b) noexcept {
    if (total_a + total_b == 0) return 0.0;
    return 2.0 * static_cast<double>(matched) / static_cast<double>(total_a + total_b);
}

TilingResult gst(std::span<const TokenClass> a, std::span<const TokenClass> b, std::size_t min_match) {
    const bool swap = b.size() < a.size() ||
                      (a.size() == b.size() && std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end()));
    TilingResult result;
    result.tiles = swap ? tile(b, a, min_match) : tile(a, b, min_match);
    if (swap)
        for (Tile& t : result.tiles) std::swap(t.a_start, t.b_start);
    std::size_t matched = 0;
    for (const Tile& t : result.tiles) matched += t.length;
    result.score = {similarity_value(matched, a.size(), b.size()), matched, a.size(), b.size()};
    return result;
}

TilingResult gst(const TokenStream& a, const TokenStream& b, std::size_t min_match) {
    return gst(std::span<const TokenClass>(a.tokens), std::span<const TokenClass>(b.tokens), min_match);
}

}  // namespace forkscope
