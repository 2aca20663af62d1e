#include <algorithm>
#include <limits>

#include "forkscope/error.hpp"
#include "forkscope/io.hpp"
#include "forkscope/similarity.hpp"

namespace forkscope {

namespace {

using Tokens = std::shared_ptr<const std::vector<TokenClass>>;

struct SideFile {
    std::string path;
    Tokens tokens;
};

std::vector<SideFile> eligible_files(const SnapshotTree& tree, const SimilarityConfig& cfg, SimilarityCache& cache) {
    std::vector<SideFile> out;
    for (const auto& [path, file] : tree) {
        if (file.binary || !is_eligible(path, cfg.extensions)) continue;
        out.push_back({path, cache.tokens(path, file)});
    }
    return out;
}

bool side_less(const std::vector<SideFile>& x, const std::vector<SideFile>& y) {
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end(), [](const SideFile& l, const SideFile& r) {
        if (l.path != r.path) return l.path < r.path;
        return *l.tokens < *r.tokens;
    });
}

// Maximum-weight assignment on an n x m weight matrix (rows <= cols after
// padding). Returns col index per row, or npos for none.
std::vector<std::size_t> max_assignment(const std::vector<std::vector<double>>& w) {
    const std::size_t rows = w.size();
    const std::size_t cols = rows ? w[0].size() : 0;
    const std::size_t n = std::max(rows, cols);
    const double inf = std::numeric_limits<double>::infinity();
    auto cost = [&](std::size_t i, std::size_t j) { return (i < rows && j < cols) ? -w[i][j] : 0.0; };

    // 1-based potentials formulation.
    std::vector<double> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> match(rows, std::numeric_limits<std::size_t>::max());
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] >= 1 && p[j] <= rows && j <= cols) match[p[j] - 1] = j - 1;
    return match;
}

}  // namespace

bool is_eligible(const std::string& path, const std::vector<std::string>& extensions) {
    for (const auto& ext : extensions)
        if (path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) return true;
    return false;
}

Dialect dialect_for(const std::string& path) {
    static const std::vector<std::string> clike{".c",  ".cc", ".cpp", ".cxx", ".h",  ".hh", ".hpp", ".hxx", ".inl",
                                                ".ipp", ".java", ".js", ".ts", ".go", ".cs", ".rs", ".m", ".mm"};
    return is_eligible(path, clike) ? Dialect::CLike : Dialect::Plain;
}

std::shared_ptr<const std::vector<TokenClass>> SimilarityCache::tokens(const std::string& path,
                                                                       const SnapshotFile& file) {
    const std::string text = file.text();
    const Dialect dialect = dialect_for(path);
    auto key = std::make_pair(sha256_hex(text), static_cast<int>(dialect));
    {
        std::lock_guard lock(mutex_);
        if (auto it = token_cache_.find(key); it != token_cache_.end()) return it->second;
    }
    auto toks = std::make_shared<const std::vector<TokenClass>>(tokenize(text, dialect).tokens);
    std::lock_guard lock(mutex_);
    return token_cache_.emplace(std::move(key), std::move(toks)).first->second;
}

SimilarityScore SimilarityCache::pair(const std::shared_ptr<const std::vector<TokenClass>>& a,
                                      const std::shared_ptr<const std::vector<TokenClass>>& b, std::size_t min_match) {
    const void* lo = std::min<const void*>(a.get(), b.get());
    const void* hi = std::max<const void*>(a.get(), b.get());
    auto key = std::make_tuple(lo, hi, min_match);
    std::size_t matched = 0;
    bool hit = false;
    {
        std::lock_guard lock(mutex_);
        if (auto it = pair_cache_.find(key); it != pair_cache_.end()) {
            matched = it->second.matched_tokens;
            hit = true;
        }
    }
    if (!hit) {
        if (a.get() == b.get())
            matched = a->size() >= std::max<std::size_t>(min_match, 1) ? a->size() : 0;
        else
            matched = gst(std::span<const TokenClass>(*a), std::span<const TokenClass>(*b), min_match).score.matched_tokens;
        std::lock_guard lock(mutex_);
        pair_cache_.emplace(key, SimilarityScore{0, matched, 0, 0});
    }
    return {similarity_value(matched, a->size(), b->size()), matched, a->size(), b->size()};
}

RepoSimilarity repo_similarity(const SnapshotTree& a, const SnapshotTree& b, const SimilarityConfig& cfg,
                               SimilarityCache* cache) {
    SimilarityCache local;
    SimilarityCache& c = cache ? *cache : local;

    auto files_a = eligible_files(a, cfg, c);
    auto files_b = eligible_files(b, cfg, c);
    if (files_a.empty() || files_b.empty())
        throw Error(ErrorCode::NoEligibleFiles,
                    std::string("no eligible source files in the ") + (files_a.empty() ? "first" : "second") +
                        " snapshot");

    const bool swapped = side_less(files_b, files_a);
    const auto& x = swapped ? files_b : files_a;
    const auto& y = swapped ? files_a : files_b;

    std::vector<std::vector<double>> matched(x.size(), std::vector<double>(y.size(), 0));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            matched[i][j] = static_cast<double>(c.pair(x[i].tokens, y[j].tokens, cfg.min_match).matched_tokens);

    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    if (cfg.pairing == Pairing::Optimal) {
        auto m = max_assignment(matched);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] < y.size() && matched[i][m[i]] > 0) chosen.emplace_back(i, m[i]);
    } else {
        struct Candidate {
            double value;
            std::size_t i, j;
        };
        std::vector<Candidate> cand;
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < y.size(); ++j)
                if (matched[i][j] > 0)
                    cand.push_back({similarity_value(static_cast<std::size_t>(matched[i][j]), x[i].tokens->size(),
                                                     y[j].tokens->size()),
                                    i, j});
        std::sort(cand.begin(), cand.end(), [](const Candidate& l, const Candidate& r) {
            if (l.value != r.value) return l.value > r.value;
            if (l.i != r.i) return l.i < r.i;
            return l.j < r.j;
        });
        std::vector<bool> used_x(x.size(), false), used_y(y.size(), false);
        for (const auto& cd : cand) {
            if (used_x[cd.i] || used_y[cd.j]) continue;
            used_x[cd.i] = used_y[cd.j] = true;
            chosen.emplace_back(cd.i, cd.j);
        }
    }

    RepoSimilarity out;
    out.files_a = files_a.size();
    out.files_b = files_b.size();
    std::size_t total_x = 0, total_y = 0, total_matched = 0;
    for (const auto& f : x) total_x += f.tokens->size();
    for (const auto& f : y) total_y += f.tokens->size();
    std::sort(chosen.begin(), chosen.end());
    for (auto [i, j] : chosen) {
        const auto m = static_cast<std::size_t>(matched[i][j]);
        total_matched += m;
        FilePairScore ps;
        ps.path_a = swapped ? y[j].path : x[i].path;
        ps.path_b = swapped ? x[i].path : y[j].path;
        ps.matched_tokens = m;
        ps.value = similarity_value(m, x[i].tokens->size(), y[j].tokens->size());
        out.pairs.push_back(std::move(ps));
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const FilePairScore& l, const FilePairScore& r) { return std::tie(l.path_a, l.path_b) < std::tie(r.path_a, r.path_b); });
    const std::size_t ta = swapped ? total_y : total_x;
    const std::size_t tb = swapped ? total_x : total_y;
    out.overall = {similarity_value(total_matched, ta, tb), total_matched, ta, tb};
    return out;
}

std::vector<CdfPoint> similarity_cdf(std::vector<double> scores) {
    if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no similarity scores");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidInput, "similarity score outside [0, 1]");
    std::sort(scores.begin(), scores.end());
    std::vector<CdfPoint> out;
    const auto n = static_cast<double>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i + 1 < scores.size() && scores[i + 1] == scores[i]) continue;
        out.push_back({scores[i], static_cast<double>(i + 1) / n});
    }
    return out;
}

}  // namespace forkscope
