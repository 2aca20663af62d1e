#include "forkscope/lineage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "forkscope/error.hpp"
#include "forkscope/parallel.hpp"

namespace forkscope {

namespace {

void require_history(const RepoHistory& h, const char* role) {
    if (h.empty()) throw Error(ErrorCode::EmptyHistory, std::string(role) + " history has no commits");
}

double similarity_or_zero(const SnapshotTree& a, const SnapshotTree& b, const SimilarityConfig& cfg,
                          SimilarityCache* cache) {
    try {
        return repo_similarity(a, b, cfg, cache).overall.value;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NoEligibleFiles) return 0.0;
        throw;
    }
}

std::size_t touched_files(const CommitRecord& c) {
    return static_cast<std::size_t>(std::count_if(c.file_changes.begin(), c.file_changes.end(), [](const FileChange& f) {
        return f.status == ChangeStatus::Added || f.status == ChangeStatus::Modified;
    }));
}

}  // namespace

const char* to_string(Heuristic h) noexcept {
    switch (h) {
        case Heuristic::H1: return "H1";
        case Heuristic::H2: return "H2";
        case Heuristic::None: return "None";
    }
    return "?";
}

const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::Forked: return "Forked";
        case Verdict::NotForked: return "NotForked";
        case Verdict::Identical: return "Identical";
        case Verdict::Undetermined: return "Undetermined";
    }
    return "?";
}

ForkReport heuristic1(const RepoHistory& child, const RepoHistory& parent, std::size_t prefix_probe,
                      const SimilarityConfig& sim, SimilarityCache* cache) {
    require_history(child, "child");
    require_history(parent, "parent");

    ForkReport report;
    report.child_id = child.repo_id();
    report.parent_id = parent.repo_id();
    report.heuristic = Heuristic::H1;
    report.verdict = Verdict::NotForked;

    const auto c = child.first_parent_chain(child.head());
    const auto p = parent.first_parent_chain(parent.head());
    std::unordered_map<std::string_view, std::size_t> pos;
    for (std::size_t i = 0; i < p.size(); ++i) pos.emplace(p[i]->id, i);

    auto root = pos.find(c.front()->id);
    if (root == pos.end()) return report;
    const std::size_t off = root->second;
    // The probe leaves room for the child's own commits and stops at the parent's tip.
    const std::size_t probe =
        std::max<std::size_t>(1, std::min({prefix_probe, c.size() - 1, p.size() - off}));
    for (std::size_t i = 0; i < probe; ++i)
        if (off + i >= p.size() || p[off + i]->id != c[i]->id) return report;

    std::size_t k = probe;
    while (k < c.size() && off + k < p.size() && p[off + k]->id == c[k]->id) ++k;

    if (k == c.size() || (off == 0 && k == p.size())) {
        report.verdict = Verdict::Identical;
        report.fork_commit_child = c[k - 1]->id;
        report.parent_version = c[k - 1]->id;
        return report;
    }

    report.verdict = Verdict::Forked;
    report.fork_commit_child = c[k - 1]->id;
    report.parent_version = c[k - 1]->id;
    report.fork_time = c[k]->author_time;
    SnapshotTree child_tree = checkout_snapshot(child, c[k]->id);
    SnapshotTree parent_tree = checkout_snapshot(parent, c[k - 1]->id);
    report.similarity_at_fork = similarity_or_zero(child_tree, parent_tree, sim, cache);
    return report;
}

const CommitRecord& largest_change_commit(const RepoHistory& history) {
    require_history(history, "child");
    const CommitRecord* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& c : history.commits()) {
        std::size_t n = touched_files(c);
        if (!best || n > best_count || (n == best_count && c.author_time < best->author_time)) {
            best = &c;
            best_count = n;
        }
    }
    return *best;
}

ForkReport heuristic2(const RepoHistory& child, const RepoHistory& parent, double threshold,
                      const Heuristic2Options& options, SimilarityCache* cache) {
    require_history(child, "child");
    require_history(parent, "parent");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidInput, "threshold must lie in (0, 1]");
    if (options.window_secs <= 0) throw Error(ErrorCode::InvalidInput, "window_secs must be positive");

    ForkReport report;
    report.child_id = child.repo_id();
    report.parent_id = parent.repo_id();
    report.heuristic = Heuristic::H2;

    const CommitRecord& u = largest_change_commit(child);
    report.fork_commit_child = u.id;
    report.fork_time = u.author_time;

    const std::size_t stride = std::max<std::size_t>(options.stride, 1);
    report.sampled = stride > 1;
    std::vector<const CommitRecord*> window;
    std::size_t seen = 0;
    for (const auto& p : parent.commits()) {
        if (p.author_time < u.author_time - options.window_secs || p.author_time > u.author_time) continue;
        if (seen++ % stride == 0) window.push_back(&p);
    }
    if (window.empty()) {
        report.verdict = Verdict::Undetermined;
        return report;
    }

    SimilarityCache local;
    SimilarityCache& shared = cache ? *cache : local;
    const SnapshotTree child_tree = checkout_snapshot(child, u.id);
    SnapshotCache snapshots(parent, std::max<std::size_t>(options.jobs, 1) * 2 + 2);

    std::vector<double> scores(window.size(), 0.0);
    const std::size_t batch = std::max<std::size_t>(resolve_jobs(options.jobs), 1);
    for (std::size_t begin = 0; begin < window.size(); begin += batch) {
        const std::size_t n = std::min(batch, window.size() - begin);
        std::vector<std::shared_ptr<const SnapshotTree>> trees;
        for (std::size_t i = 0; i < n; ++i) trees.push_back(snapshots.get(window[begin + i]->id));
        parallel_for(n, options.jobs, [&](std::size_t i) {
            scores[begin + i] = similarity_or_zero(child_tree, *trees[i], options.similarity, &shared);
        });
    }

    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    report.parent_version = window[best]->id;
    report.similarity_at_fork = scores[best];
    report.verdict = scores[best] >= threshold ? Verdict::Forked : Verdict::NotForked;
    return report;
}

ThresholdDerivation derive_threshold(std::vector<double> scores) {
    if (scores.size() < 2)
        throw Error(ErrorCode::TooFewScores, "need at least 2 scores, got " + std::to_string(scores.size()));
    ThresholdDerivation d;
    const auto n = static_cast<double>(scores.size());
    d.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
    double var = 0;
    for (double s : scores) var += (s - d.mean) * (s - d.mean);
    d.three_sigma = 3.0 * std::sqrt(var / n);
    d.threshold = std::max(0.0, d.mean - d.three_sigma);
    d.sample_scores = std::move(scores);
    return d;
}

LineageResult lineage_sweep(const std::vector<const RepoHistory*>& children, const RepoHistory& parent,
                            const LineageConfig& cfg) {
    require_history(parent, "parent");
    LineageResult result;
    result.reports.resize(children.size());
    SimilarityCache cache;

    parallel_for(children.size(), cfg.jobs, [&](std::size_t i) {
        result.reports[i] = heuristic1(*children[i], parent, cfg.prefix_probe, cfg.similarity, &cache);
    });

    std::vector<double> h1_scores;
    for (const auto& r : result.reports)
        if (r.verdict == Verdict::Forked) h1_scores.push_back(*r.similarity_at_fork);
    // Sorted so the derived threshold does not depend on the children's order.
    std::sort(h1_scores.begin(), h1_scores.end());
    if (h1_scores.size() >= 2) {
        result.threshold = derive_threshold(h1_scores);
    } else {
        result.threshold.sample_scores = h1_scores;
        result.threshold.threshold = cfg.default_threshold;
        result.threshold.fallback = true;
    }

    Heuristic2Options h2;
    h2.window_secs = cfg.window_secs;
    h2.stride = cfg.stride;
    h2.jobs = cfg.jobs;
    h2.similarity = cfg.similarity;
    const double threshold = std::clamp(result.threshold.threshold, 1e-12, 1.0);
    for (std::size_t i = 0; i < children.size(); ++i) {
        if (result.reports[i].verdict != Verdict::NotForked) continue;
        result.reports[i] = heuristic2(*children[i], parent, threshold, h2, &cache);
    }
    return result;
}

}  // namespace forkscope
