#include "forkscope/maintenance.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "forkscope/error.hpp"

namespace forkscope {

namespace {

struct MeanStd {
    double mean = 0;
    double stddev = 0;
};

MeanStd population(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    double sum = 0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names{
        "commits",
        "branches",
        "releases",
        "contributors",
        "pull_requests",
        "mde_3m",
        "mde_6m",
        "mde_12m",
        "watch",
        "star",
        "fork",
        "issues",
        "open_issues",
        "closed_issues",
        "mean_additions_3m",
        "std_additions_3m",
        "mean_deletions_3m",
        "std_deletions_3m",
        "mean_commit_interval_3m",
        "std_commit_interval_3m",
        "mean_additions_6m",
        "std_additions_6m",
        "mean_deletions_6m",
        "std_deletions_6m",
        "mean_commit_interval_6m",
        "std_commit_interval_6m",
        "mean_additions_12m",
        "std_additions_12m",
        "mean_deletions_12m",
        "std_deletions_12m",
        "mean_commit_interval_12m",
        "std_commit_interval_12m",
    };
    return names;
}

std::array<double, kFeatureCount> FeatureVector::flatten() const {
    std::array<double, kFeatureCount> out{};
    std::size_t i = 0;
    for (double v : {engagement.commits, engagement.branches, engagement.releases, engagement.contributors,
                     engagement.pull_requests, mde.mde_3m, mde.mde_6m, mde.mde_12m, popularity.watch, popularity.star,
                     popularity.fork, popularity.issues, popularity.open_issues, popularity.closed_issues})
        out[i++] = v;
    for (const WindowStats& w : updates) {
        out[i++] = w.mean_additions;
        out[i++] = w.std_additions;
        out[i++] = w.mean_deletions;
        out[i++] = w.std_deletions;
        out[i++] = w.mean_commit_interval_secs;
        out[i++] = w.std_commit_interval_secs;
    }
    return out;
}

double compute_mde(std::span<const std::size_t> contributors_per_period, std::size_t distinct_total) {
    if (contributors_per_period.empty()) throw Error(ErrorCode::InvalidInput, "MDE needs at least one period");
    const std::size_t peak = *std::max_element(contributors_per_period.begin(), contributors_per_period.end());
    if (peak > distinct_total)
        throw Error(ErrorCode::InvalidInput, "a period has " + std::to_string(peak) +
                                                 " contributors but only " + std::to_string(distinct_total) +
                                                 " are distinct overall");
    if (distinct_total == 0) return 0.0;
    double sum = 0;
    for (std::size_t c : contributors_per_period) sum += static_cast<double>(c) / static_cast<double>(distinct_total);
    return sum / static_cast<double>(contributors_per_period.size());
}

WindowStats window_stats(const RepoHistory& history, UnixSeconds as_of, UnixSeconds window_secs) {
    std::vector<double> adds, dels;
    std::vector<UnixSeconds> times;
    for (const auto& c : history.commits()) {
        if (c.author_time <= as_of - window_secs || c.author_time > as_of) continue;
        adds.push_back(static_cast<double>(c.added_line_count()));
        dels.push_back(static_cast<double>(c.deleted_line_count()));
        times.push_back(c.author_time);
    }
    WindowStats w;
    auto a = population(adds);
    auto d = population(dels);
    w.mean_additions = a.mean;
    w.std_additions = a.stddev;
    w.mean_deletions = d.mean;
    w.std_deletions = d.stddev;
    if (times.size() >= 2) {
        std::sort(times.begin(), times.end());
        std::vector<double> gaps;
        for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(static_cast<double>(times[i] - times[i - 1]));
        auto g = population(gaps);
        w.mean_commit_interval_secs = g.mean;
        w.std_commit_interval_secs = g.stddev;
    }
    return w;
}

namespace {

// MDE with n = 12 / period_months periods covering the 12 months before as_of.
double windowed_mde(const RepoHistory& history, UnixSeconds as_of, int period_months) {
    const int periods = 12 / period_months;
    const UnixSeconds span = period_months * kSecondsPerMonth;
    const UnixSeconds start = as_of - 12 * kSecondsPerMonth;
    std::vector<std::set<std::string>> per_period(static_cast<std::size_t>(periods));
    std::set<std::string> all;
    for (const auto& c : history.commits()) {
        if (c.author_time <= start || c.author_time > as_of) continue;
        // Periods are (start + i*span, start + (i+1)*span].
        auto idx = static_cast<std::size_t>((c.author_time - start - 1) / span);
        per_period[std::min(idx, per_period.size() - 1)].insert(c.author_id);
        all.insert(c.author_id);
    }
    std::vector<std::size_t> counts;
    for (const auto& s : per_period) counts.push_back(s.size());
    return compute_mde(counts, all.size());
}

}  // namespace

FeatureVector extract_features(const RepoHistory& history, const HostingMetadata& meta, UnixSeconds as_of) {
    if (history.empty()) throw Error(ErrorCode::EmptyHistory, "no commits in " + history.repo_id());

    FeatureVector fv;
    fv.repo_id = history.repo_id();

    std::set<std::string> contributors;
    std::size_t commits = 0;
    for (const auto& c : history.commits()) {
        if (c.author_time > as_of) continue;
        ++commits;
        contributors.insert(c.author_id);
        if (c.is_merge() && !c.file_changes.empty()) fv.includes_merge_diffs = true;
    }
    fv.engagement.commits = static_cast<double>(commits);
    fv.engagement.branches = static_cast<double>(meta.branches);
    fv.engagement.releases = static_cast<double>(meta.releases);
    fv.engagement.contributors = static_cast<double>(contributors.size());
    fv.engagement.pull_requests = static_cast<double>(meta.pull_requests);

    fv.mde.mde_3m = windowed_mde(history, as_of, 3);
    fv.mde.mde_6m = windowed_mde(history, as_of, 6);
    fv.mde.mde_12m = windowed_mde(history, as_of, 12);

    fv.popularity.watch = static_cast<double>(meta.watch);
    fv.popularity.star = static_cast<double>(meta.star);
    fv.popularity.fork = static_cast<double>(meta.fork_count);
    fv.popularity.issues = static_cast<double>(meta.issues_total);
    fv.popularity.open_issues = static_cast<double>(meta.issues_open);
    fv.popularity.closed_issues = static_cast<double>(meta.issues_closed);

    for (std::size_t i = 0; i < kWindowMonths.size(); ++i)
        fv.updates[i] = window_stats(history, as_of, kWindowMonths[i] * kSecondsPerMonth);
    return fv;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols) throw Error(ErrorCode::InvalidInput, "ragged matrix rows");
        std::copy(rows[r].begin(), rows[r].end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols));
    }
    return m;
}

Standardized standardize(const Matrix& m) {
    if (m.rows < 2) throw Error(ErrorCode::TooFewVectors, "standardization needs at least 2 rows");
    Standardized s;
    s.z = Matrix(m.rows, m.cols);
    s.mean.resize(m.cols);
    s.stddev.resize(m.cols);
    s.zero_variance.resize(m.cols);
    for (std::size_t c = 0; c < m.cols; ++c) {
        auto ms = population(m.column(c));
        s.mean[c] = ms.mean;
        s.stddev[c] = ms.stddev;
        s.zero_variance[c] = !(ms.stddev > 0.0);
        for (std::size_t r = 0; r < m.rows; ++r)
            s.z(r, c) = s.zero_variance[c] ? 0.0 : (m(r, c) - ms.mean) / ms.stddev;
    }
    return s;
}

Standardized standardize(const std::vector<FeatureVector>& vectors) {
    Matrix m(vectors.size(), kFeatureCount);
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        auto flat = vectors[r].flatten();
        std::copy(flat.begin(), flat.end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * kFeatureCount));
    }
    return standardize(m);
}

}  // namespace forkscope
