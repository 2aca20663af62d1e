#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forkscope/history.hpp"
#include "forkscope/hosting.hpp"

namespace forkscope {

// Windows are fixed 30-day months.
inline constexpr UnixSeconds kSecondsPerMonth = 30 * kSecondsPerDay;
inline constexpr std::array<int, 3> kWindowMonths{3, 6, 12};
inline constexpr std::size_t kFeatureCount = 32;

struct WindowStats {
    double mean_additions = 0;
    double std_additions = 0;
    double mean_deletions = 0;
    double std_deletions = 0;
    double mean_commit_interval_secs = 0;
    double std_commit_interval_secs = 0;
};

struct FeatureVector {
    std::string repo_id;

    struct Engagement {
        double commits = 0;
        double branches = 0;
        double releases = 0;
        double contributors = 0;
        double pull_requests = 0;
    } engagement;

    struct Mde {
        double mde_3m = 0;
        double mde_6m = 0;
        double mde_12m = 0;
    } mde;

    struct Popularity {
        double watch = 0;
        double star = 0;
        double fork = 0;
        double issues = 0;
        double open_issues = 0;
        double closed_issues = 0;
    } popularity;

    std::array<WindowStats, 3> updates{};  // indexed like kWindowMonths

    // Merge commits contributed their first-parent diff to the line counts.
    bool includes_merge_diffs = false;

    std::array<double, kFeatureCount> flatten() const;
};

/// Column names of FeatureVector::flatten(), in order.
const std::array<std::string_view, kFeatureCount>& feature_names();

/// Mean developer engagement: mean over periods of (period contributors /
/// distinct contributors overall). 0 when `distinct_total` is 0.
double compute_mde(std::span<const std::size_t> contributors_per_period, std::size_t distinct_total);

/// Windowed add/delete/interval statistics over commits with author_time in
/// (as_of - window, as_of]. Population standard deviation.
WindowStats window_stats(const RepoHistory& history, UnixSeconds as_of, UnixSeconds window_secs);

FeatureVector extract_features(const RepoHistory& history, const HostingMetadata& meta, UnixSeconds as_of);

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::vector<double> column(std::size_t c) const;

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
};

struct Standardized {
    Matrix z;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> zero_variance;
};

/// Column-wise z-scores (population std). Zero-variance columns become 0.
Standardized standardize(const Matrix& m);
Standardized standardize(const std::vector<FeatureVector>& vectors);

}  // namespace forkscope
