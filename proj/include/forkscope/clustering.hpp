#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "forkscope/maintenance.hpp"

namespace forkscope {

struct PointSilhouette {
    double a = 0;  // mean distance to the other members of its cluster
    double b = 0;  // smallest mean distance to the members of another cluster
    double s = 0;
};

struct ClusteringResult {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // row -> cluster in [0, k)
    Matrix centroids;                      // k x cols, standardized space
    double silhouette = 0;
    std::vector<PointSilhouette> per_point;
    std::vector<double> inertia_trace;  // objective after each assignment step
    std::size_t iterations = 0;
};

struct KMeansOptions {
    std::size_t max_iterations = 300;
    std::size_t restarts = 10;  // k-means++ seedings; lowest objective wins
};

/// Seeded k-means++ / Lloyd. Bit-for-bit reproducible for a given seed.
ClusteringResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Per-point silhouette (singleton clusters score 0) and their mean.
std::pair<std::vector<PointSilhouette>, double> silhouette(const Matrix& points,
                                                           std::span<const std::size_t> assignments, std::size_t k);

struct KSelection {
    std::size_t best_k = 0;
    std::vector<std::pair<std::size_t, double>> scores;  // (k, silhouette)
};

/// Best silhouette over k in [k_min, k_max]; ties go to the smaller k.
KSelection select_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                    const KMeansOptions& options = {});

// ---------------------------------------------------------------------------
// Key attribute identification
// ---------------------------------------------------------------------------

struct AttributeSelection {
    std::vector<std::string> selected;  // sorted by name
    double merit = 0;
    std::vector<std::pair<std::vector<std::string>, double>> trace;  // every evaluated subset
};

/// Correlation-based subset merit of the columns `subset` against `labels`.
double cfs_merit(const Matrix& points, std::span<const std::size_t> labels, std::span<const std::size_t> subset);

/// Forward best-first search over feature subsets scored by cfs_merit. Stops
/// after `stop_after` consecutive expansions that fail to improve the best
/// merit. Ties are broken by feature name, so column order is irrelevant.
AttributeSelection best_first_attributes(const Matrix& points, std::span<const std::string> names,
                                         std::span<const std::size_t> labels, std::size_t stop_after = 5);

}  // namespace forkscope
