#include "forkscope/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "forkscope/error.hpp"

namespace forkscope {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

// Uniform double in [0, 1) built from raw engine bits; std distributions are
// not reproducible across standard library implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Matrix plus_plus_seeds(const Matrix& pts, std::size_t k, std::mt19937_64& rng) {
    Matrix centroids(k, pts.cols);
    std::vector<double> d2(pts.rows, std::numeric_limits<double>::infinity());
    auto take = [&](std::size_t c, std::size_t row) {
        std::copy(pts.row(row).begin(), pts.row(row).end(), centroids.data.begin() + static_cast<std::ptrdiff_t>(c * pts.cols));
        for (std::size_t r = 0; r < pts.rows; ++r) d2[r] = std::min(d2[r], sq_dist(pts.row(r), centroids.row(c)));
    };
    take(0, std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(pts.rows)), pts.rows - 1));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0;
        for (double d : d2) total += d;
        std::size_t pick = pts.rows - 1;
        if (total > 0) {
            double target = unit(rng) * total, acc = 0;
            for (std::size_t r = 0; r < pts.rows; ++r) {
                acc += d2[r];
                if (acc > target) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(pts.rows)), pts.rows - 1);
        }
        take(c, pick);
    }
    return centroids;
}

struct LloydRun {
    std::vector<std::size_t> assignments;
    Matrix centroids;
    std::vector<double> trace;
    std::size_t iterations = 0;
};

LloydRun lloyd(const Matrix& pts, Matrix centroids, std::size_t k, std::size_t max_iterations) {
    LloydRun run;
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    run.assignments.assign(pts.rows, none);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        bool changed = false;
        double inertia = 0;
        for (std::size_t r = 0; r < pts.rows; ++r) {
            std::size_t best = run.assignments[r];
            double best_d = best == none ? std::numeric_limits<double>::infinity() : sq_dist(pts.row(r), centroids.row(best));
            // Switch only to a strictly closer centroid; keeps duplicates stable.
            for (std::size_t c = 0; c < k; ++c) {
                double d = sq_dist(pts.row(r), centroids.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (best != run.assignments[r]) changed = true;
            run.assignments[r] = best;
            inertia += best_d;
        }
        run.trace.push_back(inertia);
        run.iterations = it + 1;
        if (!changed && it > 0) break;

        Matrix sums(k, pts.cols);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t r = 0; r < pts.rows; ++r) {
            ++counts[run.assignments[r]];
            for (std::size_t c = 0; c < pts.cols; ++c) sums(run.assignments[r], c) += pts(r, c);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t j = 0; j < pts.cols; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        }
        // Empty clusters take the point farthest from its centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = none;
            double far_d = -1;
            for (std::size_t r = 0; r < pts.rows; ++r) {
                if (counts[run.assignments[r]] < 2) continue;
                double d = sq_dist(pts.row(r), centroids.row(run.assignments[r]));
                if (d > far_d) {
                    far_d = d;
                    far = r;
                }
            }
            if (far == none) break;
            --counts[run.assignments[far]];
            run.assignments[far] = c;
            counts[c] = 1;
            for (std::size_t j = 0; j < pts.cols; ++j) centroids(c, j) = pts(far, j);
        }
    }
    run.centroids = std::move(centroids);
    return run;
}

}  // namespace

std::pair<std::vector<PointSilhouette>, double> silhouette(const Matrix& pts, std::span<const std::size_t> assignments,
                                                           std::size_t k) {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) ++sizes.at(a);
    std::vector<PointSilhouette> out(pts.rows);
    double total = 0;
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < pts.rows; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < pts.rows; ++j) {
            if (i == j) continue;
            sums[assignments[j]] += std::sqrt(sq_dist(pts.row(i), pts.row(j)));
        }
        const std::size_t own = assignments[i];
        PointSilhouette p;
        p.a = sizes[own] > 1 ? sums[own] / static_cast<double>(sizes[own] - 1) : 0.0;
        p.b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own && sizes[c] > 0) p.b = std::min(p.b, sums[c] / static_cast<double>(sizes[c]));
        if (!std::isfinite(p.b)) p.b = 0;
        const double denom = std::max(p.a, p.b);
        p.s = (sizes[own] > 1 && denom > 0) ? (p.b - p.a) / denom : 0.0;
        total += p.s;
        out[i] = p;
    }
    return {std::move(out), pts.rows ? total / static_cast<double>(pts.rows) : 0.0};
}

ClusteringResult kmeans(const Matrix& pts, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    if (k < 2) throw Error(ErrorCode::KTooSmall, "k must be at least 2 (got " + std::to_string(k) + ")");
    if (k > pts.rows)
        throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(pts.rows) + " rows");

    std::mt19937_64 rng(seed);
    LloydRun best;
    double best_inertia = std::numeric_limits<double>::infinity();
    for (std::size_t attempt = 0; attempt < std::max<std::size_t>(options.restarts, 1); ++attempt) {
        LloydRun run = lloyd(pts, plus_plus_seeds(pts, k, rng), k, std::max<std::size_t>(options.max_iterations, 1));
        if (run.trace.back() < best_inertia) {
            best_inertia = run.trace.back();
            best = std::move(run);
        }
    }

    ClusteringResult result;
    result.k = k;
    result.assignments = std::move(best.assignments);
    result.centroids = std::move(best.centroids);
    result.inertia_trace = std::move(best.trace);
    result.iterations = best.iterations;
    auto [points, overall] = silhouette(pts, result.assignments, k);
    result.per_point = std::move(points);
    result.silhouette = overall;
    return result;
}

KSelection select_k(const Matrix& pts, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                    const KMeansOptions& options) {
    if (k_min > k_max) throw Error(ErrorCode::InvalidInput, "empty k range");
    KSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = k_min; k <= k_max; ++k) {
        auto r = kmeans(pts, k, seed, options);
        sel.scores.emplace_back(k, r.silhouette);
        if (r.silhouette > best) {
            best = r.silhouette;
            sel.best_k = k;
        }
    }
    return sel;
}

}  // namespace forkscope
