#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "forkscope/clustering.hpp"
#include "forkscope/error.hpp"

namespace forkscope {

namespace {

double abs_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return 0.0;
    return std::min(1.0, std::fabs(sxy / std::sqrt(sxx * syy)));
}

// Feature-class and feature-feature correlations, computed once.
class MeritTable {
public:
    MeritTable(const Matrix& pts, std::span<const std::size_t> labels) : cols_(pts.cols) {
        std::set<std::size_t> classes(labels.begin(), labels.end());
        std::vector<std::vector<double>> columns(pts.cols);
        for (std::size_t c = 0; c < pts.cols; ++c) columns[c] = pts.column(c);

        class_corr_.assign(pts.cols, 0.0);
        for (std::size_t cls : classes) {
            std::vector<double> indicator(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) indicator[i] = labels[i] == cls ? 1.0 : 0.0;
            for (std::size_t c = 0; c < pts.cols; ++c) class_corr_[c] += abs_correlation(columns[c], indicator);
        }
        if (!classes.empty())
            for (double& v : class_corr_) v /= static_cast<double>(classes.size());

        pair_corr_.assign(pts.cols * pts.cols, 0.0);
        for (std::size_t i = 0; i < pts.cols; ++i) {
            pair_corr_[i * cols_ + i] = 1.0;
            for (std::size_t j = i + 1; j < pts.cols; ++j) {
                double r = abs_correlation(columns[i], columns[j]);
                pair_corr_[i * cols_ + j] = r;
                pair_corr_[j * cols_ + i] = r;
            }
        }
    }

    // `subset` must be in canonical (name) order for reproducible rounding.
    double merit(std::span<const std::size_t> subset) const {
        if (subset.empty()) return 0.0;
        const auto k = static_cast<double>(subset.size());
        double rcf = 0;
        for (auto f : subset) rcf += class_corr_[f];
        rcf /= k;
        double rff = 0;
        std::size_t pairs = 0;
        for (std::size_t a = 0; a < subset.size(); ++a)
            for (std::size_t b = a + 1; b < subset.size(); ++b) {
                rff += pair_corr_[subset[a] * cols_ + subset[b]];
                ++pairs;
            }
        if (pairs) rff /= static_cast<double>(pairs);
        return k * rcf / std::sqrt(k + k * (k - 1) * rff);
    }

private:
    std::size_t cols_;
    std::vector<double> class_corr_;
    std::vector<double> pair_corr_;
};

constexpr double kImprovementEps = 1e-12;

}  // namespace

double cfs_merit(const Matrix& pts, std::span<const std::size_t> labels, std::span<const std::size_t> subset) {
    if (labels.size() != pts.rows) throw Error(ErrorCode::LabelLengthMismatch, "labels do not match rows");
    return MeritTable(pts, labels).merit(subset);
}

AttributeSelection best_first_attributes(const Matrix& pts, std::span<const std::string> names,
                                         std::span<const std::size_t> labels, std::size_t stop_after) {
    if (labels.size() != pts.rows)
        throw Error(ErrorCode::LabelLengthMismatch,
                    std::to_string(labels.size()) + " labels for " + std::to_string(pts.rows) + " rows");
    if (names.size() != pts.cols) throw Error(ErrorCode::InvalidInput, "one name per column required");

    AttributeSelection result;
    if (pts.cols == 0) return result;

    // Canonical positions: columns sorted by name.
    std::vector<std::size_t> by_name(pts.cols);
    std::iota(by_name.begin(), by_name.end(), 0);
    std::sort(by_name.begin(), by_name.end(), [&](auto a, auto b) { return names[a] < names[b]; });

    const MeritTable table(pts, labels);
    using Subset = std::vector<std::size_t>;  // canonical positions, ascending
    auto columns_of = [&](const Subset& s) {
        Subset cols;
        for (auto p : s) cols.push_back(by_name[p]);
        return cols;
    };
    auto names_of = [&](const Subset& s) {
        std::vector<std::string> out;
        for (auto p : s) out.push_back(names[by_name[p]]);
        return out;
    };

    // Open list ordered by merit (desc), then subset (asc).
    auto cmp = [](const std::pair<double, Subset>& x, const std::pair<double, Subset>& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    };
    std::set<std::pair<double, Subset>, decltype(cmp)> open(cmp);
    std::set<Subset> seen;

    Subset best_subset;
    double best_merit = 0.0;
    open.insert({0.0, {}});
    seen.insert({});
    std::size_t stale = 0;

    while (!open.empty() && stale < std::max<std::size_t>(stop_after, 1)) {
        Subset node = open.begin()->second;
        open.erase(open.begin());

        bool improved = false;
        for (std::size_t p = 0; p < pts.cols; ++p) {
            if (std::binary_search(node.begin(), node.end(), p)) continue;
            Subset child = node;
            child.insert(std::upper_bound(child.begin(), child.end(), p), p);
            if (!seen.insert(child).second) continue;
            // MeritTable wants canonical order; by_name is monotone in p.
            double m = table.merit(columns_of(child));
            result.trace.emplace_back(names_of(child), m);
            open.insert({m, child});
            if (m > best_merit + kImprovementEps) {
                best_merit = m;
                best_subset = child;
                improved = true;
            }
        }
        stale = improved ? 0 : stale + 1;
    }

    result.selected = names_of(best_subset);
    result.merit = best_merit;
    return result;
}

}  // namespace forkscope
