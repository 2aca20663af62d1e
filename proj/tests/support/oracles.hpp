#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace oracles {

// Greedy tiling computed by brute force: every round compares every pair of
// start positions directly and takes the longest runs in (i, j) order. Inputs
// are oriented the same way the library orients them. Returns matched tokens.
std::size_t brute_force_tiling(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b, std::size_t min_match);

// Every subset of the columns scored with a from-scratch CFS merit. Returns
// the best subset (column indices, ascending) and its merit.
struct CfsBest {
    std::vector<std::size_t> subset;
    double merit = 0;
};
CfsBest exhaustive_cfs(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& labels);
double cfs_merit_from_scratch(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& labels,
                              const std::vector<std::size_t>& subset);

double mean(const std::vector<double>& v);
double population_std(const std::vector<double>& v);

// Textbook Pearson r via the covariance definition.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Kruskal-Wallis H by explicit mid-rank table (no tie correction when no ties).
double kruskal_h(const std::vector<std::vector<double>>& groups);

}  // namespace oracles
