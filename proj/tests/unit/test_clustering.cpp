#include <doctest.h>

#include <algorithm>
#include <random>

#include "forkscope/clustering.hpp"
#include "forkscope/error.hpp"
#include "oracles.hpp"

using namespace forkscope;

namespace {

Matrix blobs(std::size_t count, std::size_t per_blob, double separation, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < count; ++b)
        for (std::size_t i = 0; i < per_blob; ++i)
            rows.push_back({separation * static_cast<double>(b % 2) + noise(rng),
                            separation * static_cast<double>(b / 2) + noise(rng)});
    return Matrix::from_rows(rows);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::StageFailed;
}

}  // namespace

TEST_CASE("two one-dimensional blobs split with silhouette near 0.990") {
    Matrix m = Matrix::from_rows({{0.0}, {0.1}, {10.0}, {10.1}});
    ClusteringResult r = kmeans(m, 2, 1);
    CHECK(r.assignments[0] == r.assignments[1]);
    CHECK(r.assignments[2] == r.assignments[3]);
    CHECK(r.assignments[0] != r.assignments[2]);
    const double expected = ((1 - 0.1 / 10.05) + (1 - 0.1 / 9.95)) / 2.0;
    CHECK(r.silhouette == doctest::Approx(expected).epsilon(1e-9));
    CHECK(r.silhouette == doctest::Approx(0.990).epsilon(1e-3));
    CHECK(r.per_point[0].a == doctest::Approx(0.1));
    CHECK(r.per_point[0].b == doctest::Approx(10.05));
}

TEST_CASE("singleton clusters score zero") {
    Matrix m = Matrix::from_rows({{0.0}, {1.0}, {5.0}});
    ClusteringResult r = kmeans(m, 3, 9);
    CHECK(r.silhouette == 0.0);
    for (const auto& p : r.per_point) CHECK(p.s == 0.0);
}

TEST_CASE("k-means is reproducible for a seed and its objective never rises") {
    Matrix m = blobs(3, 30, 5.0, 1.5, 11);
    ClusteringResult a = kmeans(m, 3, 42);
    ClusteringResult b = kmeans(m, 3, 42);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centroids.data == b.centroids.data);
    for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-9);
    std::vector<std::size_t> sizes(3, 0);
    for (auto c : a.assignments) ++sizes[c];
    for (auto s : sizes) CHECK(s > 0);
    for (const auto& p : a.per_point) {
        CHECK(p.s >= -1.0);
        CHECK(p.s <= 1.0);
    }
}

TEST_CASE("k bounds are enforced") {
    Matrix m = Matrix::from_rows({{0.0}, {1.0}});
    CHECK(code_of([&] { kmeans(m, 3, 1); }) == ErrorCode::KTooLarge);
    CHECK(code_of([&] { kmeans(m, 1, 1); }) == ErrorCode::KTooSmall);
}

TEST_CASE("select_k finds the planted blob count") {
    Matrix two = blobs(2, 20, 40.0, 1.0, 5);
    CHECK(select_k(two, 2, 5, 42).best_k == 2);
    KSelection fixed = select_k(two, 2, 2, 42);
    CHECK(fixed.best_k == 2);
    CHECK(fixed.scores.size() == 1);
    Matrix four = blobs(4, 50, 40.0, 1.0, 6);
    KSelection s = select_k(four, 2, 8, 42);
    CHECK(s.best_k == 4);
    CHECK(s.scores.size() == 7);
}

TEST_CASE("best-first search keeps the label-equal feature and drops noise") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 40; ++i) {
        const std::size_t label = i % 2;
        std::vector<double> r;
        for (std::size_t c = 0; c < 10; ++c) r.push_back(c == 3 ? static_cast<double>(label) : noise(rng));
        rows.push_back(r);
        labels.push_back(label);
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < 10; ++c) names.push_back("f" + std::to_string(c));
    Matrix m = Matrix::from_rows(rows);
    AttributeSelection sel = best_first_attributes(m, names, labels);
    oracles::CfsBest best = oracles::exhaustive_cfs(rows, labels);
    CHECK(sel.selected == std::vector<std::string>{"f3"});
    CHECK(best.subset == std::vector<std::size_t>{3});
    CHECK(sel.merit == doctest::Approx(best.merit).epsilon(1e-9));
    CHECK(sel.merit == doctest::Approx(cfs_merit(m, labels, std::vector<std::size_t>{3})));
}

TEST_CASE("duplicated informative features are selected once") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 30; ++i) {
        const std::size_t label = i % 3 == 0 ? 1 : 0;
        const double signal = static_cast<double>(label) + 0.1 * noise(rng);
        rows.push_back({noise(rng), signal, noise(rng), signal, noise(rng)});
        labels.push_back(label);
    }
    std::vector<std::string> names{"a", "b", "c", "d", "e"};
    AttributeSelection sel = best_first_attributes(Matrix::from_rows(rows), names, labels);
    const long informative = std::count_if(sel.selected.begin(), sel.selected.end(),
                                           [](const std::string& n) { return n == "b" || n == "d"; });
    CHECK(informative == 1);
    oracles::CfsBest best = oracles::exhaustive_cfs(rows, labels);
    CHECK(sel.merit == doctest::Approx(best.merit).epsilon(1e-9));
}

TEST_CASE("no candidate features gives an empty selection") {
    Matrix m(4, 0);
    std::vector<std::string> names;
    std::vector<std::size_t> labels{0, 0, 1, 1};
    AttributeSelection sel = best_first_attributes(m, names, labels);
    CHECK(sel.selected.empty());
    CHECK(sel.merit == 0.0);
    std::vector<std::size_t> short_labels{0};
    CHECK(code_of([&] { best_first_attributes(Matrix(4, 1), std::vector<std::string>{"x"}, short_labels); }) ==
          ErrorCode::LabelLengthMismatch);
}

TEST_CASE("selection does not depend on column order") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 36; ++i) {
        const std::size_t label = i % 3;
        rows.push_back({noise(rng), static_cast<double>(label) + 0.5 * noise(rng), noise(rng),
                        static_cast<double>(label == 2) + 0.3 * noise(rng)});
        labels.push_back(label);
    }
    std::vector<std::string> names{"w", "x", "y", "z"};
    AttributeSelection forward = best_first_attributes(Matrix::from_rows(rows), names, labels);
    std::vector<std::vector<double>> reversed;
    for (const auto& r : rows) reversed.emplace_back(r.rbegin(), r.rend());
    std::vector<std::string> rnames(names.rbegin(), names.rend());
    AttributeSelection backward = best_first_attributes(Matrix::from_rows(reversed), rnames, labels);
    CHECK(forward.selected == backward.selected);
    CHECK(forward.merit == backward.merit);
}
