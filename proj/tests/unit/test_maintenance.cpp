#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "forkscope/error.hpp"
#include "forkscope/maintenance.hpp"

using namespace forkscope;

namespace {

constexpr UnixSeconds kAsOf = 1700000000;

// One commit per entry: (seconds before as_of, added lines, deleted lines, author).
RepoHistory activity(const std::vector<std::tuple<UnixSeconds, int, int, std::string>>& spec) {
    std::vector<CommitRecord> commits;
    std::string prev;
    int n = 0;
    for (const auto& [ago, add, del, author] : spec) {
        CommitRecord c;
        c.id = "c" + std::to_string(n++);
        if (!prev.empty()) c.parents.push_back(prev);
        c.author_time = kAsOf - ago;
        c.author_id = author;
        FileChange f;
        f.path = "f" + std::to_string(n) + ".c";
        f.status = del ? ChangeStatus::Modified : ChangeStatus::Added;
        for (int i = 0; i < add; ++i) f.added_lines.push_back("+" + std::to_string(i));
        for (int i = 0; i < del; ++i) f.deleted_lines.push_back("-" + std::to_string(i));
        c.file_changes.push_back(f);
        prev = c.id;
        commits.push_back(c);
    }
    return RepoHistory::build("r", commits, false);
}

}  // namespace

TEST_CASE("MDE follows the worked example and conventions") {
    const std::vector<std::size_t> periods{6, 3, 6};
    CHECK(compute_mde(periods, 12) == doctest::Approx(15.0 / 36.0).epsilon(1e-12));
    CHECK(std::fabs(compute_mde(periods, 12) - 0.41) <= 0.0067);
    const std::vector<std::size_t> one{5};
    CHECK(compute_mde(one, 5) == 1.0);
    const std::vector<std::size_t> none{0, 0};
    CHECK(compute_mde(none, 0) == 0.0);
    const std::vector<std::size_t> too_many{4};
    CHECK_THROWS_AS(compute_mde(too_many, 3), Error);
}

TEST_CASE("window statistics use population standard deviation") {
    RepoHistory h = activity({{100, 10, 0, "a"}, {50, 20, 0, "b"}});
    WindowStats w = window_stats(h, kAsOf, 3 * kSecondsPerMonth);
    CHECK(w.mean_additions == 15.0);
    CHECK(w.std_additions == 5.0);
    CHECK(w.mean_commit_interval_secs == 50.0);
    CHECK(w.std_commit_interval_secs == 0.0);
}

TEST_CASE("degenerate windows are zero") {
    RepoHistory old = activity({{400 * kSecondsPerDay, 3, 1, "a"}});
    WindowStats empty = window_stats(old, kAsOf, 3 * kSecondsPerMonth);
    CHECK(empty.mean_additions == 0);
    CHECK(empty.std_additions == 0);
    CHECK(empty.mean_deletions == 0);
    CHECK(empty.std_deletions == 0);
    CHECK(empty.mean_commit_interval_secs == 0);
    CHECK(empty.std_commit_interval_secs == 0);

    RepoHistory single = activity({{10, 7, 2, "a"}});
    WindowStats one = window_stats(single, kAsOf, 3 * kSecondsPerMonth);
    CHECK(one.mean_additions == 7);
    CHECK(one.std_additions == 0);
    CHECK(one.mean_deletions == 2);
    CHECK(one.mean_commit_interval_secs == 0);
    CHECK(one.std_commit_interval_secs == 0);

    RepoHistory daily = activity({{2 * kSecondsPerDay, 1, 0, "a"}, {kSecondsPerDay, 1, 0, "a"}});
    CHECK(window_stats(daily, kAsOf, kSecondsPerMonth).mean_commit_interval_secs == 86400.0);
}

TEST_CASE("windows are half-open at the far end") {
    const UnixSeconds w = 3 * kSecondsPerMonth;
    RepoHistory h = activity({{w, 100, 0, "a"}, {w - 1, 4, 0, "a"}, {0, 6, 0, "a"}});
    WindowStats s = window_stats(h, kAsOf, w);
    CHECK(s.mean_additions == 5.0);
}

TEST_CASE("feature vector has 32 named columns in a fixed order") {
    RepoHistory h = activity({{200 * kSecondsPerDay, 5, 0, "a"}, {80 * kSecondsPerDay, 3, 1, "b"}, {10, 2, 2, "a"}});
    HostingMetadata meta;
    meta.star = 10;
    meta.watch = 2;
    meta.fork_count = 3;
    meta.issues_open = 1;
    meta.issues_closed = 4;
    meta.issues_total = 5;
    meta.branches = 2;
    meta.releases = 1;
    meta.pull_requests = 6;
    FeatureVector fv = extract_features(h, meta, kAsOf);
    auto flat = fv.flatten();
    CHECK(flat.size() == 32);
    CHECK(feature_names().size() == 32);
    std::set<std::string_view> unique(feature_names().begin(), feature_names().end());
    CHECK(unique.size() == 32);
    CHECK(flat[0] == 3);   // commits
    CHECK(flat[3] == 2);   // contributors
    CHECK(flat[4] == 6);   // pull_requests
    CHECK(flat[9] == 10);  // star
    CHECK(flat[11] == 5);  // issues
    for (std::size_t i = 5; i < 8; ++i) {
        CHECK(flat[i] >= 0.0);
        CHECK(flat[i] <= 1.0);
    }
    // 12-month MDE with one period: both contributors are active.
    CHECK(fv.mde.mde_12m == 1.0);
    // Quarters of the last 360 days hold {}, {a}, {}, {a, b}.
    CHECK(fv.mde.mde_3m == doctest::Approx((0.0 + 0.5 + 0.0 + 1.0) / 4.0));
    CHECK(fv.mde.mde_6m == doctest::Approx((0.5 + 1.0) / 2.0));
    CHECK(feature_names()[14] == "mean_additions_3m");
    CHECK(feature_names()[31] == "std_commit_interval_12m");
}

TEST_CASE("commits after as_of are ignored") {
    RepoHistory h = activity({{100, 1, 0, "a"}, {-100, 1, 0, "b"}});
    FeatureVector fv = extract_features(h, HostingMetadata{}, kAsOf);
    CHECK(fv.engagement.commits == 1);
    CHECK(fv.engagement.contributors == 1);
}

TEST_CASE("standardize produces z-scores and flags constant columns") {
    Matrix m = Matrix::from_rows({{1, 7}, {3, 7}});
    Standardized s = standardize(m);
    CHECK(s.z(0, 0) == -1.0);
    CHECK(s.z(1, 0) == 1.0);
    CHECK(s.z(0, 1) == 0.0);
    CHECK(s.zero_variance[1]);
    CHECK_FALSE(s.zero_variance[0]);
    Matrix constant = Matrix::from_rows({{7}, {7}, {7}});
    Standardized c = standardize(constant);
    CHECK(c.zero_variance[0]);
    for (std::size_t r = 0; r < 3; ++r) CHECK(c.z(r, 0) == 0.0);
    try {
        standardize(std::vector<FeatureVector>{});
        FAIL("expected TooFewVectors");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooFewVectors);
    }
}
