#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "forkscope/error.hpp"
#include "forkscope/lineage.hpp"

using namespace forkscope;

namespace {

constexpr UnixSeconds kDay = kSecondsPerDay;
constexpr UnixSeconds kStart = 1690000000;

// Parent p0..p{n-1}, one day apart; every commit appends a new function to a
// rotating file so that each snapshot differs in tokens from the previous one.
fixtures::Builder parent_builder(std::size_t n, std::uint64_t seed, const std::string& prefix = "p") {
    std::mt19937_64 rng(seed);
    fixtures::Builder b("upstream");
    std::vector<std::string> files{fixtures::c_source(rng, 3, "core"), fixtures::c_source(rng, 3, "net"),
                                   fixtures::c_source(rng, 3, "util")};
    for (std::size_t i = 0; i < n; ++i) {
        files[i % 3] += fixtures::c_source(rng, 1, "v" + std::to_string(i));
        b.commit(prefix + std::to_string(i), kStart + static_cast<UnixSeconds>(i) * kDay,
                 fixtures::tree({{"src/core.cpp", files[0]}, {"src/net.cpp", files[1]}, {"src/util.h", files[2]}}), "dev" + std::to_string(i % 2));
    }
    return b;
}

RepoHistory fork_of(const RepoHistory& parent, std::size_t shared, const std::vector<std::pair<std::string, UnixSeconds>>& own,
                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CommitRecord> prefix(parent.commits().begin(), parent.commits().begin() + static_cast<long>(shared));
    fixtures::Builder b("fork");
    b.adopt(prefix, checkout_snapshot(parent, prefix.back().id));
    for (const auto& [id, t] : own) {
        SnapshotTree next = b.current();
        next["src/coin.cpp"].lines = split_lines(fixtures::c_source(rng, 2, "coin" + id));
        b.commit(id, t, next, "forker");
    }
    return b.build();
}

}  // namespace

TEST_CASE("H1 recovers a planted divergence") {
    RepoHistory parent = parent_builder(10, 1).build();
    RepoHistory child = fork_of(parent, 5, {{"d5", 1700000000}}, 2);
    ForkReport r = heuristic1(child, parent);
    CHECK(r.verdict == Verdict::Forked);
    CHECK(r.heuristic == Heuristic::H1);
    CHECK(r.fork_commit_child == "p4");
    CHECK(r.parent_version == "p4");
    CHECK(r.fork_time == 1700000000);
    REQUIRE(r.similarity_at_fork);
    CHECK(*r.similarity_at_fork > 0.5);
    CHECK(*r.similarity_at_fork <= 1.0);
}

TEST_CASE("H1 reports identical and disjoint histories") {
    RepoHistory parent = parent_builder(8, 1).build();
    fixtures::Builder prefix("mirror");
    std::vector<CommitRecord> first(parent.commits().begin(), parent.commits().begin() + 6);
    prefix.adopt(first, {});
    CHECK(heuristic1(prefix.build(), parent).verdict == Verdict::Identical);

    // Parent contained in the child (the child simply carries on).
    RepoHistory longer = fork_of(parent, 8, {}, 3);
    fixtures::Builder ext("ext");
    ext.adopt(parent.commits(), checkout_snapshot(parent, parent.head()));
    ext.put("extra.c", "int extra;\n").commit_staged("x1", kStart + 100 * kDay);
    CHECK(heuristic1(ext.build(), parent).verdict == Verdict::Identical);
    (void)longer;

    RepoHistory other = parent_builder(8, 9, "q").build();
    CHECK(heuristic1(other, parent).verdict == Verdict::NotForked);
}

TEST_CASE("H1 requires the probe to match") {
    RepoHistory parent = parent_builder(20, 4).build();
    std::vector<std::pair<std::string, UnixSeconds>> own;
    for (int i = 0; i < 12; ++i) own.emplace_back("own" + std::to_string(i), kStart + (40 + i) * kDay);
    // Three shared commits are fewer than the 10-commit probe on a long child.
    CHECK(heuristic1(fork_of(parent, 3, own, 5), parent).verdict == Verdict::NotForked);
    CHECK(heuristic1(fork_of(parent, 3, own, 5), parent, 3).verdict == Verdict::Forked);
    ForkReport deep = heuristic1(fork_of(parent, 12, own, 5), parent);
    CHECK(deep.verdict == Verdict::Forked);
    CHECK(deep.fork_commit_child == "p11");
    CHECK(*deep.fork_time > parent.at("p11").author_time);
}

TEST_CASE("H2 finds the parent version behind a bulk upload") {
    RepoHistory parent = parent_builder(12, 6).build();
    fixtures::Builder child("bulk");
    SnapshotTree upload = checkout_snapshot(parent, "p7");
    child.commit("u0", parent.at("p7").author_time + kDay / 2, upload, "uploader");
    std::mt19937_64 rng(1);
    for (int i = 1; i <= 3; ++i) {
        child.put("src/core.cpp", fixtures::rename_identifiers(child.current().at("src/core.cpp").text(), "x") + "\nint edit" +
                                      std::to_string(i) + ";\n");
        child.commit_staged("u" + std::to_string(i), parent.at("p7").author_time + i * kDay, "uploader");
    }
    ForkReport r = heuristic2(child.build(), parent, 0.929);
    CHECK(r.verdict == Verdict::Forked);
    CHECK(r.heuristic == Heuristic::H2);
    CHECK(r.parent_version == "p7");
    CHECK(r.fork_commit_child == "u0");
    REQUIRE(r.similarity_at_fork);
    CHECK(*r.similarity_at_fork >= 0.99);
    CHECK_FALSE(r.sampled);

    Heuristic2Options sampled;
    sampled.stride = 3;
    ForkReport s = heuristic2(child.build(), parent, 0.929, sampled);
    CHECK(s.sampled);
    CHECK(*s.similarity_at_fork <= *r.similarity_at_fork);
}

TEST_CASE("H2 rejects unrelated uploads and empty windows") {
    RepoHistory parent = parent_builder(6, 7).build();
    std::mt19937_64 rng(99);
    fixtures::Builder other("other");
    SnapshotTree t;
    for (int f = 0; f < 3; ++f) {
        std::string src;
        for (int i = 0; i < 40; ++i) src += "x" + std::to_string(i) + " @ y ;\n";
        t["f" + std::to_string(f) + ".c"].lines = split_lines(src);
    }
    other.commit("o0", parent.at("p5").author_time + kDay, t);
    ForkReport unrelated = heuristic2(other.build(), parent, 0.929);
    CHECK(unrelated.verdict == Verdict::NotForked);
    CHECK(*unrelated.similarity_at_fork < 0.929);

    fixtures::Builder early("early");
    early.commit("e0", kStart - 400 * kDay, checkout_snapshot(parent, "p3"));
    CHECK(heuristic2(early.build(), parent, 0.929).verdict == Verdict::Undetermined);
    CHECK_THROWS_AS(heuristic2(early.build(), parent, 0.0), Error);
}

TEST_CASE("largest change commit prefers the earliest on ties") {
    fixtures::Builder b("r");
    b.put("a.c", "a").put("b.c", "b").commit_staged("c1", 100);
    b.put("c.c", "c").put("d.c", "d").commit_staged("c2", 200);
    b.put("e.c", "e").commit_staged("c3", 300);
    CHECK(largest_change_commit(b.build()).id == "c1");
}

TEST_CASE("threshold derivation") {
    ThresholdDerivation d = derive_threshold({0.90, 1.00});
    CHECK(d.mean == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(d.three_sigma == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(d.threshold == doctest::Approx(0.80).epsilon(1e-12));
    ThresholdDerivation flat = derive_threshold({0.9, 0.9, 0.9});
    CHECK(flat.threshold == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(derive_threshold({0.0, 1.0}).threshold == 0.0);
    try {
        derive_threshold({0.9});
        FAIL("expected TooFewScores");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooFewScores);
    }
}

TEST_CASE("sweep: three H1 forks, one bulk upload, one unrelated repository") {
    RepoHistory parent = parent_builder(30, 11).build();
    std::vector<RepoHistory> kids;
    for (int i = 0; i < 3; ++i)
        kids.push_back(fork_of(parent, 12 + static_cast<std::size_t>(i),
                               {{"k" + std::to_string(i), parent.at("p" + std::to_string(12 + i)).author_time + 3600}},
                               static_cast<std::uint64_t>(20 + i)));
    fixtures::Builder bulk("bulk");
    bulk.commit("b0", parent.at("p20").author_time + 60, checkout_snapshot(parent, "p20"));
    kids.push_back(bulk.build());
    fixtures::Builder unrelated("unrelated");
    SnapshotTree t;
    t["main.c"].lines = split_lines("int main(void) { return 0; }\n");
    unrelated.commit("z0", parent.at("p25").author_time, t);
    kids.push_back(unrelated.build());

    std::vector<const RepoHistory*> ptrs;
    for (const auto& k : kids) ptrs.push_back(&k);
    LineageConfig cfg;
    cfg.jobs = 2;
    LineageResult res = lineage_sweep(ptrs, parent, cfg);
    REQUIRE(res.reports.size() == 5);
    for (int i = 0; i < 3; ++i) {
        CHECK(res.reports[i].verdict == Verdict::Forked);
        CHECK(res.reports[i].heuristic == Heuristic::H1);
    }
    CHECK(res.reports[3].verdict == Verdict::Forked);
    CHECK(res.reports[3].heuristic == Heuristic::H2);
    CHECK(res.reports[3].parent_version == "p20");
    CHECK(res.reports[4].verdict == Verdict::NotForked);
    CHECK_FALSE(res.threshold.fallback);
    CHECK(res.threshold.sample_scores.size() == 3);

    std::vector<const RepoHistory*> reversed(ptrs.rbegin(), ptrs.rend());
    LineageResult rev = lineage_sweep(reversed, parent, cfg);
    for (std::size_t i = 0; i < 5; ++i) CHECK(rev.reports[4 - i].verdict == res.reports[i].verdict);
    CHECK(rev.threshold.threshold == res.threshold.threshold);

    CHECK(lineage_sweep({}, parent, cfg).reports.empty());
    LineageResult single = lineage_sweep({ptrs[0]}, parent, cfg);
    CHECK(single.threshold.fallback);
    CHECK(single.threshold.threshold == kDefaultForkThreshold);
}
