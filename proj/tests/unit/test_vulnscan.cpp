#include <doctest.h>

#include <functional>
#include <nlohmann/json.hpp>
#include <set>

#include "fixtures.hpp"
#include "forkscope/error.hpp"
#include "forkscope/vulnscan.hpp"
#include "vuln_corpus.hpp"

using namespace forkscope;
using nlohmann::json;

namespace {

constexpr UnixSeconds kDay = kSecondsPerDay;

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::StageFailed;
}

VulnFinding patched(const std::string& repo, const std::string& cve, UnixSeconds days) {
    VulnFinding f;
    f.repo_id = repo;
    f.cve_id = cve;
    f.status = VulnStatus::Patched;
    f.introduced_at = 0;
    f.patched_at = days * kDay;
    f.time_to_patch_secs = days * kDay;
    return f;
}

VulnFinding with_status(const std::string& repo, const std::string& cve, VulnStatus s) {
    VulnFinding f;
    f.repo_id = repo;
    f.cve_id = cve;
    f.status = s;
    return f;
}

bool commit_exists(const RepoHistory& h, const std::optional<CommitId>& id, const std::optional<UnixSeconds>& t) {
    if (!id) return !t;
    const CommitRecord* c = h.find(*id);
    return c && t && c->author_time == *t;
}

}  // namespace

TEST_CASE("normalize_code strips whitespace only") {
    CHECK(normalize_code("a = b + 1;\n") == "a=b+1;");
    CHECK(normalize_code("\t \n") == "");
    CHECK(normalize_code("x\xC2\xA0y\xE2\x80\x83z\xE3\x80\x80w") == "xyzw");
    CHECK(normalize_code("\"s t\"") == "\"st\"");
    CHECK(normalize_code("caf\xC3\xA9") == "caf\xC3\xA9");
}

TEST_CASE("scan_latest matches verbatim and reformatted fragments") {
    const VulnSignature sig = fixtures::overflow_signature();
    auto verbatim = fixtures::tree({{"src/a.c", "int f() {\nmemcpy(buf, src, len);\nbuf[len] = 0;\n}\n"}});
    auto m = scan_latest(verbatim, sig);
    CHECK(m.matched);
    CHECK(m.files == std::vector<std::string>{"src/a.c"});

    auto reflowed = fixtures::tree({{"src/b.h", "  memcpy( buf,\n\tsrc ,len )\n;buf[ len ]=\n 0 ;\n"}});
    CHECK(scan_latest(reflowed, sig).matched);

    auto docs = fixtures::tree({{"README.txt", "memcpy(buf, src, len);\nbuf[len] = 0;\n"}});
    CHECK_FALSE(scan_latest(docs, sig).matched);

    // Halves of one fragment split over two files do not match.
    auto split = fixtures::tree({{"a.c", "memcpy(buf, src, len);\n"}, {"b.c", "buf[len] = 0;\n"}});
    CHECK_FALSE(scan_latest(split, sig).matched);
}

TEST_CASE("match mode All needs every fragment and Any needs one") {
    VulnSignature sig = fixtures::overflow_signature();
    sig.vuln_fragments = {"strcpy(d, s);", "gets(line);"};
    auto one = fixtures::tree({{"x.c", "strcpy(d, s);\n"}});
    auto both = fixtures::tree({{"x.c", "strcpy(d, s);\n"}, {"y.c", "gets(line);\n"}});
    CHECK_FALSE(scan_latest(one, sig).matched);
    CHECK(scan_latest(both, sig).matched);
    sig.match_mode = MatchMode::Any;
    CHECK(scan_latest(one, sig).matched);
}

TEST_CASE("reformatting a snapshot does not change the latest-scan verdict") {
    const VulnSignature sig = fixtures::overflow_signature();
    auto c = fixtures::scripted_vuln_cases();
    std::mt19937_64 rng(5);
    for (const auto& vc : c) {
        SnapshotTree head = checkout_snapshot(vc.history, vc.history.head());
        SnapshotTree reformatted;
        for (const auto& [path, file] : head) {
            std::string text;
            for (char ch : file.text()) {
                text += ch;
                if (ch == ';' || ch == ',') text += (rng() % 2) ? "\n   " : " \t";
            }
            reformatted[path].lines = split_lines(text);
        }
        CHECK(scan_latest(head, vc.sig).matched == scan_latest(reformatted, vc.sig).matched);
    }
}

TEST_CASE("scripted histories give the expected verdicts and agree with the checkout oracle") {
    for (const auto& vc : fixtures::scripted_vuln_cases()) {
        CAPTURE(vc.name);
        const VulnFinding fast = scan_history(vc.history, vc.sig);
        const VulnFinding slow = scan_history_oracle(vc.history, vc.sig);
        CHECK(fast == slow);
        REQUIRE(vc.expected);
        CHECK(fast.status == *vc.expected);
        CHECK(commit_exists(vc.history, fast.introduced_commit, fast.introduced_at));
        CHECK(commit_exists(vc.history, fast.patched_commit, fast.patched_at));
    }
}

TEST_CASE("introduced at commit 3 and patched at commit 7") {
    const auto cases = fixtures::scripted_vuln_cases();
    const auto& vc = cases.front();
    REQUIRE(vc.name == "introduced-then-patched");
    const VulnFinding f = scan_history(vc.history, vc.sig);
    CHECK(f.status == VulnStatus::Patched);
    CHECK(f.introduced_commit == std::optional<CommitId>("c3"));
    CHECK(f.patched_commit == std::optional<CommitId>("c7"));
    CHECK(*f.introduced_at == vc.history.find("c3")->author_time);
    CHECK(*f.patched_at == vc.history.find("c7")->author_time);
    CHECK(*f.time_to_patch_secs == *f.patched_at - vc.sig.reference_patch_time);
}

TEST_CASE("status invariants on the scripted cases") {
    for (const auto& vc : fixtures::scripted_vuln_cases()) {
        CAPTURE(vc.name);
        const VulnFinding f = scan_history(vc.history, vc.sig);
        switch (f.status) {
            case VulnStatus::Patched:
                REQUIRE(f.introduced_at);
                REQUIRE(f.patched_at);
                CHECK(*f.introduced_at <= *f.patched_at);
                break;
            case VulnStatus::Vulnerable:
                CHECK(f.introduced_at);
                CHECK_FALSE(f.patched_at);
                break;
            case VulnStatus::NeverPresent:
                CHECK_FALSE(f.introduced_at);
                CHECK_FALSE(f.patched_at);
                break;
        }
        if (vc.name == "same-commit-patch") CHECK(f.introduced_at == f.patched_at);
        if (vc.name == "straddling") CHECK(f.introduced_commit == std::optional<CommitId>("c4"));
    }
}

TEST_CASE("randomized histories agree with the checkout oracle") {
    std::size_t fallback_cases = 0;
    std::set<VulnStatus> seen;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto vc = fixtures::random_vuln_case(seed, 25 + seed % 15);
        CAPTURE(seed);
        const VulnFinding fast = scan_history(vc.history, vc.sig);
        CHECK(fast == scan_history_oracle(vc.history, vc.sig));
        seen.insert(fast.status);
        for (const auto& c : vc.history.commits())
            if (c.file_changes.size() > 30) {
                ++fallback_cases;
                break;
            }
    }
    CHECK(fallback_cases > 0);
    CHECK(seen.size() >= 2);
}

TEST_CASE("a lower fallback limit keeps verdicts unchanged") {
    ScanOptions tight;
    tight.fallback_file_limit = 1;
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto vc = fixtures::random_vuln_case(seed, 20);
        CHECK(scan_history(vc.history, vc.sig, tight) == scan_history_oracle(vc.history, vc.sig, tight));
        CHECK(scan_history(vc.history, vc.sig, tight) == scan_history(vc.history, vc.sig));
    }
}

TEST_CASE("single-commit repository") {
    fixtures::Builder b("one");
    b.commit("only", 1600000000, fixtures::tree({{"a.c", "memcpy(buf, src, len);\nbuf[len] = 0;\n"}}));
    const auto h = b.build();
    const auto sig = fixtures::overflow_signature();
    CHECK(scan_history(h, sig) == scan_history_oracle(h, sig));
    CHECK(scan_history(h, sig).status == VulnStatus::Vulnerable);
}

TEST_CASE("truncated history fails when the scan needs the missing ancestry") {
    fixtures::Builder b("cut");
    b.commit("a", 1600000000, fixtures::tree({{"a.c", "int x;\n"}}));
    b.commit("b", 1600000100, fixtures::tree({{"a.c", "int x;\nmemcpy(buf, src, len);\nbuf[len] = 0;\n"}}));
    auto commits = b.commits();
    commits.erase(commits.begin());
    const auto h = RepoHistory::build("cut", commits, true);
    const auto sig = fixtures::overflow_signature();
    CHECK(code_of([&] { scan_history_oracle(h, sig); }) == ErrorCode::TruncatedAncestry);
    CHECK(code_of([&] { scan_history(h, sig); }) == ErrorCode::TruncatedAncestry);
}

TEST_CASE("signature file validation") {
    json good = {{"signatures",
                  {{{"cve_id", "CVE-2018-17144"},
                    {"cvss", 7.5},
                    {"category", "DoS"},
                    {"reference_patch_time", 1537315200},
                    {"vuln_fragments", {"a;"}},
                    {"patch_fragments", {"b;"}}}}}};
    auto sigs = signatures_from_json(good);
    REQUIRE(sigs.size() == 1);
    CHECK(sigs[0].match_mode == MatchMode::All);
    CHECK(sigs[0].cve_id == "CVE-2018-17144");

    json any = good;
    any["signatures"][0]["match_mode"] = "any";
    CHECK(signatures_from_json(any)[0].match_mode == MatchMode::Any);

    json bad_mode = good;
    bad_mode["signatures"][0]["match_mode"] = "some";
    CHECK_THROWS_AS(signatures_from_json(bad_mode), Error);
    json no_fragments = good;
    no_fragments["signatures"][0]["vuln_fragments"] = json::array();
    CHECK_THROWS_AS(signatures_from_json(no_fragments), Error);
    json not_object = json::array();
    CHECK_THROWS_AS(signatures_from_json(not_object), Error);
}

TEST_CASE("patch time statistics") {
    auto s = patch_time_stats({patched("a", "x", 16), patched("b", "x", 16), patched("c", "x", 700)});
    CHECK(s.median_days == doctest::Approx(16));
    CHECK(s.mean_days == doctest::Approx(244));
    CHECK(s.count == 3);
    CHECK(s.within_16_days_fraction == doctest::Approx(2.0 / 3.0));

    auto single = patch_time_stats({patched("a", "x", 0)});
    CHECK(single.median_days == 0);
    CHECK(single.mean_days == 0);
    CHECK(single.within_16_days_fraction == 1.0);

    CHECK(patch_time_stats({patched("a", "x", 10), patched("b", "x", 20)}).within_16_days_fraction == 0.5);
    CHECK(patch_time_stats({patched("a", "x", 10), patched("b", "x", 20)}).median_days == 10);

    // Negative times stay negative.
    CHECK(patch_time_stats({patched("a", "x", -3)}).mean_days == doctest::Approx(-3));

    CHECK(code_of([] { patch_time_stats({}); }) == ErrorCode::EmptyInput);
    CHECK(code_of([] { patch_time_stats({with_status("a", "x", VulnStatus::Vulnerable)}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("vulnerability census") {
    auto rows = vuln_census({with_status("r", "c1", VulnStatus::Vulnerable), with_status("r", "c2", VulnStatus::Patched),
                             with_status("r", "c3", VulnStatus::NeverPresent)});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].unpatched_count == 1);

    CHECK(vuln_census({patched("r", "c1", 1), patched("r", "c2", 2)})[0].unpatched_count == 0);

    std::vector<VulnFinding> corpus;
    const std::vector<std::size_t> planted{0, 1, 1, 2, 4};
    for (std::size_t r = 0; r < planted.size(); ++r)
        for (std::size_t c = 0; c < 4; ++c)
            corpus.push_back(with_status("repo" + std::to_string(r), "CVE-" + std::to_string(c),
                                         c < planted[r] ? VulnStatus::Vulnerable : VulnStatus::Patched));
    auto census = vuln_census(corpus);
    REQUIRE(census.size() == 5);
    auto at_least = census_at_least(census, {1, 2, 4});
    CHECK(at_least == std::vector<std::pair<std::size_t, std::size_t>>{{1, 4}, {2, 2}, {4, 1}});

    CHECK(code_of([] {
              vuln_census({with_status("r", "c1", VulnStatus::Vulnerable), with_status("r", "c1", VulnStatus::Patched)});
          }) == ErrorCode::DuplicateFinding);
}
