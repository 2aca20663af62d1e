#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "forkscope/error.hpp"
#include "forkscope/similarity.hpp"
#include "oracles.hpp"

using namespace forkscope;

namespace {

std::vector<std::string> names(const TokenStream& s) {
    std::vector<std::string> out;
    for (auto t : s.tokens) out.push_back(token_name(t));
    return out;
}

std::vector<TokenClass> run(std::size_t n, TokenClass base) {
    std::vector<TokenClass> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(base + i);
    return out;
}

std::vector<TokenClass> cat(std::vector<TokenClass> a, const std::vector<TokenClass>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("tokenizer abstracts identifiers and drops comments") {
    CHECK(names(tokenize("int x = 1; // note")) == std::vector<std::string>{"KW_int", "IDENT", "OP_assign", "NUM", "SEMI"});
    CHECK(tokenize("").tokens.empty());
    CHECK(tokenize("  /* only a comment */ \n // and another").tokens.empty());
}

TEST_CASE("tokenizer handles literals, preprocessor lines and line numbers") {
    TokenStream s = tokenize("#include <stdio.h>\nconst char* s = \"a // not a comment\";\nchar c = '\\'';\n"
                             "auto r = R\"x(raw \" text)x\";\nlong v = 1'000'000ull + 0x1Fp-3;\n");
    auto n = names(s);
    CHECK(n.front() == "HASH");
    CHECK(std::count(n.begin(), n.end(), "STR") == 2);
    CHECK(std::count(n.begin(), n.end(), "CHAR") == 1);
    CHECK(std::count(n.begin(), n.end(), "NUM") == 2);
    REQUIRE(s.line_map.size() == s.tokens.size());
    CHECK(s.line_map.front() == 1);
    CHECK(s.line_map.back() == 5);
    CHECK(std::is_sorted(s.line_map.begin(), s.line_map.end()));
}

TEST_CASE("maximal munch on operators") {
    CHECK(names(tokenize("a <<= b->c ... d")) ==
          std::vector<std::string>{"IDENT", token_name(operator_class("<<=")), "IDENT", token_name(operator_class("->")),
                                   "IDENT", token_name(operator_class("...")), "IDENT"});
    CHECK(operator_class("<<=") != operator_class("<<"));
    CHECK(keyword_class("while") != 0);
    CHECK(keyword_class("whilst") == 0);
}

TEST_CASE("renaming identifiers leaves the token stream unchanged") {
    std::mt19937_64 rng(1);
    const std::string src = fixtures::c_source(rng, 8);
    CHECK(tokenize(fixtures::rename_identifiers(src, "_renamed")).tokens == tokenize(src).tokens);
}

TEST_CASE("plain dialect splits on whitespace without abstraction") {
    TokenStream a = tokenize("alpha beta\nalpha", Dialect::Plain);
    REQUIRE(a.tokens.size() == 3);
    CHECK(a.tokens[0] == a.tokens[2]);
    CHECK(a.tokens[0] != a.tokens[1]);
    CHECK(token_name(a.tokens[0]) == "WORD");
}

TEST_CASE("tiling identity, disjointness and the shared-prefix example") {
    auto same = run(40, 1000);
    CHECK(gst(same, same).score.value == 1.0);
    CHECK(gst(run(20, 1000), run(20, 2000)).score.value == 0.0);

    auto x = run(9, 100);
    std::vector<TokenClass> y, z;
    for (int i = 0; i < 11; ++i) {
        y.push_back(500 + static_cast<TokenClass>(i % 4));
        z.push_back(600 + static_cast<TokenClass>(i % 3));
    }
    auto a = cat(x, y), b = cat(x, z);
    TilingResult r = gst(a, b, 9);
    CHECK(r.score.matched_tokens == 9);
    CHECK(r.score.value == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(oracles::brute_force_tiling(a, b, 9) == 9);
}

TEST_CASE("tiles never overlap and respect the minimum length") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TokenClass> a, b;
        for (int i = 0; i < 200; ++i) a.push_back(rng() % 4);
        for (int i = 0; i < 180; ++i) b.push_back(rng() % 4);
        TilingResult r = gst(a, b, 3);
        std::vector<int> ua(a.size()), ub(b.size());
        for (const Tile& t : r.tiles) {
            CHECK(t.length >= 3);
            for (std::size_t k = 0; k < t.length; ++k) {
                CHECK(a[t.a_start + k] == b[t.b_start + k]);
                ++ua[t.a_start + k];
                ++ub[t.b_start + k];
            }
        }
        CHECK(*std::max_element(ua.begin(), ua.end()) <= 1);
        CHECK(*std::max_element(ub.begin(), ub.end()) <= 1);
        CHECK(oracles::brute_force_tiling(a, b, 3) == r.score.matched_tokens);
    }
}

TEST_CASE("repository similarity aggregates over paired files") {
    std::mt19937_64 rng(2);
    const std::string f1 = fixtures::c_source(rng, 5, "g");
    SnapshotTree a = fixtures::tree({{"f1.c", f1}, {"notes.txt", "ignored"}});
    CHECK(repo_similarity(a, a).overall.value == 1.0);

    // A second file of equal length that shares nothing: a run of distinct operators.
    const auto n1 = tokenize(f1).tokens.size();
    std::string f2;
    for (std::size_t i = 0; i < n1; ++i) f2 += "@ ";
    SnapshotTree b = fixtures::tree({{"f1.c", f1}, {"f2.c", f2}});
    REQUIRE(tokenize(f2).tokens.size() == n1);
    RepoSimilarity s = repo_similarity(a, b);
    CHECK(s.overall.value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(repo_similarity(b, a).overall.value == doctest::Approx(s.overall.value).epsilon(1e-12));
    REQUIRE(s.pairs.size() == 1);
    CHECK(s.pairs[0].path_a == "f1.c");
    CHECK(s.pairs[0].path_b == "f1.c");
}

TEST_CASE("a global identifier rename keeps similarity at 0.99 or above") {
    std::mt19937_64 rng(9);
    SnapshotTree original, renamed;
    for (int f = 0; f < 4; ++f) {
        const std::string src = fixtures::c_source(rng, 6, "bitcoin");
        original["src/file" + std::to_string(f) + ".cpp"].lines = split_lines(src);
        std::string r = fixtures::rename_identifiers(src, "");
        std::size_t pos = 0;
        while ((pos = r.find("bitcoin", pos)) != std::string::npos) r.replace(pos, 7, "acoin");
        renamed["src/file" + std::to_string(f) + ".cpp"].lines = split_lines(r);
    }
    CHECK(repo_similarity(original, renamed).overall.value >= 0.99);
}

TEST_CASE("snapshots without eligible files are rejected") {
    SnapshotTree docs = fixtures::tree({{"README.md", "text"}});
    SnapshotTree code = fixtures::tree({{"a.c", "int a;"}});
    try {
        repo_similarity(docs, code);
        FAIL("expected NoEligibleFiles");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoEligibleFiles);
    }
}

TEST_CASE("optimal pairing never scores below greedy") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        SnapshotTree a, b;
        std::vector<std::string> pool;
        for (int i = 0; i < 5; ++i) pool.push_back(fixtures::c_source(rng, 2 + rng() % 3, "p"));
        for (int i = 0; i < 3; ++i) a["a" + std::to_string(i) + ".c"].lines = split_lines(pool[rng() % 5] + pool[rng() % 5]);
        for (int i = 0; i < 3; ++i) b["b" + std::to_string(i) + ".c"].lines = split_lines(pool[rng() % 5] + pool[rng() % 5]);
        SimilarityConfig greedy, optimal;
        optimal.pairing = Pairing::Optimal;
        SimilarityCache cache;
        const double g = repo_similarity(a, b, greedy, &cache).overall.value;
        const double o = repo_similarity(a, b, optimal, &cache).overall.value;
        CHECK(o >= g - 1e-12);
    }
}

TEST_CASE("empirical CDF points") {
    auto one = similarity_cdf({0.5});
    REQUIRE(one.size() == 1);
    CHECK(one[0].score == 0.5);
    CHECK(one[0].fraction == 1.0);
    auto four = similarity_cdf({0.4, 0.9, 0.2, 0.4});
    REQUIRE(four.size() == 3);
    CHECK(four[0].score == 0.2);
    CHECK(four[0].fraction == 0.25);
    CHECK(four[1].score == 0.4);
    CHECK(four[1].fraction == 0.75);
    CHECK(four[2].fraction == 1.0);
    CHECK(similarity_cdf({0.7, 0.7, 0.7}).size() == 1);
    CHECK_THROWS_AS(similarity_cdf({}), Error);
    CHECK_THROWS_AS(similarity_cdf({1.5}), Error);
}
