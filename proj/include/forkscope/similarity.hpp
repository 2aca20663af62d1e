#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "forkscope/history.hpp"

namespace forkscope {

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

/// Token class. C-like classes are small fixed values; plain-dialect word
/// classes are hashes with the top bit set.
using TokenClass = std::uint64_t;

enum class Dialect { CLike, Plain };

namespace tok {
inline constexpr TokenClass kIdent = 1;
inline constexpr TokenClass kNum = 2;
inline constexpr TokenClass kStr = 3;
inline constexpr TokenClass kChar = 4;
inline constexpr TokenClass kUnknown = 5;
}  // namespace tok

/// Class of a C/C++ keyword, or 0 when `word` is not a keyword.
TokenClass keyword_class(std::string_view word) noexcept;
/// Class of an operator/punctuator spelling, or 0 when unknown.
TokenClass operator_class(std::string_view op) noexcept;
/// Human-readable class name, e.g. "KW_int", "IDENT", "OP_assign", "SEMI".
std::string token_name(TokenClass t);

struct TokenStream {
    std::string path;
    CommitId commit;
    std::vector<TokenClass> tokens;
    std::vector<std::uint32_t> line_map;  // token index -> 1-based source line
};

/// Comments and literal contents are dropped; identifiers collapse to IDENT,
/// numbers to NUM. The plain dialect emits one class per distinct word.
TokenStream tokenize(std::string_view source, Dialect dialect = Dialect::CLike);

// ---------------------------------------------------------------------------
// Greedy string tiling
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultMinMatch = 9;

struct Tile {
    std::size_t a_start = 0;
    std::size_t b_start = 0;
    std::size_t length = 0;

    friend bool operator==(const Tile&, const Tile&) = default;
};

struct SimilarityScore {
    double value = 0;
    std::size_t matched_tokens = 0;
    std::size_t total_tokens_a = 0;
    std::size_t total_tokens_b = 0;
};

/// 2 * matched / (total_a + total_b), or 0 when both totals are 0.
double similarity_value(std::size_t matched, std::size_t total_a, std::size_t total_b) noexcept;

struct TilingResult {
    SimilarityScore score;
    std::vector<Tile> tiles;  // in discovery order, coordinates as passed
};

/// Greedy string tiling. Each round takes the longest remaining common runs
/// of unmarked tokens (length >= min_match) and marks the non-overlapping
/// ones, scanning candidates by (first start, second start). The pair is
/// canonically oriented first, so gst(a, b) and gst(b, a) mark the same tiles.
TilingResult gst(std::span<const TokenClass> a, std::span<const TokenClass> b, std::size_t min_match = kDefaultMinMatch);
TilingResult gst(const TokenStream& a, const TokenStream& b, std::size_t min_match = kDefaultMinMatch);

// ---------------------------------------------------------------------------
// Repository similarity
// ---------------------------------------------------------------------------

enum class Pairing { Greedy, Optimal };

struct SimilarityConfig {
    std::size_t min_match = kDefaultMinMatch;
    std::vector<std::string> extensions{".c", ".cc", ".cpp", ".cxx", ".h", ".hpp"};
    Pairing pairing = Pairing::Greedy;
};

bool is_eligible(const std::string& path, const std::vector<std::string>& extensions);
Dialect dialect_for(const std::string& path);

struct FilePairScore {
    std::string path_a;
    std::string path_b;
    double value = 0;
    std::size_t matched_tokens = 0;
};

struct RepoSimilarity {
    SimilarityScore overall;
    std::vector<FilePairScore> pairs;  // one-to-one file pairing with matched > 0
    std::size_t files_a = 0;
    std::size_t files_b = 0;
};

/// Memoizes tokenization (by content) and file-pair tiling. Thread-safe;
/// share one cache across the many comparisons of a lineage search.
class SimilarityCache {
public:
    std::shared_ptr<const std::vector<TokenClass>> tokens(const std::string& path, const SnapshotFile& file);
    SimilarityScore pair(const std::shared_ptr<const std::vector<TokenClass>>& a,
                         const std::shared_ptr<const std::vector<TokenClass>>& b, std::size_t min_match);

private:
    std::mutex mutex_;
    std::map<std::pair<std::string, int>, std::shared_ptr<const std::vector<TokenClass>>> token_cache_;
    std::map<std::tuple<const void*, const void*, std::size_t>, SimilarityScore> pair_cache_;
};

/// Per-file tiling with one-to-one file pairing; unpaired files' tokens stay
/// in the denominator. Symmetric in its snapshot arguments.
RepoSimilarity repo_similarity(const SnapshotTree& a, const SnapshotTree& b, const SimilarityConfig& cfg = {},
                               SimilarityCache* cache = nullptr);

struct CdfPoint {
    double score = 0;
    double fraction = 0;
};

/// Empirical CDF, one point per distinct score.
std::vector<CdfPoint> similarity_cdf(std::vector<double> scores);

}  // namespace forkscope
