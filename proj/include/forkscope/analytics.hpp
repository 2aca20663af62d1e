#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace forkscope {

struct SurvivabilityRecord {
    std::string repo_id;
    bool delisted_market = false;
    bool repo_unavailable = false;
    bool scam_list_a = false;
    bool scam_list_b = false;

    bool inactive_any() const noexcept { return delisted_market || repo_unavailable || scam_list_a || scam_list_b; }
};

/// CSV `repo_id,delisted_market,repo_unavailable,scam_list_a,scam_list_b`
/// with true/false cells. Throws DuplicateRegistryEntry on a repeated id.
std::vector<SurvivabilityRecord> parse_registry(std::string_view csv);
std::vector<SurvivabilityRecord> load_registry(const std::filesystem::path& path);

inline constexpr std::array<const char*, 5> kRegistryFlags{"delisted_market", "repo_unavailable", "scam_list_a",
                                                          "scam_list_b", "inactive_any"};

struct CrossTabRow {
    std::string group;
    std::size_t total = 0;
    std::array<std::size_t, 5> counts{};  // in kRegistryFlags order

    double percent(std::size_t flag) const noexcept;
};

struct CrossTab {
    std::string group_key;
    std::vector<CrossTabRow> rows;  // groups in input order, then "All"
    std::vector<std::string> unregistered;  // grouped repos missing from the registry (counted as all-false)
};

/// Ordered groups of repositories. A repository may sit in several groups, as
/// with cumulative ">= x" buckets; the All row counts each repository once.
using Groups = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Groups from a repo -> label map, ordered by label.
Groups group_by_label(const std::map<std::string, std::string>& labels);

CrossTab crosstab(const std::string& group_key, const Groups& groups, const std::vector<SurvivabilityRecord>& registry);

/// `group,total,<flag>,<flag>_pct,...`; percentages to one decimal.
std::string crosstab_csv(const CrossTab& tab);
nlohmann::json crosstab_json(const CrossTab& tab);

struct Correlation {
    double r = 0;
    double p = 1;
    std::size_t n = 0;
};

/// Product-moment r with a two-sided p from Student's t on n - 2 degrees of freedom.
Correlation pearson(const std::vector<double>& x, const std::vector<double>& y);

struct KruskalWallis {
    double h = 0;
    double p = 1;
    std::size_t dof = 0;
};

/// Mid-ranks with tie correction; chi-square p. H is 0 when every value ties.
KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct SummaryStats {
    double median = 0;  // lower middle for even counts
    double mean = 0;
    double stddev = 0;  // population
    std::size_t count = 0;
};

SummaryStats summary_stats(std::vector<double> values);

}  // namespace forkscope
