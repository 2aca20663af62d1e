#include "forkscope/analytics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "forkscope/error.hpp"
#include "forkscope/io.hpp"

namespace forkscope {

namespace {

bool parse_flag(std::string cell, std::size_t line, const char* column) {
    std::transform(cell.begin(), cell.end(), cell.begin(), [](unsigned char c) { return std::tolower(c); });
    if (cell == "true" || cell == "1" || cell == "yes") return true;
    if (cell == "false" || cell == "0" || cell == "no" || cell.empty()) return false;
    throw Error(ErrorCode::InvalidInput,
                "registry line " + std::to_string(line) + ", column " + column + ": expected true/false, got '" + cell + "'");
}

std::string one_decimal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

std::vector<SurvivabilityRecord> parse_registry(std::string_view csv) {
    auto rows = parse_csv(csv);
    if (rows.empty()) throw Error(ErrorCode::InvalidInput, "registry is empty");
    const CsvRow& header = rows.front();
    const std::array<const char*, 5> names{"repo_id", "delisted_market", "repo_unavailable", "scam_list_a", "scam_list_b"};
    std::array<std::size_t, 5> col{};
    for (std::size_t k = 0; k < names.size(); ++k) {
        auto it = std::find(header.begin(), header.end(), names[k]);
        if (it == header.end()) throw Error(ErrorCode::InvalidInput, std::string("registry header lacks column ") + names[k]);
        col[k] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<SurvivabilityRecord> out;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const CsvRow& r = rows[i];
        if (r.size() == 1 && r[0].empty()) continue;
        if (r.size() < header.size())
            throw Error(ErrorCode::InvalidInput, "registry line " + std::to_string(i + 1) + " has too few cells");
        SurvivabilityRecord rec;
        rec.repo_id = r[col[0]];
        if (rec.repo_id.empty()) throw Error(ErrorCode::InvalidInput, "registry line " + std::to_string(i + 1) + " has no repo_id");
        if (!seen.insert(rec.repo_id).second)
            throw Error(ErrorCode::DuplicateRegistryEntry, "registry lists " + rec.repo_id + " more than once");
        rec.delisted_market = parse_flag(r[col[1]], i + 1, names[1]);
        rec.repo_unavailable = parse_flag(r[col[2]], i + 1, names[2]);
        rec.scam_list_a = parse_flag(r[col[3]], i + 1, names[3]);
        rec.scam_list_b = parse_flag(r[col[4]], i + 1, names[4]);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<SurvivabilityRecord> load_registry(const std::filesystem::path& path) { return parse_registry(read_file(path)); }

double CrossTabRow::percent(std::size_t flag) const noexcept {
    return total ? 100.0 * static_cast<double>(counts[flag]) / static_cast<double>(total) : 0.0;
}

Groups group_by_label(const std::map<std::string, std::string>& labels) {
    std::map<std::string, std::vector<std::string>> by;
    for (const auto& [repo, label] : labels) by[label].push_back(repo);
    return Groups(by.begin(), by.end());
}

CrossTab crosstab(const std::string& group_key, const Groups& groups, const std::vector<SurvivabilityRecord>& registry) {
    std::map<std::string, const SurvivabilityRecord*> index;
    for (const auto& r : registry)
        if (!index.emplace(r.repo_id, &r).second)
            throw Error(ErrorCode::DuplicateRegistryEntry, "registry lists " + r.repo_id + " more than once");

    CrossTab tab;
    tab.group_key = group_key;
    std::set<std::string> all, missing;
    auto count = [&](CrossTabRow& row, const std::string& repo) {
        ++row.total;
        auto it = index.find(repo);
        if (it == index.end()) {
            missing.insert(repo);
            return;
        }
        const auto& rec = *it->second;
        const std::array<bool, 5> flags{rec.delisted_market, rec.repo_unavailable, rec.scam_list_a, rec.scam_list_b,
                                        rec.inactive_any()};
        for (std::size_t k = 0; k < flags.size(); ++k) row.counts[k] += flags[k] ? 1 : 0;
    };
    for (const auto& [label, repos] : groups) {
        CrossTabRow row;
        row.group = label;
        for (const auto& repo : std::set<std::string>(repos.begin(), repos.end())) {
            count(row, repo);
            all.insert(repo);
        }
        tab.rows.push_back(std::move(row));
    }
    CrossTabRow total;
    total.group = "All";
    for (const auto& repo : all) count(total, repo);
    tab.rows.push_back(std::move(total));
    tab.unregistered.assign(missing.begin(), missing.end());
    return tab;
}

std::string crosstab_csv(const CrossTab& tab) {
    CsvRow header{tab.group_key.empty() ? "group" : tab.group_key, "total"};
    for (const char* f : kRegistryFlags) {
        header.emplace_back(f);
        header.push_back(std::string(f) + "_pct");
    }
    std::string out = csv_line(header);
    for (const auto& row : tab.rows) {
        CsvRow cells{row.group, std::to_string(row.total)};
        for (std::size_t k = 0; k < kRegistryFlags.size(); ++k) {
            cells.push_back(std::to_string(row.counts[k]));
            cells.push_back(one_decimal(row.percent(k)));
        }
        out += csv_line(cells);
    }
    return out;
}

nlohmann::json crosstab_json(const CrossTab& tab) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : tab.rows) {
        nlohmann::json r{{"group", row.group}, {"total", row.total}};
        for (std::size_t k = 0; k < kRegistryFlags.size(); ++k)
            r[kRegistryFlags[k]] = {{"count", row.counts[k]}, {"percent", std::round(row.percent(k) * 10.0) / 10.0}};
        rows.push_back(std::move(r));
    }
    return {{"group_key", tab.group_key}, {"rows", std::move(rows)}, {"unregistered", tab.unregistered}};
}

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(x.size()) + " x values vs " + std::to_string(y.size()) + " y values");
    if (x.size() < 3) throw Error(ErrorCode::InvalidInput, "pearson needs at least 3 pairs");
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) throw Error(ErrorCode::ZeroVariance, "pearson input has zero variance");
    Correlation c;
    c.n = x.size();
    c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double dof = static_cast<double>(c.n - 2);
    if (std::fabs(c.r) >= 1.0) {
        c.p = 0.0;
    } else {
        const double t = c.r * std::sqrt(dof / (1.0 - c.r * c.r));
        boost::math::students_t dist(dof);
        c.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
    }
    return c;
}

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw Error(ErrorCode::TooFewGroups, "kruskal-wallis needs at least 2 groups");
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw Error(ErrorCode::EmptyGroup, "group " + std::to_string(g) + " is empty");
        for (double v : groups[g]) all.emplace_back(v, g);
    }
    const std::size_t n = all.size();
    if (n < 3) throw Error(ErrorCode::InvalidInput, "kruskal-wallis needs at least 3 observations");
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> rank_sum(groups.size(), 0.0);
    double ties = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && all[j].first == all[i].first) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank_sum[all[k].second] += mid;
        const auto t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    const auto dn = static_cast<double>(n);
    KruskalWallis out;
    out.dof = groups.size() - 1;
    const double correction = 1.0 - ties / (dn * dn * dn - dn);
    if (correction <= 0.0) return out;  // every value ties
    double s = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) s += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    const double h = 12.0 / (dn * (dn + 1.0)) * s - 3.0 * (dn + 1.0);
    out.h = std::max(0.0, h / correction);
    boost::math::chi_squared dist(static_cast<double>(out.dof));
    out.p = boost::math::cdf(boost::math::complement(dist, out.h));
    return out;
}

SummaryStats summary_stats(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "no values to summarize");
    std::sort(values.begin(), values.end());
    SummaryStats s;
    s.count = values.size();
    s.median = values[(values.size() - 1) / 2];
    s.mean = mean_of(values);
    double var = 0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return s;
}

}  // namespace forkscope
