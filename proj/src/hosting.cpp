#include "forkscope/hosting.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "forkscope/error.hpp"
#include "forkscope/io.hpp"

namespace forkscope {

using nlohmann::json;

namespace {

UnixSeconds wall_clock() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::uint64_t count_of(const json& doc, std::initializer_list<const char*> names, bool required = true) {
    for (const char* name : names) {
        auto it = doc.find(name);
        if (it == doc.end()) continue;
        if (!it->is_number_integer() || it->get<long long>() < 0)
            throw Error(ErrorCode::SchemaMismatch, std::string("'") + name + "' must be a non-negative integer");
        return it->get<std::uint64_t>();
    }
    if (required) throw Error(ErrorCode::SchemaMismatch, std::string("missing count '") + *names.begin() + "'");
    return 0;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::mutex& endpoint_mutex(const std::string& endpoint) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::unique_ptr<std::mutex>> registry;
    std::lock_guard lock(registry_mutex);
    auto& slot = registry[endpoint];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

std::string next_link(const std::string& link_header) {
    // <https://host/path?page=2>; rel="next", <...>; rel="last"
    std::size_t pos = 0;
    while (pos < link_header.size()) {
        auto open = link_header.find('<', pos);
        auto close = link_header.find('>', open);
        if (open == std::string::npos || close == std::string::npos) break;
        auto comma = link_header.find(',', close);
        auto params = link_header.substr(close + 1, comma == std::string::npos ? std::string::npos : comma - close - 1);
        if (params.find("rel=\"next\"") != std::string::npos) return link_header.substr(open + 1, close - open - 1);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return {};
}

bool is_rate_limited(const HttpResponse& r) {
    return r.status == 429 || (r.status == 403 && r.header("x-ratelimit-remaining") == "0");
}

HttpResponse get_with_retry(const std::string& url, const FetchOptions& opt, const HttpGet& http) {
    for (int attempt = 0;; ++attempt) {
        HttpResponse r = http(url);
        if (r.status >= 200 && r.status < 300) return r;

        const bool limited = is_rate_limited(r);
        const bool transient = r.status == 0 || r.status >= 500;
        if (!limited && !transient)
            throw Error(ErrorCode::NetworkFailure, "GET " + url + " answered HTTP " + std::to_string(r.status));
        if (attempt >= opt.max_retries) {
            if (limited)
                throw Error(ErrorCode::RateLimitExceeded,
                            "GET " + url + " still rate limited after " + std::to_string(attempt) + " retries");
            throw Error(ErrorCode::NetworkFailure,
                        "GET " + url + " failed after " + std::to_string(attempt) + " retries (status " +
                            std::to_string(r.status) + ")");
        }
        auto delay = opt.base_delay * (std::int64_t{1} << std::min(attempt, 20));
        delay = std::min<std::chrono::milliseconds>(delay, opt.max_delay);
        spdlog::warn("GET {} -> {}; retrying in {} ms", url, r.status, delay.count());
        std::this_thread::sleep_for(delay);
    }
}

std::uint64_t count_pages(std::string url, bool skip_pull_requests, const FetchOptions& opt, const HttpGet& http) {
    std::uint64_t total = 0;
    while (!url.empty()) {
        HttpResponse r = get_with_retry(url, opt, http);
        json page;
        try {
            page = json::parse(r.body);
        } catch (const json::parse_error&) {
            throw Error(ErrorCode::SchemaMismatch, "GET " + url + " did not return JSON");
        }
        if (!page.is_array()) throw Error(ErrorCode::SchemaMismatch, "GET " + url + " did not return a JSON array");
        for (const auto& entry : page) {
            // The issues listing also contains pull requests.
            if (skip_pull_requests && entry.is_object() && entry.contains("pull_request")) continue;
            ++total;
        }
        url = next_link(r.header("link"));
    }
    return total;
}

HostingMetadata fetch_rest(const std::string& endpoint, const std::string& repo_id, const FetchOptions& opt) {
    HttpGet http = opt.http ? opt.http : default_http_get();
    std::string base = endpoint;
    while (!base.empty() && base.back() == '/') base.pop_back();
    const std::string prefix = base + "/repos/" + repo_id + "/";
    auto url_for = [&](const std::string& resource) {
        return prefix + resource + (resource.find('?') == std::string::npos ? "?" : "&") +
               "per_page=" + std::to_string(opt.per_page);
    };

    std::lock_guard serial(endpoint_mutex(base));
    HostingMetadata m;
    m.repo_id = repo_id;
    m.watch = count_pages(url_for("subscribers"), false, opt, http);
    m.star = count_pages(url_for("stargazers"), false, opt, http);
    m.fork_count = count_pages(url_for("forks"), false, opt, http);
    m.issues_open = count_pages(url_for("issues?state=open"), true, opt, http);
    m.issues_closed = count_pages(url_for("issues?state=closed"), true, opt, http);
    m.issues_total = m.issues_open + m.issues_closed;
    m.branches = count_pages(url_for("branches"), false, opt, http);
    m.releases = count_pages(url_for("releases"), false, opt, http);
    m.pull_requests = count_pages(url_for("pulls?state=all"), false, opt, http);
    m.fetched_at = opt.clock ? opt.clock() : wall_clock();
    return m;
}

}  // namespace

std::string HttpResponse::header(const std::string& name) const {
    auto it = headers.find(lower(name));
    return it == headers.end() ? std::string{} : it->second;
}

HostingMetadata metadata_from_json(const json& doc, const std::string& repo_id) {
    if (!doc.is_object()) throw Error(ErrorCode::SchemaMismatch, "metadata fixture must be a JSON object");
    HostingMetadata m;
    m.repo_id = repo_id;
    if (auto it = doc.find("repo_id"); it != doc.end() && it->is_string() && repo_id.empty())
        m.repo_id = it->get<std::string>();
    m.watch = count_of(doc, {"watch"});
    m.star = count_of(doc, {"star"});
    m.fork_count = count_of(doc, {"fork_count", "fork"});
    m.issues_open = count_of(doc, {"issues_open", "open_issues"});
    m.issues_closed = count_of(doc, {"issues_closed", "closed_issues"});
    m.branches = count_of(doc, {"branches"});
    m.releases = count_of(doc, {"releases"});
    m.pull_requests = count_of(doc, {"pull_requests"});
    const bool has_total = doc.contains("issues_total") || doc.contains("issues");
    m.issues_total = has_total ? count_of(doc, {"issues_total", "issues"}) : m.issues_open + m.issues_closed;
    if (m.issues_total != m.issues_open + m.issues_closed)
        throw Error(ErrorCode::SchemaMismatch, "issues_total " + std::to_string(m.issues_total) +
                                                   " != issues_open + issues_closed (" +
                                                   std::to_string(m.issues_open + m.issues_closed) + ")");
    if (auto it = doc.find("fetched_at"); it != doc.end()) {
        if (!it->is_number_integer()) throw Error(ErrorCode::SchemaMismatch, "'fetched_at' must be an integer");
        m.fetched_at = it->get<UnixSeconds>();
    }
    return m;
}

json metadata_to_json(const HostingMetadata& m) {
    return {{"repo_id", m.repo_id},
            {"watch", m.watch},
            {"star", m.star},
            {"fork_count", m.fork_count},
            {"issues_total", m.issues_total},
            {"issues_open", m.issues_open},
            {"issues_closed", m.issues_closed},
            {"branches", m.branches},
            {"releases", m.releases},
            {"pull_requests", m.pull_requests},
            {"fetched_at", m.fetched_at}};
}

HttpGet default_http_get(std::string token) {
    return [token = std::move(token)](const std::string& url) {
        HttpResponse out;
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) return out;
        auto path_start = url.find('/', scheme_end + 3);
        std::string origin = url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);
        httplib::Headers headers{{"Accept", "application/vnd.github+json"}, {"User-Agent", "forkscope"}};
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        auto res = client.Get(path, headers);
        if (!res) return out;
        out.status = res->status;
        out.body = res->body;
        for (const auto& [k, v] : res->headers) out.headers.emplace(lower(k), v);
        return out;
    };
}

HostingMetadata fetch_hosting_metadata(const std::string& endpoint, const std::string& repo_id,
                                       const FetchOptions& options) {
    if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0)
        return fetch_rest(endpoint, repo_id, options);

    std::filesystem::path path(endpoint);
    if (std::filesystem::is_directory(path)) path /= repo_id + ".json";
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SchemaMismatch, "'" + path.string() + "': " + e.what());
    }
    HostingMetadata m = metadata_from_json(doc, repo_id);
    if (!doc.contains("fetched_at")) m.fetched_at = options.clock ? options.clock() : wall_clock();
    return m;
}

}  // namespace forkscope
