#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "forkscope/history.hpp"

namespace forkscope {

struct HostingMetadata {
    std::string repo_id;
    std::uint64_t watch = 0;
    std::uint64_t star = 0;
    std::uint64_t fork_count = 0;
    std::uint64_t issues_total = 0;
    std::uint64_t issues_open = 0;
    std::uint64_t issues_closed = 0;
    std::uint64_t branches = 0;
    std::uint64_t releases = 0;
    std::uint64_t pull_requests = 0;
    UnixSeconds fetched_at = 0;

    friend bool operator==(const HostingMetadata&, const HostingMetadata&) = default;
};

/// Parses a flat Metadata Fixture object. `issues_total` is derived when
/// absent and must equal open + closed when present.
HostingMetadata metadata_from_json(const nlohmann::json& doc, const std::string& repo_id);
nlohmann::json metadata_to_json(const HostingMetadata& meta);

struct HttpResponse {
    int status = 0;  // 0 = transport failure
    std::string body;
    std::multimap<std::string, std::string> headers;  // lower-case names

    std::string header(const std::string& name) const;
};

/// GET of an absolute URL. The default implementation uses cpp-httplib.
using HttpGet = std::function<HttpResponse(const std::string& url)>;

HttpGet default_http_get(std::string token = {});

struct FetchOptions {
    std::size_t per_page = 100;
    int max_retries = 5;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{60000};
    HttpGet http;  // defaults to default_http_get() when empty
    std::function<UnixSeconds()> clock;  // defaults to wall-clock
};

/// `endpoint` is either a REST base URL (http:// or https://), a Metadata
/// Fixture file, or a directory holding `<repo_id>.json` fixtures.
///
/// REST mode walks the paginated list resources under
/// `{endpoint}/repos/{repo_id}/...` following `Link: rel="next"` headers.
/// Requests to one endpoint are serialized; rate-limit answers (429, or 403
/// with an exhausted quota) are retried with exponential backoff.
HostingMetadata fetch_hosting_metadata(const std::string& endpoint, const std::string& repo_id,
                                       const FetchOptions& options = {});

}  // namespace forkscope
