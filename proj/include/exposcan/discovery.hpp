#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "exposcan/target.hpp"

namespace exposcan {

struct SourceQuery {
    ServiceKind service = ServiceKind::MongoDB;
    std::optional<std::string> country;
    std::size_t max_results = 100;
    std::optional<std::string> api_key;
    // Overrides the adapter's default search string for this service.
    std::optional<std::string> query_override;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Outbound HTTP used by the remote search adapters.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse get(const std::string &host, const std::string &path_and_query,
        const std::map<std::string, std::string> &headers) = 0;
};

// Replays recorded responses. A fixture file is JSON:
//   {"responses": [{"match": "<substring of path>", "status": 200, "body": {...}}]}
// The first entry whose match is contained in the request path answers it;
// entries with "once": true are consumed. Every request is recorded.
class FixtureTransport : public HttpTransport {
public:
    explicit FixtureTransport(nlohmann::json fixture);
    static std::unique_ptr<FixtureTransport> from_file(const std::filesystem::path &path);

    HttpResponse get(const std::string &host, const std::string &path_and_query,
        const std::map<std::string, std::string> &headers) override;

    [[nodiscard]] std::vector<std::string> requests() const;

private:
    struct Entry {
        std::string match;
        int status;
        std::string body;
        bool once;
        bool used = false;
    };
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    std::vector<std::string> requests_;
};

// HTTPS client for the live search APIs.
std::unique_ptr<HttpTransport> make_live_transport();

// Serializes requests to one remote source, at most one per interval.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::milliseconds interval_;
    std::optional<std::chrono::steady_clock::time_point> last_;
};

// Default search strings per service; adapters take overrides from config.
std::string default_shodan_query(ServiceKind s);
std::string default_binaryedge_query(ServiceKind s);

struct RemoteSourceConfig {
    HttpTransport *transport = nullptr;
    std::chrono::milliseconds min_interval{1000};
    // Upper bound on result pages requested per query.
    std::size_t max_pages = 10;
    std::function<UtcTime()> clock = utc_now;
};

class ShodanSource {
public:
    explicit ShodanSource(RemoteSourceConfig config);
    std::vector<TargetRecord> fetch(const SourceQuery &query);

private:
    RemoteSourceConfig config_;
    RateLimiter limiter_;
};

class BinaryEdgeSource {
public:
    explicit BinaryEdgeSource(RemoteSourceConfig config);
    std::vector<TargetRecord> fetch(const SourceQuery &query);

private:
    RemoteSourceConfig config_;
    RateLimiter limiter_;
};

// Reads a JSONL target list. Records whose service differs from the query
// are skipped, as are records outside the country filter.
std::vector<TargetRecord> fetch_from_file(const std::filesystem::path &path,
    const SourceQuery &query, const std::function<UtcTime()> &clock = utc_now);

// Common entry point. `transport` may be null only for the file source.
std::vector<TargetRecord> fetch_targets(TargetSource source, const SourceQuery &query,
    const std::filesystem::path &targets_file = {}, const RemoteSourceConfig &remote = {});

// First occurrence of each identity triple wins; survivor order is kept.
std::vector<TargetRecord> dedupe_targets(const std::vector<TargetRecord> &records);

struct ManifestEntry {
    std::filesystem::path file; // relative to root
    std::size_t records = 0;

    bool operator==(const ManifestEntry &) const = default;
};

using PersistManifest = std::vector<ManifestEntry>;

inline constexpr std::string_view kTargetsFile = "targets.jsonl";

// Writes <root>/<COUNTRY>/<service>/targets.jsonl after deduplication. Files
// are replaced wholesale, sorted by layout order, so re-running is idempotent.
PersistManifest persist_targets(const std::vector<TargetRecord> &records,
    const std::filesystem::path &root);

// Loads every targets.jsonl under root, sorted by layout order.
std::vector<TargetRecord> load_targets(const std::filesystem::path &root,
    const TargetFilter &filter = {});

// Parses a JSONL stream; ParseError messages name `origin` and the line.
std::vector<TargetRecord> parse_target_lines(std::istream &in, const std::string &origin);

} // namespace exposcan
