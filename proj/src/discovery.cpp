#include "exposcan/discovery.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "exposcan/errors.hpp"
#include "exposcan/fsutil.hpp"

namespace exposcan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string url_encode(std::string_view in)
{
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : in) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

void check_query(const SourceQuery &q, bool remote)
{
    if (q.max_results < 1) {
        throw PreconditionError("max_results must be at least 1");
    }
    if (remote && (!q.api_key || q.api_key->empty())) {
        throw PreconditionError("an API key is required for remote sources");
    }
}

// Maps an HTTP failure from a search API onto the discovery error types.
void raise_for_status(const HttpResponse &r, std::string_view source)
{
    std::string prefix = std::string(source) + ": ";
    if (r.status == 401 || r.status == 403) {
        throw AuthError(prefix + "API key rejected (HTTP " + std::to_string(r.status) + ")");
    }
    if (r.status == 429 || r.status == 402) {
        throw QuotaError(prefix + "rate limit or quota exceeded (HTTP " + std::to_string(r.status) + ")");
    }
    if (r.status == 0) {
        throw IoError(prefix + "request failed: " + r.body);
    }
    if (r.status < 200 || r.status >= 300) {
        throw IoError(prefix + "unexpected HTTP status " + std::to_string(r.status));
    }
}

json parse_body(const HttpResponse &r, std::string_view source)
{
    json body = json::parse(r.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw ParseError(std::string(source) + ": response is not a JSON object");
    }
    if (auto it = body.find("error"); it != body.end() && it->is_string()) {
        std::string msg = it->get<std::string>();
        std::string lower = msg;
        std::transform(lower.begin(), lower.end(), lower.begin(),
            [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lower.find("rate limit") != std::string::npos ||
            lower.find("quota") != std::string::npos ||
            lower.find("credits") != std::string::npos) {
            throw QuotaError(std::string(source) + ": " + msg);
        }
        if (lower.find("key") != std::string::npos || lower.find("auth") != std::string::npos) {
            throw AuthError(std::string(source) + ": " + msg);
        }
        throw ParseError(std::string(source) + ": " + msg);
    }
    return body;
}

std::optional<std::string> string_at(const json &j, std::initializer_list<const char *> path)
{
    const json *cur = &j;
    for (const char *key : path) {
        if (!cur->is_object()) {
            return std::nullopt;
        }
        auto it = cur->find(key);
        if (it == cur->end()) {
            return std::nullopt;
        }
        cur = &*it;
    }
    if (!cur->is_string()) {
        return std::nullopt;
    }
    return cur->get<std::string>();
}

std::uint16_t port_of(const json &j, std::string_view source)
{
    if (!j.is_number_integer()) {
        throw ParseError(std::string(source) + ": hit without an integer port");
    }
    auto p = j.get<std::int64_t>();
    if (p < 1 || p > 65535) {
        throw ParseError(std::string(source) + ": port out of range");
    }
    return static_cast<std::uint16_t>(p);
}

std::string with_country(std::string query, const SourceQuery &q)
{
    if (q.country) {
        query += " country:" + *q.country;
    }
    return query;
}

} // namespace

FixtureTransport::FixtureTransport(json fixture)
{
    if (!fixture.is_object() || !fixture.contains("responses") || !fixture["responses"].is_array()) {
        throw ParseError("fixture must be an object with a 'responses' array");
    }
    for (const auto &r : fixture["responses"]) {
        Entry e;
        e.match = r.value("match", std::string{});
        e.status = r.value("status", 200);
        const json &body = r.contains("body") ? r["body"] : json();
        e.body = body.is_string() ? body.get<std::string>() : body.dump();
        e.once = r.value("once", false);
        entries_.push_back(std::move(e));
    }
}

std::unique_ptr<FixtureTransport> FixtureTransport::from_file(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open fixture " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw ParseError("fixture " + path.string() + " is not valid JSON");
    }
    return std::make_unique<FixtureTransport>(std::move(j));
}

HttpResponse FixtureTransport::get(const std::string &host, const std::string &path_and_query,
    const std::map<std::string, std::string> & /*headers*/)
{
    std::lock_guard lock(mutex_);
    requests_.push_back(host + path_and_query);
    for (auto &e : entries_) {
        if (e.used || path_and_query.find(e.match) == std::string::npos) {
            continue;
        }
        if (e.once) {
            e.used = true;
        }
        return {e.status, e.body};
    }
    return {404, R"({"error":"no recorded response"})"};
}

std::vector<std::string> FixtureTransport::requests() const
{
    std::lock_guard lock(mutex_);
    return requests_;
}

void RateLimiter::acquire()
{
    std::lock_guard lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    if (last_ && now < *last_ + interval_) {
        std::this_thread::sleep_until(*last_ + interval_);
    }
    last_ = std::chrono::steady_clock::now();
}

std::string default_shodan_query(ServiceKind s)
{
    switch (s) {
    case ServiceKind::MongoDB: return "product:MongoDB";
    case ServiceKind::Redis: return "product:Redis";
    case ServiceKind::Elasticsearch: return "product:Elastic";
    case ServiceKind::CouchDB: return "product:CouchDB";
    case ServiceKind::Cassandra: return "product:Cassandra";
    case ServiceKind::Memcached: return "product:Memcached";
    case ServiceKind::MySQL: return "product:MySQL";
    case ServiceKind::PostgreSQL: return "product:PostgreSQL";
    }
    return {};
}

std::string default_binaryedge_query(ServiceKind s)
{
    switch (s) {
    case ServiceKind::MongoDB: return "type:mongodb";
    case ServiceKind::Redis: return "type:redis";
    case ServiceKind::Elasticsearch: return "type:elasticsearch";
    case ServiceKind::CouchDB: return "product:couchdb";
    case ServiceKind::Cassandra: return "type:cassandra";
    case ServiceKind::Memcached: return "type:memcached";
    case ServiceKind::MySQL: return "product:mysql";
    case ServiceKind::PostgreSQL: return "product:postgresql";
    }
    return {};
}

ShodanSource::ShodanSource(RemoteSourceConfig config)
    : config_(std::move(config)), limiter_(config_.min_interval)
{}

std::vector<TargetRecord> ShodanSource::fetch(const SourceQuery &q)
{
    check_query(q, true);
    if (config_.transport == nullptr) {
        throw IoError("shodan: no HTTP transport configured");
    }
    std::string query = with_country(q.query_override.value_or(default_shodan_query(q.service)), q);
    std::vector<TargetRecord> out;
    for (std::size_t page = 1; page <= config_.max_pages && out.size() < q.max_results; ++page) {
        limiter_.acquire();
        std::string path = "/shodan/host/search?key=" + url_encode(*q.api_key) +
            "&query=" + url_encode(query) + "&page=" + std::to_string(page);
        HttpResponse r = config_.transport->get("api.shodan.io", path, {});
        raise_for_status(r, "shodan");
        json body = parse_body(r, "shodan");
        auto matches = body.find("matches");
        if (matches == body.end() || !matches->is_array()) {
            throw ParseError("shodan: response has no 'matches' array");
        }
        for (const auto &m : *matches) {
            if (out.size() >= q.max_results) {
                break;
            }
            auto ip = string_at(m, {"ip_str"});
            if (!ip || !m.contains("port")) {
                throw ParseError("shodan: match without ip_str/port");
            }
            TargetRecord rec;
            rec.address = *ip;
            rec.port = port_of(m["port"], "shodan");
            rec.service = q.service;
            rec.country = normalize_country(string_at(m, {"location", "country_code"}).value_or(""));
            rec.source = TargetSource::Shodan;
            rec.discovered_at = config_.clock();
            out.push_back(std::move(rec));
        }
        std::size_t total = body.value("total", std::size_t{0});
        if (matches->empty() || page * 100 >= total) {
            break;
        }
    }
    return out;
}

BinaryEdgeSource::BinaryEdgeSource(RemoteSourceConfig config)
    : config_(std::move(config)), limiter_(config_.min_interval)
{}

std::vector<TargetRecord> BinaryEdgeSource::fetch(const SourceQuery &q)
{
    check_query(q, true);
    if (config_.transport == nullptr) {
        throw IoError("binaryedge: no HTTP transport configured");
    }
    std::string query =
        with_country(q.query_override.value_or(default_binaryedge_query(q.service)), q);
    std::vector<TargetRecord> out;
    for (std::size_t page = 1; page <= config_.max_pages && out.size() < q.max_results; ++page) {
        limiter_.acquire();
        std::string path =
            "/v2/query/search?query=" + url_encode(query) + "&page=" + std::to_string(page);
        HttpResponse r = config_.transport->get("api.binaryedge.io", path, {{"X-Key", *q.api_key}});
        raise_for_status(r, "binaryedge");
        json body = parse_body(r, "binaryedge");
        auto events = body.find("events");
        if (events == body.end() || !events->is_array()) {
            throw ParseError("binaryedge: response has no 'events' array");
        }
        for (const auto &e : *events) {
            if (out.size() >= q.max_results) {
                break;
            }
            auto ip = string_at(e, {"target", "ip"});
            if (!ip || !e.contains("target") || !e["target"].contains("port")) {
                throw ParseError("binaryedge: event without target ip/port");
            }
            TargetRecord rec;
            rec.address = *ip;
            rec.port = port_of(e["target"]["port"], "binaryedge");
            rec.service = q.service;
            auto country = string_at(e, {"location", "country_code"});
            if (!country) {
                country = string_at(e, {"target", "country"});
            }
            rec.country = normalize_country(country.value_or(""));
            rec.source = TargetSource::BinaryEdge;
            rec.discovered_at = config_.clock();
            out.push_back(std::move(rec));
        }
        std::size_t total = body.value("total", std::size_t{0});
        std::size_t pagesize = std::max<std::size_t>(1, body.value("pagesize", std::size_t{20}));
        if (events->empty() || page * pagesize >= total) {
            break;
        }
    }
    return out;
}

std::vector<TargetRecord> parse_target_lines(std::istream &in, const std::string &origin)
{
    std::vector<TargetRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": invalid JSON");
        }
        try {
            out.push_back(target_from_json(j));
        } catch (const ParseError &e) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<TargetRecord> fetch_from_file(const fs::path &path, const SourceQuery &q,
    const std::function<UtcTime()> & /*clock*/)
{
    check_query(q, false);
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open target list " + path.string());
    }
    std::vector<TargetRecord> out;
    for (auto &rec : parse_target_lines(in, path.string())) {
        if (rec.service != q.service || (q.country && rec.country != *q.country)) {
            continue;
        }
        rec.source = TargetSource::File;
        out.push_back(std::move(rec));
        if (out.size() >= q.max_results) {
            break;
        }
    }
    return out;
}

std::vector<TargetRecord> fetch_targets(TargetSource source, const SourceQuery &query,
    const fs::path &targets_file, const RemoteSourceConfig &remote)
{
    switch (source) {
    case TargetSource::File: return fetch_from_file(targets_file, query, remote.clock);
    case TargetSource::Shodan: return ShodanSource(remote).fetch(query);
    case TargetSource::BinaryEdge: return BinaryEdgeSource(remote).fetch(query);
    }
    return {};
}

std::vector<TargetRecord> dedupe_targets(const std::vector<TargetRecord> &records)
{
    std::set<TargetIdentity> seen;
    std::vector<TargetRecord> out;
    for (const auto &r : records) {
        if (seen.insert(identity(r)).second) {
            out.push_back(r);
        }
    }
    return out;
}

PersistManifest persist_targets(const std::vector<TargetRecord> &records, const fs::path &root)
{
    std::map<std::pair<std::string, ServiceKind>, std::vector<TargetRecord>> groups;
    for (const auto &r : dedupe_targets(records)) {
        validate(r);
        groups[{r.country, r.service}].push_back(r);
    }
    PersistManifest manifest;
    for (auto &[key, group] : groups) {
        std::sort(group.begin(), group.end(), layout_less);
        fs::path rel = fs::path(key.first) / std::string(service_name(key.second)) / kTargetsFile;
        ensure_directory(root / rel.parent_path());
        std::string content;
        for (const auto &r : group) {
            content += to_jsonl_line(r);
            content += '\n';
        }
        write_file_atomically(root / rel, content);
        manifest.push_back({rel, group.size()});
    }
    std::sort(manifest.begin(), manifest.end(),
        [](const ManifestEntry &a, const ManifestEntry &b) { return a.file < b.file; });
    return manifest;
}

std::vector<TargetRecord> load_targets(const fs::path &root, const TargetFilter &filter)
{
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw IoError("target root " + root.string() + " does not exist");
    }
    auto files = find_layout_files(root, kTargetsFile);
    std::vector<TargetRecord> out;
    for (const auto &f : files) {
        std::ifstream in(f);
        if (!in) {
            throw IoError("cannot read " + f.string());
        }
        for (auto &r : parse_target_lines(in, f.string())) {
            if (filter.accepts(r)) {
                out.push_back(std::move(r));
            }
        }
    }
    std::sort(out.begin(), out.end(), layout_less);
    return out;
}

} // namespace exposcan
