#include <algorithm>
#include <array>
#include <cctype>

#include "common.hpp"
#include "exposcan/codec/bytes.hpp"

namespace exposcan {

ProbeSession::ProbeSession(TargetRecord target, ProbeBudget budget, ProbeOptions options,
    Clock::time_point deadline)
    : target_(std::move(target)), budget_(budget), options_(options), deadline_(deadline),
      bytes_(budget.max_bytes_total)
{}

net::Stream ProbeSession::open()
{
    auto left = std::chrono::duration_cast<net::Millis>(deadline_ - Clock::now());
    if (left <= net::Millis(0)) {
        throw net::NetError(net::NetError::Kind::Timeout, "probe deadline reached before connect");
    }
    auto result = net::tcp_connect(target_.address, target_.port,
        std::min(left, budget_.connect_timeout));
    if (result.outcome != net::ConnectOutcome::Connected) {
        throw net::NetError(net::NetError::Kind::Closed, "reconnect failed: " + result.error);
    }
    return adopt(std::move(result.socket));
}

net::Stream ProbeSession::adopt(net::Socket socket)
{
    net::Stream s(std::move(socket), budget_.io_timeout, &bytes_);
    s.set_deadline(deadline_);
    return s;
}

void ProbeSession::send(net::Stream &stream, ByteView message)
{
    ++messages_sent_;
    stream.write_all(message);
}

namespace {

struct SystemList {
    ServiceKind service;
    std::array<std::string_view, 5> names;
};

constexpr std::array<SystemList, 5> kSystemNamespaces = {{
    {ServiceKind::MongoDB, {"admin", "local", "config"}},
    {ServiceKind::CouchDB, {"_users", "_replicator", "_global_changes"}},
    {ServiceKind::Cassandra,
        {"system", "system_schema", "system_auth", "system_distributed", "system_traces"}},
    {ServiceKind::MySQL, {"mysql", "information_schema", "performance_schema", "sys"}},
    {ServiceKind::PostgreSQL, {"postgres", "template0", "template1"}},
}};

} // namespace

bool is_system_namespace(ServiceKind service, std::string_view name)
{
    if (service == ServiceKind::Elasticsearch) {
        return !name.empty() && name.front() == '.';
    }
    for (const auto &list : kSystemNamespaces) {
        if (list.service == service) {
            return std::find(list.names.begin(), list.names.end(), name) != list.names.end()
                && !name.empty();
        }
    }
    return false;
}

ConnStatus check_redis(ProbeSession &session, net::Stream &stream);
ConnStatus check_memcached(ProbeSession &session, net::Stream &stream);
ConnStatus check_mongodb(ProbeSession &session, net::Stream &stream);
ConnStatus check_http(ProbeSession &session, net::Stream &stream);
ConnStatus check_cassandra(ProbeSession &session, net::Stream &stream);
ConnStatus check_mysql(ProbeSession &session, net::Stream &stream);
ConnStatus check_postgres(ProbeSession &session, net::Stream &stream);

ConnStatus check_handshake(ProbeSession &session, net::Stream &stream)
{
    try {
        switch (session.target().service) {
        case ServiceKind::Redis: return check_redis(session, stream);
        case ServiceKind::Memcached: return check_memcached(session, stream);
        case ServiceKind::MongoDB: return check_mongodb(session, stream);
        case ServiceKind::Elasticsearch:
        case ServiceKind::CouchDB: return check_http(session, stream);
        case ServiceKind::Cassandra: return check_cassandra(session, stream);
        case ServiceKind::MySQL: return check_mysql(session, stream);
        case ServiceKind::PostgreSQL: return check_postgres(session, stream);
        }
    } catch (const std::exception &) {
    }
    return ConnStatus::TcpOnly;
}

Harvest probe_service(ProbeSession &session)
{
    switch (session.target().service) {
    case ServiceKind::Redis: return probe_redis(session);
    case ServiceKind::Memcached: return probe_memcached(session);
    case ServiceKind::MongoDB: return probe_mongodb(session);
    case ServiceKind::Elasticsearch: return probe_elasticsearch(session);
    case ServiceKind::CouchDB: return probe_couchdb(session);
    case ServiceKind::Cassandra: return probe_cassandra(session);
    case ServiceKind::MySQL: return probe_mysql(session);
    case ServiceKind::PostgreSQL: return probe_postgres(session);
    }
    return {};
}

std::size_t check_round_trips(ServiceKind service)
{
    switch (service) {
    case ServiceKind::MongoDB: return 3;   // hello, reconnect, legacy isMaster
    case ServiceKind::Cassandra: return 2; // OPTIONS, STARTUP
    default: return 1;
    }
}

std::size_t probe_round_trips(ServiceKind service, const ProbeBudget &budget)
{
    const std::size_t n = budget.max_namespaces;
    const std::size_t s = budget.max_samples_per_namespace;
    switch (service) {
    case ServiceKind::Redis: return 3 + 4 + 2 * s;
    case ServiceKind::Memcached: return 2 + 2 * n;
    case ServiceKind::MongoDB: return 4 + 2 * n;
    case ServiceKind::Elasticsearch:
    case ServiceKind::CouchDB: return 2 + n + (2 + n); // a reconnect per request at worst
    case ServiceKind::Cassandra: return 3 + n * (1 + s);
    case ServiceKind::MySQL: return 3 + n * (1 + s);
    case ServiceKind::PostgreSQL: return 2 + n * (3 + s);
    }
    return 1;
}

namespace detail {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
        [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle)
{
    return lower(haystack).find(lower(needle)) != std::string::npos;
}

std::string dump_json(const nlohmann::json &j)
{
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string dump_json(const nlohmann::ordered_json &j)
{
    return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

void note_failure(Harvest &h, const std::exception &e)
{
    if (const auto *ne = dynamic_cast<const net::NetError *>(&e)) {
        switch (ne->kind()) {
        case net::NetError::Kind::BudgetExhausted:
            h.server_info["truncated"] = "true";
            h.notes.push_back("byte budget exhausted; harvest truncated");
            return;
        case net::NetError::Kind::Timeout: h.notes.push_back(std::string("timeout: ") + e.what()); return;
        case net::NetError::Kind::Closed:
            h.notes.push_back(std::string("connection closed: ") + e.what());
            return;
        case net::NetError::Kind::Reset: h.notes.push_back(std::string("connection reset: ") + e.what()); return;
        }
    }
    if (const auto *de = dynamic_cast<const DecodeError *>(&e)) {
        h.notes.push_back("malformed reply at offset " + std::to_string(de->offset()) + ": " + e.what());
        return;
    }
    h.notes.push_back(std::string("probe error: ") + e.what());
}

void finish(Harvest &h, ProbeSession &session)
{
    const auto &budget = session.budget();
    if (h.auth_blocked) {
        h.namespaces.clear();
        h.empty = false;
    }
    if (h.namespaces.size() > budget.max_namespaces) {
        h.namespaces.resize(budget.max_namespaces);
    }
    for (auto &ns : h.namespaces) {
        if (ns.samples.size() > budget.max_samples_per_namespace) {
            ns.samples.resize(budget.max_samples_per_namespace);
        }
    }
    h.total_bytes = std::min(session.bytes().used(), budget.max_bytes_total);
}

std::vector<std::string> user_namespaces(Harvest &h, ServiceKind service,
    const std::vector<std::string> &names, std::size_t limit)
{
    std::vector<std::string> user;
    std::string system;
    for (const auto &n : names) {
        if (is_system_namespace(service, n)) {
            system += (system.empty() ? "" : ",") + n;
        } else if (user.size() < limit) {
            user.push_back(n);
        } else {
            h.server_info["namespaces_truncated"] = "true";
        }
    }
    if (!system.empty()) {
        h.server_info["system_namespaces"] = system;
    }
    return user;
}

void settle_empty(Harvest &h)
{
    h.empty = std::all_of(h.namespaces.begin(), h.namespaces.end(),
        [](const NamespaceSample &ns) { return ns.record_count && *ns.record_count == 0; });
}

std::string quote_ident(std::string_view name, char quote)
{
    if (name.empty() || name.find(';') != std::string_view::npos
        || name.find_first_of("\r\n") != std::string_view::npos) {
        return {};
    }
    std::string out(1, quote);
    for (char c : name) {
        if (c == quote) {
            out += quote;
        }
        out += c;
    }
    out += quote;
    return out;
}

} // namespace detail
} // namespace exposcan
