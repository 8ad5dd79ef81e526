#include "exposcan/allowlist.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>
#include <vector>

#include "exposcan/codec/mysql.hpp"

namespace exposcan {

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
        [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::vector<std::string> words(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) {
        out.push_back(w);
    }
    return out;
}

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

std::optional<long long> to_int(std::string_view s)
{
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

constexpr long long kMaxBound = 10000;

bool bounded_positive(std::string_view s)
{
    auto v = to_int(s);
    return v && *v > 0 && *v <= kMaxBound;
}

bool redis_allowed(std::string_view command)
{
    auto w = words(command);
    if (w.empty()) {
        return false;
    }
    std::string verb = upper(w[0]);
    if (verb == "PING" || verb == "DBSIZE") {
        return w.size() == 1;
    }
    if (verb == "INFO") {
        return w.size() <= 2;
    }
    if (verb == "TYPE" || verb == "GET" || verb == "SMEMBERS" || verb == "HGETALL") {
        return w.size() >= 2;
    }
    if (verb == "LRANGE" || verb == "ZRANGE") {
        if (w.size() < 4) {
            return false;
        }
        auto start = to_int(w[w.size() - 2]);
        auto stop = to_int(w[w.size() - 1]);
        return start && stop && *start >= 0 && *stop >= *start && *stop - *start < kMaxBound;
    }
    if (verb == "SCAN") {
        return w.size() == 4 && to_int(w[1]) && upper(w[2]) == "COUNT" && bounded_positive(w[3]);
    }
    return false;
}

bool memcached_allowed(std::string_view command)
{
    auto w = words(command);
    if (w.empty() || command.find_first_of("\r\n") != std::string_view::npos) {
        return false;
    }
    if (w[0] == "stats") {
        if (w.size() == 1) {
            return true;
        }
        if (w.size() == 2 && w[1] == "items") {
            return true;
        }
        return w.size() == 4 && w[1] == "cachedump" && to_int(w[2]) && bounded_positive(w[3]);
    }
    if (w[0] == "get") {
        return w.size() >= 2;
    }
    return false;
}

bool mongo_allowed(std::string_view command)
{
    auto w = words(command);
    if (w.empty()) {
        return false;
    }
    const std::string &cmd = w[0];
    if (cmd == "hello" || cmd == "isMaster" || cmd == "ismaster" || cmd == "listDatabases"
        || cmd == "listCollections") {
        return true;
    }
    if (cmd == "find") {
        auto it = std::find_if(w.begin(), w.end(),
            [](const std::string &s) { return starts_with(s, "limit="); });
        return it != w.end() && bounded_positive(std::string_view(*it).substr(6));
    }
    return false;
}

bool http_allowed(std::string_view command)
{
    return starts_with(command, "GET /") && command.find_first_of(" \r\n", 4) == std::string_view::npos;
}

bool cassandra_allowed(std::string_view command)
{
    if (command == "OPTIONS" || starts_with(command, "STARTUP")) {
        return true;
    }
    if (!starts_with(command, "QUERY ")) {
        return false;
    }
    std::string_view sql = command.substr(6);
    if (sql.find(';') != std::string_view::npos) {
        return false;
    }
    std::string up = upper(sql);
    if (starts_with(up, "SELECT ") && up.find(" FROM SYSTEM_SCHEMA.") != std::string::npos) {
        return true;
    }
    return is_limited_select(sql);
}

bool mysql_allowed(std::string_view command)
{
    if (starts_with(command, "LOGIN ")) {
        return true;
    }
    if (!starts_with(command, "COM_QUERY ")) {
        return false;
    }
    std::string_view sql = command.substr(10);
    if (sql.find(';') != std::string_view::npos) {
        return false;
    }
    std::string up = upper(sql);
    if (up == "SHOW DATABASES") {
        return true;
    }
    if (starts_with(up, "SHOW TABLES FROM ")) {
        return words(up).size() == 4;
    }
    return is_limited_select(sql);
}

bool postgres_allowed(std::string_view command)
{
    if (starts_with(command, "STARTUP ")) {
        return true;
    }
    if (!starts_with(command, "QUERY ")) {
        return false;
    }
    return is_limited_select(command.substr(6));
}

} // namespace

std::string describe_mongo(const mongo::Message &m)
{
    const bson::Document *doc = mongo::command_document(m);
    if (doc == nullptr || doc->empty()) {
        return std::string(kUnparsed);
    }
    std::string out = doc->front().key;
    const auto *legacy = std::get_if<mongo::OpQuery>(&m.body);
    std::optional<std::string> db = bson::get_string(*doc, "$db");
    if (legacy != nullptr) {
        auto dot = legacy->full_collection_name.find('.');
        db = legacy->full_collection_name.substr(0, dot);
    }
    if (db) {
        out += " db=" + *db;
    }
    if (out.rfind("find ", 0) == 0 || out == "find") {
        if (auto coll = bson::get_string(*doc, "find")) {
            out += " collection=" + *coll;
        }
        auto limit = bson::get_number(*doc, "limit");
        out += " limit=" + (limit ? std::to_string(static_cast<long long>(*limit)) : std::string("none"));
    }
    if (legacy != nullptr) {
        out += " (OP_QUERY)";
    }
    return out;
}

std::string describe_http(const http::Request &r) { return r.method + " " + r.target; }

std::string describe_cql(const cql::Frame &f)
{
    switch (static_cast<cql::Opcode>(f.opcode)) {
    case cql::Opcode::Options: return "OPTIONS";
    case cql::Opcode::Startup: {
        std::string out = "STARTUP";
        try {
            for (const auto &[k, v] : cql::decode_string_map(f.body)) {
                out += " " + k + "=" + v;
            }
        } catch (const DecodeError &) {
            return std::string(kUnparsed);
        }
        return out;
    }
    case cql::Opcode::Query:
        try {
            return "QUERY " + cql::decode_query(f.body).query;
        } catch (const DecodeError &) {
            return std::string(kUnparsed);
        }
    default: break;
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "OPCODE 0x%02x", f.opcode);
    return buf;
}

std::string describe_mysql_login(std::string_view user) { return "LOGIN user=" + std::string(user); }

std::string describe_mysql_command(ByteView payload)
{
    if (auto sql = mysql::decode_com_query(payload)) {
        return "COM_QUERY " + *sql;
    }
    if (payload.size() == 1 && payload[0] == mysql::kComQuit) {
        return "COM_QUIT";
    }
    if (payload.empty()) {
        return std::string(kUnparsed);
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "COMMAND 0x%02x", payload[0]);
    return buf;
}

std::string describe_pg_startup(const pg::Startup &s)
{
    std::string out = "STARTUP";
    for (const auto &[k, v] : s.params) {
        out += " " + k + "=" + v;
    }
    return out;
}

std::string describe_pg(const pg::Message &m)
{
    if (m.type == 'Q') {
        try {
            return "QUERY " + pg::parse_query(m);
        } catch (const DecodeError &) {
            return std::string(kUnparsed);
        }
    }
    return std::string("MESSAGE ") + m.type;
}

bool is_limited_select(std::string_view sql)
{
    if (sql.find(';') != std::string_view::npos) {
        return false;
    }
    auto w = words(upper(sql));
    if (w.size() < 4 || w[0] != "SELECT") {
        return false;
    }
    return w[w.size() - 2] == "LIMIT" && bounded_positive(w.back());
}

bool is_allowed(ServiceKind service, std::string_view command)
{
    if (command == kUnparsed) {
        return false;
    }
    switch (service) {
    case ServiceKind::Redis: return redis_allowed(command);
    case ServiceKind::Memcached: return memcached_allowed(command);
    case ServiceKind::MongoDB: return mongo_allowed(command);
    case ServiceKind::Elasticsearch:
    case ServiceKind::CouchDB: return http_allowed(command);
    case ServiceKind::Cassandra: return cassandra_allowed(command);
    case ServiceKind::MySQL: return mysql_allowed(command);
    case ServiceKind::PostgreSQL: return postgres_allowed(command);
    }
    return false;
}

bool is_credential_attempt(ServiceKind service, std::string_view command)
{
    return service == ServiceKind::MySQL && starts_with(command, "LOGIN ");
}

} // namespace exposcan
