#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace exposcan {

// The eight database services the scanner knows how to probe.
enum class ServiceKind : std::uint8_t {
    MongoDB,
    Redis,
    Elasticsearch,
    CouchDB,
    Cassandra,
    Memcached,
    MySQL,
    PostgreSQL,
};

enum class ProtocolFamily : std::uint8_t { Binary, Text, Http };

inline constexpr std::array<ServiceKind, 8> kAllServices = {
    ServiceKind::MongoDB,   ServiceKind::Redis,     ServiceKind::Elasticsearch,
    ServiceKind::CouchDB,   ServiceKind::Cassandra, ServiceKind::Memcached,
    ServiceKind::MySQL,     ServiceKind::PostgreSQL,
};

// Lowercase identifier used in files, folders and on the command line.
constexpr std::string_view service_name(ServiceKind s)
{
    switch (s) {
    case ServiceKind::MongoDB: return "mongodb";
    case ServiceKind::Redis: return "redis";
    case ServiceKind::Elasticsearch: return "elasticsearch";
    case ServiceKind::CouchDB: return "couchdb";
    case ServiceKind::Cassandra: return "cassandra";
    case ServiceKind::Memcached: return "memcached";
    case ServiceKind::MySQL: return "mysql";
    case ServiceKind::PostgreSQL: return "postgresql";
    }
    return "unknown";
}

constexpr std::string_view service_display_name(ServiceKind s)
{
    switch (s) {
    case ServiceKind::MongoDB: return "MongoDB";
    case ServiceKind::Redis: return "Redis";
    case ServiceKind::Elasticsearch: return "Elasticsearch";
    case ServiceKind::CouchDB: return "CouchDB";
    case ServiceKind::Cassandra: return "Cassandra";
    case ServiceKind::Memcached: return "Memcached";
    case ServiceKind::MySQL: return "MySQL";
    case ServiceKind::PostgreSQL: return "PostgreSQL";
    }
    return "Unknown";
}

constexpr std::uint16_t default_port(ServiceKind s)
{
    switch (s) {
    case ServiceKind::MongoDB: return 27017;
    case ServiceKind::Redis: return 6379;
    case ServiceKind::Elasticsearch: return 9200;
    case ServiceKind::CouchDB: return 5984;
    case ServiceKind::Cassandra: return 9042;
    case ServiceKind::Memcached: return 11211;
    case ServiceKind::MySQL: return 3306;
    case ServiceKind::PostgreSQL: return 5432;
    }
    return 0;
}

constexpr ProtocolFamily protocol_family(ServiceKind s)
{
    switch (s) {
    case ServiceKind::Elasticsearch:
    case ServiceKind::CouchDB: return ProtocolFamily::Http;
    case ServiceKind::Redis:
    case ServiceKind::Memcached: return ProtocolFamily::Text;
    default: return ProtocolFamily::Binary;
    }
}

constexpr std::optional<ServiceKind> parse_service(std::string_view name)
{
    for (ServiceKind s : kAllServices) {
        if (service_name(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

} // namespace exposcan
