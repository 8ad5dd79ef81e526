#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include <json.hpp>

#include "exposcan/service.hpp"
#include "exposcan/time.hpp"

namespace exposcan {

enum class TargetSource : std::uint8_t { Shodan, BinaryEdge, File };

std::string_view source_name(TargetSource s);
std::optional<TargetSource> parse_source(std::string_view name);

inline constexpr std::string_view kUnknownCountry = "??";

// One discovered endpoint. (address, port, service) is the identity.
struct TargetRecord {
    std::string address;
    std::uint16_t port = 0;
    ServiceKind service = ServiceKind::MongoDB;
    std::string country{kUnknownCountry};
    TargetSource source = TargetSource::File;
    UtcTime discovered_at{};

    bool operator==(const TargetRecord &) const = default;
};

using TargetIdentity = std::tuple<std::string, std::uint16_t, ServiceKind>;

inline TargetIdentity identity(const TargetRecord &r) { return {r.address, r.port, r.service}; }

// Ordering used for persisted layouts and scan output.
bool layout_less(const TargetRecord &a, const TargetRecord &b);

// Two uppercase ASCII letters, or "??".
bool is_valid_country(std::string_view country);

// Uppercases a two-letter code; anything unusable becomes "??".
std::string normalize_country(std::string_view raw);

// Throws PreconditionError on an out-of-range port, bad country or empty address.
void validate(const TargetRecord &r);

// JSON Lines representation with fixed key order:
// address, port, service, country, source, discovered_at.
nlohmann::ordered_json to_json(const TargetRecord &r);
TargetRecord target_from_json(const nlohmann::json &j);

std::string to_jsonl_line(const TargetRecord &r);

struct TargetFilter {
    std::optional<ServiceKind> service;
    std::optional<std::string> country;

    [[nodiscard]] bool accepts(const TargetRecord &r) const;
};


} // namespace exposcan
