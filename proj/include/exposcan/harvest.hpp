#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace exposcan {

// Outcome of the connection check for one target.
enum class ConnStatus : std::uint8_t { Refused, TimedOut, TcpOnly, ProtocolOk, AuthRequired };

std::string_view status_name(ConnStatus s);
std::optional<ConnStatus> parse_status(std::string_view name);

inline bool is_connected(ConnStatus s)
{
    return s == ConnStatus::ProtocolOk || s == ConnStatus::AuthRequired;
}

struct ProbeBudget {
    std::chrono::milliseconds connect_timeout{3000};
    std::chrono::milliseconds io_timeout{5000};
    std::size_t max_namespaces = 20;
    std::size_t max_samples_per_namespace = 5;
    std::uint64_t max_bytes_total = 1u << 20;

    // Throws PreconditionError unless every field is positive.
    void validate() const;
};

nlohmann::ordered_json to_json(const ProbeBudget &b);

inline constexpr std::size_t kMaxSampleBytes = 4096;
inline constexpr std::string_view kTruncationMarker = "...[truncated]";

struct NamespaceSample {
    std::string name;
    std::optional<std::uint64_t> record_count;
    std::vector<std::string> samples;

    bool operator==(const NamespaceSample &) const = default;
};

struct Harvest {
    std::map<std::string, std::string> server_info;
    std::vector<NamespaceSample> namespaces;
    bool empty = false;
    bool auth_blocked = false;
    std::uint64_t total_bytes = 0;
    // Probe-side failures and truncations, in the order they happened.
    std::vector<std::string> notes;

    bool operator==(const Harvest &) const = default;
};

nlohmann::ordered_json to_json(const Harvest &h);
Harvest harvest_from_json(const nlohmann::json &j);

// Lossy UTF-8 conversion: invalid bytes and control characters other than
// tab/newline become \xNN. The result is capped at kMaxSampleBytes, ending
// with kTruncationMarker when cut.
std::string sample_text(std::string_view raw);

} // namespace exposcan
