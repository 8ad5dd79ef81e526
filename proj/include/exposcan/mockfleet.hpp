#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exposcan/classification.hpp"
#include "exposcan/net.hpp"
#include "exposcan/target.hpp"

namespace exposcan::fleet {

enum class Scenario : std::uint8_t { Closed, Auth, Empty, NonSensitive, Sensitive, Compromised };

inline constexpr std::array<Scenario, 6> kAllScenarios = {Scenario::Closed, Scenario::Auth, Scenario::Empty,
    Scenario::NonSensitive, Scenario::Sensitive, Scenario::Compromised};

std::string_view scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view name);

ExposureCategory expected_category(Scenario s);
Scenario scenario_for(ExposureCategory c);

// Deliberate misbehaviour, selected with data_overrides.behavior.
enum class Behavior : std::uint8_t {
    Normal,
    Garbage,           // answers with random bytes
    Tarpit,            // accepts and never answers
    CloseMidHandshake, // drops the connection part way into the first reply
    LegacyOnly,        // MongoDB: closes on OP_MSG, serves OP_QUERY
    CachedumpError,    // Memcached: ERROR to stats cachedump
    Oversized,         // records padded well past the default byte budget
};

std::string_view behavior_name(Behavior b);
std::optional<Behavior> parse_behavior(std::string_view name);

// Field/value pairs in a fixed order. Key-value services keep the key in
// the "_key" field; a record with only "_key" and "value" is a plain string.
using DataRecord = std::vector<std::pair<std::string, std::string>>;

struct DataTable {
    std::string name;
    std::vector<DataRecord> rows;
    bool operator==(const DataTable &) const = default;
};

struct DataNamespace {
    std::string name;
    std::vector<DataTable> tables;
    bool system = false;
    bool operator==(const DataNamespace &) const = default;
};

struct Dataset {
    ServiceKind service = ServiceKind::Redis;
    Scenario scenario = Scenario::Empty;
    std::string version;
    bool requires_auth = false;
    std::vector<DataNamespace> namespaces; // system namespaces included

    [[nodiscard]] std::size_t record_count() const;
    bool operator==(const Dataset &) const = default;
};

nlohmann::ordered_json to_json(const Dataset &d);

Dataset generate_scenario_data(ServiceKind service, Scenario scenario, std::uint64_t seed);

struct InstanceConfig {
    ServiceKind service = ServiceKind::Redis;
    Scenario scenario = Scenario::Empty;
    std::optional<std::uint16_t> port; // nullopt = auto
    std::uint64_t seed = 0;
    std::string country{kUnknownCountry};
    nlohmann::json data_overrides = nlohmann::json::object();
};

struct FleetConfig {
    std::vector<InstanceConfig> instances;
};

// Throws ParseError (bad JSON or fields) or UnsupportedService.
FleetConfig parse_fleet_config(std::string_view json_text);
FleetConfig load_fleet_config(const std::filesystem::path &path);
nlohmann::ordered_json to_json(const FleetConfig &c);

// Applies data_overrides.namespaces / version on top of generated data.
Dataset instance_dataset(const InstanceConfig &c);
Behavior instance_behavior(const InstanceConfig &c);

struct CommandLogEntry {
    std::size_t instance_id = 0;
    ServiceKind service = ServiceKind::Redis;
    std::chrono::system_clock::time_point timestamp;
    std::uint64_t sequence = 0; // arrival order within the fleet
    std::string raw_hex;
    std::string parsed_command; // "unparsed" when the bytes did not decode

    bool operator==(const CommandLogEntry &) const = default;
};

nlohmann::ordered_json to_json(const CommandLogEntry &e);
CommandLogEntry log_entry_from_json(const nlohmann::json &j);

// Total order: timestamp, then instance id, then arrival.
void sort_log(std::vector<CommandLogEntry> &entries);

struct Violation {
    CommandLogEntry entry;
    std::string reason;
};

// Commands outside the allow-lists, plus MySQL logins unless permitted.
std::vector<Violation> audit_log(const std::vector<CommandLogEntry> &entries, bool logins_permitted);

struct FleetInstance {
    std::size_t id = 0;
    InstanceConfig config;
    std::string address;
    std::uint16_t port = 0;
};

struct FleetOptions {
    std::string host = "127.0.0.1";
    // Called for every logged command, from the instance threads.
    std::function<void(const CommandLogEntry &)> on_command;
    std::chrono::milliseconds idle_timeout{30000};
};

class FleetHandle {
public:
    FleetHandle();
    FleetHandle(FleetHandle &&) noexcept;
    FleetHandle &operator=(FleetHandle &&) noexcept;
    ~FleetHandle();

    [[nodiscard]] const std::vector<FleetInstance> &instances() const;
    [[nodiscard]] UtcTime started_at() const;

    // Stops every listener; the command log stays readable.
    void stop();

    struct State;

private:
    friend FleetHandle spawn_fleet(const FleetConfig &, const FleetOptions &);
    friend std::vector<CommandLogEntry> command_log(const FleetHandle &);
    std::unique_ptr<State> state_;
};

// Throws PortInUse, UnsupportedService.
FleetHandle spawn_fleet(const FleetConfig &config, const FleetOptions &options = {});

struct LabeledTarget {
    std::size_t instance_id = 0;
    TargetRecord target;
    ExposureCategory expected = ExposureCategory::FailedToConnect;
    Scenario scenario = Scenario::Closed;
};

std::vector<LabeledTarget> ground_truth(const FleetHandle &handle);
std::vector<CommandLogEntry> command_log(const FleetHandle &handle);

// Discovery JSONL line plus instance_id, scenario and expected_category.
nlohmann::ordered_json to_json(const LabeledTarget &t);
LabeledTarget labeled_target_from_json(const nlohmann::json &j);

// A loopback listener whose accept queue is already full, so further
// connects neither succeed nor get refused.
class Blackhole {
public:
    Blackhole();
    [[nodiscard]] std::uint16_t port() const { return port_; }

private:
    net::Socket listener_;
    std::vector<net::Socket> fillers_;
    std::uint16_t port_ = 0;
};

} // namespace exposcan::fleet
