#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "settings.hpp"

namespace exposcan::cli {

struct Io {
    std::ostream &out;
    std::ostream &err;
    const CliEnvironment &env;
};

int cmd_gather(const Settings &s, Io io);
int cmd_check(const Settings &s, Io io);
int cmd_parse(const Settings &s, Io io);
int cmd_report(const Settings &s, const std::string &format, bool matrix, Io io);
int cmd_scan(const Settings &s, const std::string &format, bool matrix, Io io);

struct FleetUpArgs {
    std::filesystem::path config;
    std::filesystem::path state_dir;
    std::string host = "127.0.0.1";
    std::optional<double> duration_s;
};

int cmd_fleet_up(const FleetUpArgs &args, Io io);
int cmd_fleet_ground_truth(const std::filesystem::path &state_dir, Io io);
// With `audit`, exits 1 when any entry breaks the allow-lists.
int cmd_fleet_log(const std::filesystem::path &state_dir, bool audit, bool logins_permitted, Io io);

inline constexpr std::string_view kFleetStateFile = "fleet.json";
inline constexpr std::string_view kCommandLogFile = "commands.jsonl";

} // namespace exposcan::cli
