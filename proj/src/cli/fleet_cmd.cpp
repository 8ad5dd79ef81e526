#include <atomic>
#include <csignal>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "exposcan/errors.hpp"
#include "exposcan/fsutil.hpp"
#include "exposcan/mockfleet.hpp"

namespace exposcan::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

json read_state(const fs::path &state_dir)
{
    fs::path path = state_dir / kFleetStateFile;
    if (!fs::exists(path)) {
        throw IoError("no fleet state at " + path.string() + "; run 'fleet up' first");
    }
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.contains("ground_truth")) {
        throw ParseError(path.string() + " is not a fleet state file");
    }
    return j;
}

} // namespace

int cmd_fleet_up(const FleetUpArgs &args, Io io)
{
    auto config = fleet::load_fleet_config(args.config);
    ensure_directory(args.state_dir);

    std::mutex log_mutex;
    std::ofstream log(args.state_dir / kCommandLogFile, std::ios::trunc);
    if (!log) {
        throw IoError("cannot write " + (args.state_dir / kCommandLogFile).string());
    }
    fleet::FleetOptions options;
    options.host = args.host;
    options.on_command = [&](const fleet::CommandLogEntry &e) {
        std::lock_guard lock(log_mutex);
        log << to_json(e).dump() << "\n" << std::flush;
    };
    auto handle = fleet::spawn_fleet(config, options);

    ordered_json state;
    state["started_at"] = format_iso8601(handle.started_at());
    state["host"] = args.host;
    state["instances"] = ordered_json::array();
    for (const auto &inst : handle.instances()) {
        state["instances"].push_back({{"instance_id", inst.id}, {"service", service_name(inst.config.service)},
            {"scenario", fleet::scenario_name(inst.config.scenario)}, {"address", inst.address},
            {"port", inst.port}});
    }
    state["ground_truth"] = ordered_json::array();
    for (const auto &t : fleet::ground_truth(handle)) {
        state["ground_truth"].push_back(to_json(t));
    }
    write_file_atomically(args.state_dir / kFleetStateFile, state.dump(2) + "\n");

    for (const auto &inst : handle.instances()) {
        io.out << inst.id << "\t" << service_name(inst.config.service) << "\t"
               << fleet::scenario_name(inst.config.scenario) << "\t" << inst.address << ":" << inst.port << "\n";
    }
    io.out << std::flush;

    g_interrupted = false;
    auto previous_int = std::signal(SIGINT, on_signal);
    auto previous_term = std::signal(SIGTERM, on_signal);
    auto deadline = args.duration_s
        ? std::optional(std::chrono::steady_clock::now()
            + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(*args.duration_s)))
        : std::nullopt;
    while (!g_interrupted && (!deadline || std::chrono::steady_clock::now() < *deadline)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);
    handle.stop();
    return 0;
}

int cmd_fleet_ground_truth(const fs::path &state_dir, Io io)
{
    json state = read_state(state_dir);
    for (const auto &line : state["ground_truth"]) {
        io.out << line.dump() << "\n";
    }
    return 0;
}

int cmd_fleet_log(const fs::path &state_dir, bool audit, bool logins_permitted, Io io)
{
    read_state(state_dir);
    std::vector<fleet::CommandLogEntry> entries;
    std::istringstream in(read_file(state_dir / kCommandLogFile));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            // the writer may be mid-line while the fleet is still up
            if (in.peek() == EOF) {
                break;
            }
            throw ParseError(std::string(kCommandLogFile) + " line " + std::to_string(n) + " is not JSON");
        }
        entries.push_back(fleet::log_entry_from_json(j));
    }
    fleet::sort_log(entries);
    for (const auto &e : entries) {
        io.out << to_json(e).dump() << "\n";
    }
    if (!audit) {
        return 0;
    }
    auto violations = fleet::audit_log(entries, logins_permitted);
    for (const auto &v : violations) {
        io.err << "violation: instance " << v.entry.instance_id << " " << service_name(v.entry.service) << ": "
               << v.reason << ": " << v.entry.parsed_command << "\n";
    }
    return violations.empty() ? 0 : 1;
}

} // namespace exposcan::cli
