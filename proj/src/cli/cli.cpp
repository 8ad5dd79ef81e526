#include "exposcan/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "exposcan/errors.hpp"

namespace exposcan {

CliEnvironment process_environment()
{
    CliEnvironment env;
    env.getenv = [](std::string_view name) -> std::optional<std::string> {
        const char *v = std::getenv(std::string(name).c_str());
        if (v == nullptr) {
            return std::nullopt;
        }
        return std::string(v);
    };
    env.clock = utc_now;
    return env;
}

namespace {

using namespace cli;

struct Flags {
    std::string out;
    std::string config;
    std::string service;
    std::string country;
    std::size_t parallelism = 0;
    std::uint64_t connect_timeout_ms = 0;
    std::uint64_t io_timeout_ms = 0;
    std::size_t max_results = 0;
    bool try_default_credentials = false;
    bool authorized = false;
    bool print_config = false;
    std::vector<std::string> sources;
    std::string targets;
    std::string fixture;
    bool live = false;
    std::string format = "text";
    bool matrix = false;
    std::string state_dir;
    double duration_s = 0;
    std::string host = "127.0.0.1";
    bool audit = false;

    std::map<std::string, CLI::Option *> opts;

    [[nodiscard]] bool given(const std::string &name) const
    {
        auto it = opts.find(name);
        return it != opts.end() && it->second->count() > 0;
    }
};

Settings build_settings(const Flags &f, const CliEnvironment &env)
{
    Settings s;
    apply_environment(s, env);
    if (f.given("--config")) {
        apply_config_file(s, f.config);
    }
    if (f.given("--out")) {
        s.out = f.out;
    }
    if (f.given("--source")) {
        s.sources.clear();
        for (const auto &name : f.sources) {
            auto src = parse_source(name);
            if (!src) {
                throw PreconditionError("unknown source '" + name + "' (file, shodan, binaryedge)");
            }
            s.sources.push_back(*src);
        }
    }
    if (f.given("--targets")) {
        s.targets = f.targets;
    }
    if (f.given("--fixture")) {
        s.fixture = f.fixture;
    }
    s.live = s.live || f.live;
    if (f.given("--service")) {
        auto svc = parse_service(f.service);
        if (!svc) {
            throw UnsupportedService("unknown service '" + f.service + "'");
        }
        s.service = *svc;
    }
    if (f.given("--country")) {
        s.country = f.country;
    }
    if (s.country) {
        std::string up = *s.country;
        std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
        if (!is_valid_country(up)) {
            throw PreconditionError("country must be a two-letter code or ??, got '" + *s.country + "'");
        }
        s.country = up;
    }
    if (f.given("--max-results")) {
        s.max_results = f.max_results;
    }
    if (f.given("--parallelism")) {
        s.parallelism = f.parallelism;
    }
    if (f.given("--connect-timeout-ms")) {
        s.budget.connect_timeout = std::chrono::milliseconds(f.connect_timeout_ms);
    }
    if (f.given("--io-timeout-ms")) {
        s.budget.io_timeout = std::chrono::milliseconds(f.io_timeout_ms);
    }
    s.try_default_credentials = s.try_default_credentials || f.try_default_credentials;
    s.authorized = f.authorized;
    if (s.out.empty()) {
        throw PreconditionError("--out <dir> is required");
    }
    return s;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, const CliEnvironment &env)
{
    CLI::App app{"Non-intrusive scanner for exposed databases", "exposcan"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    auto add = [&](CLI::App &on, const std::string &name, auto &var, const std::string &help) {
        f.opts[name] = on.add_option(name, var, help);
        return f.opts[name];
    };
    auto flag = [&](CLI::App &on, const std::string &name, bool &var, const std::string &help) {
        f.opts[name] = on.add_flag(name, var, help);
    };
    add(app, "--out", f.out, "run directory");
    add(app, "--config", f.config, "JSON config file (fleet up: fleet config)");
    add(app, "--service", f.service, "restrict to one service");
    add(app, "--country", f.country, "restrict to one country code");
    add(app, "--parallelism", f.parallelism, "concurrent probes")->check(CLI::PositiveNumber);
    add(app, "--connect-timeout-ms", f.connect_timeout_ms, "TCP connect timeout")->check(CLI::PositiveNumber);
    add(app, "--io-timeout-ms", f.io_timeout_ms, "per read/write timeout")->check(CLI::PositiveNumber);
    flag(app, "--try-default-credentials", f.try_default_credentials, "allow the blank-password MySQL root login");
    flag(app, "--i-have-authorization", f.authorized, "permit probing non-loopback targets");
    flag(app, "--print-config", f.print_config, "print the effective configuration");
    add(app, "--source", f.sources, "file, shodan, binaryedge")->delimiter(',');
    add(app, "--targets", f.targets, "JSONL target list for the file source");
    add(app, "--fixture", f.fixture, "recorded search API responses");
    flag(app, "--live", f.live, "call the real search APIs");
    add(app, "--max-results", f.max_results, "per source and service")->check(CLI::PositiveNumber);
    add(app, "--format", f.format, "json, csv or text");
    flag(app, "--matrix", f.matrix, "also print the capability matrix");
    add(app, "--state-dir", f.state_dir, "fleet state directory");

    auto *gather = app.add_subcommand("gather", "find targets and store them per country and service");
    auto *check = app.add_subcommand("check", "record the connection status of stored targets");
    auto *parse = app.add_subcommand("parse", "probe connected targets and classify them");
    auto *report = app.add_subcommand("report", "aggregate results into report.json, report.csv and a table");
    auto *scan = app.add_subcommand("scan", "gather, check, parse and report in one go");
    auto *fleet = app.add_subcommand("fleet", "run the mock database fleet");
    fleet->require_subcommand(1);
    auto *fleet_up = fleet->add_subcommand("up", "start the fleet until interrupted");
    add(*fleet_up, "--duration-s", f.duration_s, "stop after this many seconds")->check(CLI::PositiveNumber);
    add(*fleet_up, "--host", f.host, "listen address");
    auto *fleet_truth = fleet->add_subcommand("ground-truth", "print labeled targets as JSONL");
    auto *fleet_log = fleet->add_subcommand("log", "print the command log");
    flag(*fleet_log, "--audit", f.audit, "exit 1 if any command breaks the allow-lists");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 1;
    }

    Io io{out, err, env};
    try {
        if (fleet->parsed()) {
            if (f.state_dir.empty()) {
                throw PreconditionError("--state-dir <dir> is required");
            }
            if (fleet_up->parsed()) {
                if (f.config.empty()) {
                    throw PreconditionError("fleet up needs --config <fleet.json>");
                }
                FleetUpArgs up{f.config, f.state_dir, f.host, std::nullopt};
                if (f.given("--duration-s")) {
                    up.duration_s = f.duration_s;
                }
                return cmd_fleet_up(up, io);
            }
            if (fleet_truth->parsed()) {
                return cmd_fleet_ground_truth(f.state_dir, io);
            }
            return cmd_fleet_log(f.state_dir, f.audit, f.try_default_credentials, io);
        }

        Settings s = build_settings(f, env);
        if (f.print_config) {
            out << snapshot(s).dump(2) << "\n";
        }
        if (gather->parsed()) {
            return cmd_gather(s, io);
        }
        if (check->parsed()) {
            return cmd_check(s, io);
        }
        if (parse->parsed()) {
            return cmd_parse(s, io);
        }
        if (report->parsed()) {
            return cmd_report(s, f.format, f.matrix, io);
        }
        if (scan->parsed()) {
            return cmd_scan(s, f.format, f.matrix, io);
        }
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace exposcan
