#include <gtest/gtest.h>

#include <map>

#include "../support/fleets.hpp"
#include "../support/tempdir.hpp"
#include "exposcan/errors.hpp"

using namespace exposcan;
using namespace exposcan::fleet;
using gen::fast_config;
using gen::instance;
using gen::misbehaving;

namespace {

using ms = std::chrono::milliseconds;

// Generous slack for scheduling on a loaded machine.
constexpr ms kSlack{750};

TargetRecord loopback(ServiceKind s, std::uint16_t port)
{
    TargetRecord t;
    t.address = "127.0.0.1";
    t.port = port;
    t.service = s;
    return t;
}

std::map<std::size_t, std::size_t> entries_per_instance(const std::vector<CommandLogEntry> &log)
{
    std::map<std::size_t, std::size_t> out;
    for (const auto &e : log) {
        ++out[e.instance_id];
    }
    return out;
}

std::string without_timing(const std::vector<ProbeResult> &results)
{
    std::string out;
    for (const auto &r : results) {
        out += to_json(r).dump() + "\n";
    }
    return out;
}

} // namespace

TEST(Ceiling, ConnectPlusRoundTrips)
{
    ProbeBudget b;
    b.connect_timeout = ms(300);
    b.io_timeout = ms(200);
    for (ServiceKind s : kAllServices) {
        auto k = timeout_round_trips(s, b);
        EXPECT_GE(k, check_round_trips(s));
        EXPECT_EQ(timeout_ceiling(s, b), ms(300) + ms(200) * static_cast<long>(k));
    }
}

TEST(Check, BlackholeTimesOut)
{
    Blackhole hole;
    ProbeBudget b;
    b.connect_timeout = ms(300);
    b.io_timeout = ms(300);
    auto t = loopback(ServiceKind::Redis, hole.port());
    auto start = std::chrono::steady_clock::now();
    EXPECT_EQ(check_connection(t, b), ConnStatus::TimedOut);
    EXPECT_LE(std::chrono::steady_clock::now() - start, timeout_ceiling(t.service, b) + kSlack);
}

TEST(Check, ClosedPortIsRefused)
{
    auto fleet = spawn_fleet({{instance(ServiceKind::MongoDB, Scenario::Closed, 1)}});
    auto truth = ground_truth(fleet);
    ASSERT_EQ(truth.size(), 1u);
    EXPECT_EQ(check_connection(truth[0].target, fast_config(false).budget), ConnStatus::Refused);
    auto r = run_probe(truth[0].target, fast_config(false));
    EXPECT_EQ(r.category, ExposureCategory::FailedToConnect);
    EXPECT_EQ(r.timing.messages_sent, 0u);
}

TEST(Misbehaviour, StaysWithinCeiling)
{
    FleetConfig cfg;
    for (ServiceKind s : kAllServices) {
        for (const char *b : {"garbage", "tarpit", "close_mid_handshake"}) {
            cfg.instances.push_back(misbehaving(s, Scenario::Sensitive, b));
        }
    }
    auto fleet = spawn_fleet(cfg);
    auto config = fast_config(true, ms(250));
    config.parallelism = 24;
    std::vector<TargetRecord> targets;
    for (const auto &t : ground_truth(fleet)) {
        targets.push_back(t.target);
    }
    auto results = run_scan(targets, config);
    ASSERT_EQ(results.size(), targets.size());
    for (const auto &r : results) {
        std::string what = std::string(service_name(r.target.service)) + ":" + std::to_string(r.target.port);
        EXPECT_LE(r.timing.duration, timeout_ceiling(r.target.service, config.budget) + kSlack) << what;
        EXPECT_NE(r.category, ExposureCategory::SensitiveData) << what;
        EXPECT_NE(r.category, ExposureCategory::Compromised) << what;
    }
}

TEST(Misbehaviour, GarbageHandshakeIsTcpOnly)
{
    FleetConfig cfg;
    for (ServiceKind s : kAllServices) {
        cfg.instances.push_back(misbehaving(s, Scenario::Sensitive, "garbage"));
    }
    auto fleet = spawn_fleet(cfg);
    for (const auto &t : ground_truth(fleet)) {
        auto status = check_connection(t.target, fast_config(false, ms(400)).budget);
        EXPECT_TRUE(status == ConnStatus::TcpOnly || status == ConnStatus::TimedOut)
            << service_name(t.target.service) << " " << status_name(status);
    }
}

TEST(Mongo, LegacyOnlyFallsBackToOpQuery)
{
    auto fleet = spawn_fleet({{misbehaving(ServiceKind::MongoDB, Scenario::Sensitive, "legacy_only", 4)}});
    auto r = run_probe(ground_truth(fleet)[0].target, fast_config(false));
    EXPECT_EQ(r.status, ConnStatus::ProtocolOk);
    EXPECT_EQ(r.harvest.server_info["wire"], "op_query");
    EXPECT_EQ(r.category, ExposureCategory::SensitiveData);
    EXPECT_TRUE(audit_log(command_log(fleet), false).empty());
}

TEST(Memcached, CachedumpErrorIsNoted)
{
    auto fleet = spawn_fleet({{misbehaving(ServiceKind::Memcached, Scenario::Sensitive, "cachedump_error", 5)}});
    auto r = run_probe(ground_truth(fleet)[0].target, fast_config(false));
    EXPECT_EQ(r.status, ConnStatus::ProtocolOk);
    EXPECT_EQ(r.category, ExposureCategory::ConnectedNoData);
    EXPECT_NE(std::find(r.harvest.notes.begin(), r.harvest.notes.end(), "stats cachedump refused"),
        r.harvest.notes.end());
}

TEST(Budget, OversizedRecordsAreTruncated)
{
    FleetConfig cfg;
    for (ServiceKind s : {ServiceKind::Redis, ServiceKind::MongoDB, ServiceKind::Elasticsearch,
             ServiceKind::Memcached, ServiceKind::PostgreSQL}) {
        cfg.instances.push_back(misbehaving(s, Scenario::NonSensitive, "oversized", 6));
    }
    auto fleet = spawn_fleet(cfg);
    auto config = fast_config(true);
    config.budget.max_bytes_total = 128 * 1024;
    for (const auto &t : ground_truth(fleet)) {
        auto r = run_probe(t.target, config);
        std::string what(service_name(t.target.service));
        EXPECT_LE(r.harvest.total_bytes, config.budget.max_bytes_total) << what;
        for (const auto &ns : r.harvest.namespaces) {
            for (const auto &s : ns.samples) {
                EXPECT_LE(s.size(), kMaxSampleBytes) << what;
            }
        }
        EXPECT_NE(r.category, ExposureCategory::FailedToConnect) << what;
    }
}

TEST(MySql, DefaultModeNeverLogsIn)
{
    auto fleet = spawn_fleet({{instance(ServiceKind::MySQL, Scenario::NonSensitive, 7),
        instance(ServiceKind::MySQL, Scenario::Compromised, 8)}});
    for (const auto &t : ground_truth(fleet)) {
        auto r = run_probe(t.target, fast_config(false));
        EXPECT_EQ(r.status, ConnStatus::AuthRequired);
        EXPECT_EQ(r.category, ExposureCategory::ConnectedNoData);
    }
    auto log = command_log(fleet);
    EXPECT_TRUE(audit_log(log, false).empty());
    for (const auto &e : log) {
        EXPECT_EQ(e.parsed_command.find("login"), std::string::npos) << e.parsed_command;
    }
}

TEST(Scan, MessagesSentMatchesFleetLog)
{
    auto fleet = spawn_fleet(gen::every_pair());
    auto truth = ground_truth(fleet);
    auto config = fast_config(true);
    std::map<std::size_t, std::size_t> sent;
    for (const auto &t : truth) {
        sent[t.instance_id] = run_probe(t.target, config).timing.messages_sent;
    }
    fleet.stop();
    auto logged = entries_per_instance(command_log(fleet));
    for (const auto &t : truth) {
        EXPECT_EQ(logged[t.instance_id], sent[t.instance_id])
            << service_name(t.target.service) << " " << scenario_name(t.scenario);
    }
}

TEST(Scan, ParallelismDoesNotChangeResults)
{
    auto fleet = spawn_fleet(gen::every_pair());
    std::vector<TargetRecord> targets;
    for (const auto &t : ground_truth(fleet)) {
        targets.push_back(t.target);
    }
    std::reverse(targets.begin(), targets.end());
    auto serial = fast_config(true);
    serial.parallelism = 1;
    auto wide = fast_config(true);
    wide.parallelism = 8;
    auto a = run_scan(targets, serial);
    auto b = run_scan(targets, wide);
    EXPECT_EQ(without_timing(a), without_timing(b));
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(),
        [](const ProbeResult &x, const ProbeResult &y) { return layout_less(x.target, y.target); }));

    auto zero = serial;
    zero.parallelism = 0;
    EXPECT_THROW(run_scan(targets, zero), PreconditionError);
}

TEST(Persistence, StatusesAndResultsRoundTrip)
{
    auto fleet = spawn_fleet(gen::every_pair());
    std::vector<TargetRecord> targets;
    for (const auto &t : ground_truth(fleet)) {
        targets.push_back(t.target);
    }
    auto config = fast_config(true);
    gen::TempDir dir("engine");
    auto statuses = run_checks(targets, config);
    persist_statuses(statuses, dir.path());
    EXPECT_EQ(load_statuses(dir.path()), statuses);

    auto results = run_probes(statuses, config);
    persist_results(results, dir.path());
    auto loaded = load_results(dir.path());
    EXPECT_EQ(without_timing(loaded), without_timing(results));
    EXPECT_TRUE(std::filesystem::exists(dir / "EE/redis/results.jsonl"));
    EXPECT_TRUE(std::filesystem::exists(dir / "EE/redis/timings.jsonl"));
    EXPECT_EQ(load_results(dir.path(), {ServiceKind::Redis, std::nullopt}).size(), 6u);
}
