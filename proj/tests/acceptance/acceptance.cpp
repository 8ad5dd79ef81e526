// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "../support/classifier_oracle.hpp"
#include "../support/fleets.hpp"
#include "../support/tempdir.hpp"
#include "exposcan/cli.hpp"
#include "exposcan/reporting.hpp"

using namespace exposcan;
using namespace exposcan::fleet;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::vector<std::string> kTimeouts = {"--connect-timeout-ms", "1000", "--io-timeout-ms", "1000"};

std::string slurp(const std::filesystem::path &p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path write_targets(const FleetHandle &fleet, const std::filesystem::path &file)
{
    std::ofstream out(file);
    for (const auto &t : ground_truth(fleet)) {
        out << to_jsonl_line(t.target) << "\n";
    }
    return file;
}

// Runs the CLI with extra args and returns its exit code; stderr is kept for diagnostics.
int exposcan(std::vector<std::string> args, std::string *err_out = nullptr)
{
    args.insert(args.end() - 1, kTimeouts.begin(), kTimeouts.end());
    std::ostringstream out;
    std::ostringstream err;
    CliEnvironment env = process_environment();
    env.getenv = [](std::string_view) { return std::optional<std::string>(); };
    int rc = run_cli(args, out, err, env);
    if (err_out != nullptr) {
        *err_out = err.str();
    }
    return rc;
}

std::string scan_fleet(const FleetHandle &fleet, const std::filesystem::path &dir, bool creds,
    const std::string &parallelism = "8")
{
    auto targets = write_targets(fleet, dir / "targets.jsonl");
    std::vector<std::string> args = {"--out", (dir / "run").string(), "--targets", targets.string(),
        "--parallelism", parallelism};
    if (creds) {
        args.push_back("--try-default-credentials");
    }
    args.push_back("scan");
    std::string err;
    if (int rc = exposcan(args, &err); rc != 0) {
        throw std::runtime_error("scan exited " + std::to_string(rc) + ": " + err);
    }
    return (dir / "run").string();
}

// Rounds `ours` (a ratio) to the precision `shown` is printed with and
// checks it lies within 0.1 percentage point.
bool matches_shown(double ours, const std::string &shown)
{
    auto dot = shown.find('.');
    int decimals = dot == std::string::npos ? 0 : static_cast<int>(shown.size() - dot - 1);
    double scale = std::pow(10.0, decimals);
    double rounded = std::round(ours * 100.0 * scale) / scale;
    return std::fabs(rounded - std::stod(shown)) <= 0.1 + 1e-9;
}

const ServiceStats *find_stats(const ExposureReport &r, ServiceKind s)
{
    for (const auto &st : r.per_service) {
        if (st.service == s) {
            return &st;
        }
    }
    return nullptr;
}

struct Expected {
    std::string label;
    ExposureCategory category;
    std::string shown;
};

Outcome ratio_column(ServiceKind service, const std::vector<std::pair<Scenario, std::size_t>> &mix,
    const std::string &connect_shown, const std::vector<Expected> &expected)
{
    FleetConfig cfg;
    std::uint64_t seed = 100;
    for (const auto &[sc, n] : mix) {
        gen::add(cfg, service, sc, n, seed);
    }
    auto fleet = spawn_fleet(cfg);
    gen::TempDir dir("ratio");
    auto out = scan_fleet(fleet, dir.path(), false, "32");
    auto report = parse_report_json(slurp(std::filesystem::path(out) / "report.json"));
    const auto *st = find_stats(report, service);
    if (st == nullptr) {
        return {false, "service missing from report"};
    }
    std::ostringstream detail;
    bool ok = matches_shown(st->connect_ratio, connect_shown);
    detail << st->connected << "/" << st->total_found << " connect " << format_percent(st->connect_ratio)
           << "% (expect " << connect_shown << ")";
    for (const auto &e : expected) {
        double ratio = st->category_ratios[static_cast<std::size_t>(e.category)];
        ok = ok && matches_shown(ratio, e.shown);
        detail << ", " << e.label << " " << format_percent(ratio) << "% (expect " << e.shown << ")";
    }
    return {ok, detail.str()};
}

Outcome closed_loop(FleetHandle &fleet, const std::filesystem::path &dir)
{
    auto truth = ground_truth(fleet);
    auto start = Clock::now();
    auto out = scan_fleet(fleet, dir, true);
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::map<TargetIdentity, ExposureCategory> got;
    for (const auto &r : load_results(out)) {
        got[identity(r.target)] = r.category;
    }
    std::size_t right = 0;
    std::string misses;
    for (const auto &t : truth) {
        auto it = got.find(identity(t.target));
        if (it != got.end() && it->second == t.expected) {
            ++right;
        } else {
            misses += std::string(" ") + std::string(service_name(t.target.service)) + "/" +
                std::string(scenario_name(t.scenario));
        }
    }
    std::ostringstream detail;
    detail << right << "/" << truth.size() << " in " << std::fixed << std::setprecision(2) << secs << " s" << misses;
    return {truth.size() == 48 && right == truth.size() && secs < 60.0, detail.str()};
}

Outcome capability_matrix()
{
    FleetConfig cfg;
    std::uint64_t seed = 500;
    using S = Scenario;
    using K = ServiceKind;
    for (S sc : {S::NonSensitive, S::Sensitive, S::Compromised}) {
        gen::add(cfg, K::MongoDB, sc, 1, seed);
    }
    gen::add(cfg, K::Redis, S::Auth, 1, seed);
    gen::add(cfg, K::Redis, S::Empty, 10, seed);
    gen::add(cfg, K::Redis, S::Sensitive, 10, seed);
    gen::add(cfg, K::CouchDB, S::Auth, 3, seed);
    for (S sc : {S::Empty, S::NonSensitive, S::Sensitive, S::Compromised}) {
        gen::add(cfg, K::Memcached, sc, 1, seed);
    }
    gen::add(cfg, K::Elasticsearch, S::Auth, 1, seed);
    for (S sc : {S::Empty, S::NonSensitive, S::Sensitive, S::Compromised}) {
        gen::add(cfg, K::Elasticsearch, sc, 5, seed);
    }
    gen::add(cfg, K::Cassandra, S::Empty, 1, seed);
    gen::add(cfg, K::Cassandra, S::NonSensitive, 1, seed);
    gen::add(cfg, K::MySQL, S::Auth, 1, seed);
    gen::add(cfg, K::MySQL, S::NonSensitive, 10, seed);
    gen::add(cfg, K::MySQL, S::Compromised, 10, seed);
    gen::add(cfg, K::PostgreSQL, S::NonSensitive, 1, seed);
    gen::add(cfg, K::PostgreSQL, S::Compromised, 1, seed);

    // Rows: connect, failed to gather, empty, system/non-sensitive, sensitive, compromised.
    const std::map<ServiceKind, std::vector<std::string>> expected = {
        {K::MongoDB, {"+", "-", "-", "+", "+", "+"}},
        {K::Redis, {"+", "+/-", "+", "-", "+", "-"}},
        {K::CouchDB, {"-", "-", "-", "-", "-", "-"}},
        {K::Memcached, {"+", "-", "+", "+", "+", "+"}},
        {K::Elasticsearch, {"+", "+/-", "+", "+", "+", "+"}},
        {K::Cassandra, {"+", "-", "+", "+", "-", "-"}},
        {K::MySQL, {"+", "+/-", "-", "+", "-", "+"}},
        {K::PostgreSQL, {"+", "-", "-", "+", "-", "+"}},
    };

    auto fleet = spawn_fleet(cfg);
    gen::TempDir dir("matrix");
    auto out = scan_fleet(fleet, dir.path(), true, "16");
    auto matrix = render_capability_matrix(parse_report_json(slurp(std::filesystem::path(out) / "report.json")));
    std::size_t cells = 0;
    std::size_t right = 0;
    std::string diffs;
    for (const auto &[service, column] : expected) {
        for (std::size_t row = 0; row < column.size(); ++row) {
            ++cells;
            std::string got = matrix.cell(row, service);
            if (got == column[row]) {
                ++right;
            } else {
                diffs += " " + std::string(service_name(service)) + "[" + std::string(kMatrixRows[row]) + "]=" + got;
            }
        }
    }
    return {right == cells, std::to_string(right) + "/" + std::to_string(cells) + " cells" + diffs};
}

Outcome non_intrusive(const FleetHandle &c1_fleet)
{
    auto with_creds = audit_log(command_log(c1_fleet), true);

    auto fleet = spawn_fleet(gen::every_pair());
    gen::TempDir dir("default");
    scan_fleet(fleet, dir.path(), false);
    auto log = command_log(fleet);
    auto default_mode = audit_log(log, false);
    std::size_t mysql_logins = 0;
    for (const auto &v : default_mode) {
        mysql_logins += v.entry.service == ServiceKind::MySQL ? 1 : 0;
    }
    std::ostringstream detail;
    detail << command_log(c1_fleet).size() << " commands with credentials, " << with_creds.size()
           << " violations; " << log.size() << " commands in default mode, " << default_mode.size()
           << " violations, " << mysql_logins << " MySQL login attempts";
    for (const auto &v : with_creds) {
        detail << "; " << v.reason << ": " << v.entry.parsed_command;
    }
    for (const auto &v : default_mode) {
        detail << "; " << v.reason << ": " << v.entry.parsed_command;
    }
    return {with_creds.empty() && default_mode.empty(), detail.str()};
}

// Round trips and fuzzing per codec, then misbehaving emulators against the ceiling.
Outcome codec_properties()
{
    constexpr int kRounds = 1000;
    std::map<std::string, std::pair<int, int>> tally; // codec -> (round-trip failures, fuzz crashes)

    auto round_trip = [&](const std::string &codec, std::uint64_t seed, const std::function<bool(gen::Rng &)> &one) {
        gen::Rng rng(seed);
        for (int i = 0; i < kRounds; ++i) {
            bool ok = false;
            try {
                ok = one(rng);
            } catch (const std::exception &) {
            }
            tally[codec].first += ok ? 0 : 1;
        }
    };
    auto fuzz = [&](const std::string &codec, std::uint64_t seed, const std::function<void(ByteView)> &decode) {
        gen::Rng rng(seed);
        for (int i = 0; i < kRounds; ++i) {
            Bytes input = rng.bytes(256);
            try {
                decode(input);
            } catch (const DecodeError &) {
            } catch (...) {
                ++tally[codec].second;
            }
        }
    };

    round_trip("bson", 1, [](gen::Rng &rng) {
        auto doc = gen::bson_document(rng);
        auto wire = bson::encode(doc);
        auto d = bson::decode(wire);
        return d.value == doc && d.consumed == wire.size();
    });
    round_trip("cql", 2, [](gen::Rng &rng) {
        auto f = gen::cql_frame(rng);
        auto wire = cql::encode(f);
        auto d = cql::decode(wire);
        return d.value == f && d.consumed == wire.size();
    });
    round_trip("resp", 3, [](gen::Rng &rng) {
        auto v = gen::resp_value(rng);
        auto wire = resp::encode(v);
        auto d = resp::decode(as_bytes(wire));
        return d.value == v && d.consumed == wire.size();
    });
    round_trip("mysql", 4, [](gen::Rng &rng) {
        auto h = gen::mysql_handshake(rng);
        mysql::Packet p{0, mysql::encode_handshake(h)};
        auto d = mysql::decode_packet(mysql::encode_packet(p));
        return d.value == p && mysql::decode_handshake(d.value.payload) == h;
    });
    round_trip("pg", 5, [](gen::Rng &rng) {
        auto m = gen::pg_message(rng);
        auto wire = pg::encode(m);
        auto d = pg::decode(wire);
        return d.value == m && d.consumed == wire.size();
    });
    round_trip("memcached", 6, [](gen::Rng &rng) {
        auto l = gen::memcached_line(rng);
        auto wire = memcached::encode_line(l);
        auto d = memcached::decode_line(as_bytes(wire));
        return d.value == l && d.consumed == wire.size();
    });

    fuzz("bson", 11, [](ByteView b) { bson::decode(b); });
    fuzz("cql", 12, [](ByteView b) { cql::decode(b); });
    fuzz("resp", 13, [](ByteView b) { resp::decode(b); });
    fuzz("mysql", 14, [](ByteView b) { mysql::decode_handshake(b); });
    fuzz("pg", 15, [](ByteView b) { pg::decode(b); });
    fuzz("memcached", 16, [](ByteView b) { memcached::decode_line(b); });

    FleetConfig cfg;
    for (ServiceKind s : kAllServices) {
        for (const char *b : {"garbage", "tarpit", "close_mid_handshake"}) {
            cfg.instances.push_back(gen::misbehaving(s, Scenario::Sensitive, b));
        }
    }
    auto fleet = spawn_fleet(cfg);
    auto config = gen::fast_config(true, std::chrono::milliseconds(250));
    config.parallelism = 24;
    std::vector<TargetRecord> targets;
    for (const auto &t : ground_truth(fleet)) {
        targets.push_back(t.target);
    }
    std::size_t over = 0;
    for (const auto &r : run_scan(targets, config)) {
        if (r.timing.duration > timeout_ceiling(r.target.service, config.budget) + std::chrono::milliseconds(750)) {
            ++over;
        }
    }

    bool ok = over == 0;
    std::ostringstream detail;
    for (const auto &[codec, counts] : tally) {
        ok = ok && counts.first == 0 && counts.second == 0;
        detail << codec << " " << counts.first << "/" << counts.second << " ";
    }
    detail << "(round-trip failures/fuzz crashes of " << kRounds << " each); " << targets.size()
           << " misbehaving emulators, " << over << " over the timeout ceiling";
    return {ok, detail.str()};
}

Outcome deterministic(const FleetHandle &fleet, const std::filesystem::path &dir)
{
    auto report = [&] { return slurp(dir / "run" / "report.json"); };
    scan_fleet(fleet, dir, true, "1");
    std::string serial = report();
    scan_fleet(fleet, dir, true, "8");
    std::string wide = report();

    auto targets = (dir / "targets.jsonl").string();
    for (const char *step : {"gather", "check", "parse", "report"}) {
        int rc = exposcan({"--out", (dir / "run").string(), "--targets", targets, "--try-default-credentials", step});
        if (rc != 0) {
            return {false, std::string(step) + " exited " + std::to_string(rc)};
        }
    }
    std::string stepped = report();
    bool ok = !serial.empty() && serial == wide && serial == stepped;
    return {ok, std::string("parallelism 1 vs 8 ") + (serial == wide ? "identical" : "differ") +
            ", four steps vs scan " + (serial == stepped ? "identical" : "differ") + " (" +
            std::to_string(serial.size()) + " bytes)"};
}

Outcome classifier_properties()
{
    constexpr int kCases = 10000;
    gen::Rng rng(8);
    std::array<std::size_t, 6> seen{};
    for (int i = 0; i < kCases; ++i) {
        auto c = gen::classifier_case(rng);
        if (auto problem = gen::check_classifier_case(c, rng)) {
            return {false, "case " + std::to_string(i) + ": " + *problem};
        }
        ++seen[static_cast<std::size_t>(ordinal(classify(c.status, c.harvest, detect_sensitive(c.harvest),
            detect_compromise(c.harvest)).category))];
    }
    std::ostringstream detail;
    detail << kCases << " cases, 0 counterexamples; per category";
    for (auto n : seen) {
        detail << " " << n;
    }
    return {true, detail.str()};
}

} // namespace

int main()
{
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;

    auto c1_fleet = std::make_shared<FleetHandle>(spawn_fleet(gen::every_pair()));
    auto c1_dir = std::make_shared<gen::TempDir>("c1");

    criteria.emplace_back("C1 closed-loop classification", [&] { return closed_loop(*c1_fleet, c1_dir->path()); });
    criteria.emplace_back("C2 Redis ratio column", [] {
        return ratio_column(ServiceKind::Redis, {{Scenario::Closed, 110}, {Scenario::Sensitive, 10}, {Scenario::Auth, 2}},
            "9.8", {{"sensitive", ExposureCategory::SensitiveData, "83"},
                       {"failed-to-gather", ExposureCategory::ConnectedNoData, "17"}});
    });
    criteria.emplace_back("C3 MongoDB ratio column", [] {
        return ratio_column(ServiceKind::MongoDB,
            {{Scenario::Closed, 163}, {Scenario::Compromised, 10}, {Scenario::Sensitive, 1},
                {Scenario::NonSensitive, 3}},
            "7.9", {{"compromised", ExposureCategory::Compromised, "71"},
                       {"sensitive", ExposureCategory::SensitiveData, "7.1"}});
    });
    criteria.emplace_back("C4 capability matrix", capability_matrix);
    criteria.emplace_back("C5 non-intrusiveness", [&] { return non_intrusive(*c1_fleet); });
    criteria.emplace_back("C6 codec properties", codec_properties);
    criteria.emplace_back("C7 determinism and separability", [&] {
        gen::TempDir dir("c7");
        return deterministic(*c1_fleet, dir.path());
    });
    criteria.emplace_back("C8 classifier properties", classifier_properties);

    int failed = 0;
    for (const auto &[name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
