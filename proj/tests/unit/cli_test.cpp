#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "../support/fleets.hpp"
#include "../support/tempdir.hpp"
#include "exposcan/cli.hpp"

using namespace exposcan;

namespace {

const std::filesystem::path kFixtures = EXPOSCAN_FIXTURES;

struct Run {
    int rc = 0;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args, std::map<std::string, std::string> vars = {})
{
    CliEnvironment env;
    env.getenv = [vars](std::string_view name) -> std::optional<std::string> {
        auto it = vars.find(std::string(name));
        if (it == vars.end()) {
            return std::nullopt;
        }
        return it->second;
    };
    env.clock = [] { return UtcTime(std::chrono::seconds(1792000000)); };
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.rc = run_cli(args, out, err, env);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const std::filesystem::path &p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::filesystem::path &p, const std::string &text) { std::ofstream(p) << text; }

std::filesystem::path write_targets(const fleet::FleetHandle &fleet, const std::filesystem::path &file)
{
    std::ofstream out(file);
    for (const auto &t : fleet::ground_truth(fleet)) {
        out << to_jsonl_line(t.target) << "\n";
    }
    return file;
}

std::size_t lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST(Cli, GatherFromFile)
{
    gen::TempDir dir("gather");
    auto r = cli({"--out", dir.path().string(), "--targets", (kFixtures / "targets.jsonl").string(), "gather"});
    ASSERT_EQ(r.rc, 0) << r.err;
    EXPECT_NE(r.out.find("redis\tLV\t2"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("mysql\tEE\t1"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("total\t3 unique of 3 found"), std::string::npos) << r.out;
    EXPECT_TRUE(std::filesystem::exists(dir / "LV/redis/targets.jsonl"));
    auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["steps_completed"], nlohmann::json::array({"gather"}));
    EXPECT_EQ(manifest["config_snapshot"]["sources"], nlohmann::json::array({"file"}));

    auto again = cli({"--out", dir.path().string(), "--targets", (kFixtures / "targets.jsonl").string(), "gather"});
    EXPECT_EQ(again.out, r.out);
}

TEST(Cli, MissingApiKeyNamesVariable)
{
    gen::TempDir dir("nokey");
    auto r = cli({"--out", dir.path().string(), "--source", "shodan", "--fixture",
        (kFixtures / "shodan_responses.json").string(), "--service", "mongodb", "gather"});
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.err.find("SHODAN_API_KEY"), std::string::npos) << r.err;

    auto ok = cli({"--out", dir.path().string(), "--source", "shodan", "--fixture",
                      (kFixtures / "shodan_responses.json").string(), "--service", "mongodb", "gather"},
        {{"SHODAN_API_KEY", "k"}});
    EXPECT_EQ(ok.rc, 0) << ok.err;
    EXPECT_NE(ok.out.find("mongodb\tEE\t1"), std::string::npos) << ok.out;
}

TEST(Cli, RemoteWithoutTransportChoiceFails)
{
    gen::TempDir dir("notransport");
    auto r = cli({"--out", dir.path().string(), "--source", "shodan", "--service", "redis", "gather"},
        {{"SHODAN_API_KEY", "k"}});
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.err.find("--fixture"), std::string::npos) << r.err;
}

TEST(Cli, PartialSourceFailureExitsTwo)
{
    gen::TempDir dir("partial");
    auto fixture = dir / "responses.json";
    write(fixture, R"({"responses": [
        {"match": "/shodan/", "status": 200,
         "body": {"total": 1, "matches": [{"ip_str": "203.0.113.5", "port": 6379,
                                          "location": {"country_code": "EE"}}]}},
        {"match": "/v2/query", "status": 429, "body": {"error": "rate limited"}}]})");
    auto out = dir / "run";
    auto r = cli({"--out", out.string(), "--source", "shodan,binaryedge", "--fixture", fixture.string(),
                     "--service", "redis", "gather"},
        {{"SHODAN_API_KEY", "a"}, {"BINARYEDGE_API_KEY", "b"}});
    EXPECT_EQ(r.rc, 2) << r.err;
    EXPECT_NE(r.err.find("binaryedge"), std::string::npos) << r.err;
    EXPECT_TRUE(std::filesystem::exists(out / "EE/redis/targets.jsonl"));
}

TEST(Cli, StepsNeedTheirPredecessors)
{
    gen::TempDir dir("order");
    auto check = cli({"--out", dir.path().string(), "check"});
    EXPECT_EQ(check.rc, 1);
    EXPECT_NE(check.err.find("no targets"), std::string::npos) << check.err;
    auto parse = cli({"--out", dir.path().string(), "parse"});
    EXPECT_EQ(parse.rc, 1);
    EXPECT_NE(parse.err.find("check"), std::string::npos) << parse.err;
    auto report = cli({"--out", dir.path().string(), "report"});
    EXPECT_EQ(report.rc, 1);
    EXPECT_EQ(cli({"check"}).rc, 1);
    EXPECT_EQ(cli({"--out", dir.path().string(), "report", "--format", "xml"}).rc, 1);
}

TEST(Cli, NonLoopbackNeedsAuthorization)
{
    gen::TempDir dir("auth");
    ASSERT_EQ(cli({"--out", dir.path().string(), "--targets", (kFixtures / "targets.jsonl").string(), "gather"}).rc,
        0);
    auto r = cli({"--out", dir.path().string(), "check"});
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.err.find("--i-have-authorization"), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "LV/redis/status.jsonl"));
}

TEST(Cli, FourStepsAgainstFleet)
{
    auto fleet = fleet::spawn_fleet(gen::every_pair());
    gen::TempDir dir("steps");
    auto targets = write_targets(fleet, dir / "targets.jsonl");
    auto out = (dir / "run").string();
    std::vector<std::string> common = {"--out", out, "--targets", targets.string(), "--connect-timeout-ms", "1000",
        "--io-timeout-ms", "1000", "--try-default-credentials"};
    auto step = [&](std::vector<std::string> extra) {
        auto args = common;
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args);
    };
    auto g = step({"gather"});
    ASSERT_EQ(g.rc, 0) << g.err;
    auto c = step({"check"});
    ASSERT_EQ(c.rc, 0) << c.err;
    EXPECT_NE(c.out.find("refused\t8"), std::string::npos) << c.out;
    auto p = step({"parse"});
    ASSERT_EQ(p.rc, 0) << p.err;
    auto rep = step({"report", "--matrix"});
    ASSERT_EQ(rep.rc, 0) << rep.err;
    EXPECT_NE(rep.out.find("Managed to connect"), std::string::npos);

    auto csv = step({"report", "--format", "csv"});
    ASSERT_EQ(csv.rc, 0);
    EXPECT_EQ(lines(csv.out), 1u + 8u * 6u);
    EXPECT_EQ(csv.out, slurp(std::filesystem::path(out) / "report.csv"));

    auto only = step({"--service", "redis", "report", "--format", "csv"});
    ASSERT_EQ(only.rc, 0);
    EXPECT_EQ(lines(only.out), 1u + 6u);

    auto manifest = nlohmann::json::parse(slurp(std::filesystem::path(out) / "manifest.json"));
    EXPECT_EQ(manifest["steps_completed"], nlohmann::json::array({"gather", "check", "parse", "report"}));
}

TEST(Cli, ScanMatchesStepsAndParallelism)
{
    auto fleet = fleet::spawn_fleet(gen::every_pair());
    gen::TempDir dir("scan");
    auto targets = write_targets(fleet, dir / "targets.jsonl");
    auto out = (dir / "run").string();
    auto base = [&](const std::string &parallelism) {
        return std::vector<std::string>{"--out", out, "--targets", targets.string(), "--try-default-credentials",
            "--connect-timeout-ms", "1000", "--io-timeout-ms", "1000", "--parallelism", parallelism};
    };
    auto with = [](std::vector<std::string> v, const std::string &cmd) {
        v.push_back(cmd);
        return v;
    };
    ASSERT_EQ(cli(with(base("1"), "scan")).rc, 0);
    std::string serial = slurp(std::filesystem::path(out) / "report.json");
    ASSERT_EQ(cli(with(base("8"), "scan")).rc, 0);
    std::string wide = slurp(std::filesystem::path(out) / "report.json");
    EXPECT_EQ(serial, wide);

    for (const char *cmd : {"gather", "check", "parse", "report"}) {
        ASSERT_EQ(cli(with(base("4"), cmd)).rc, 0) << cmd;
    }
    EXPECT_EQ(slurp(std::filesystem::path(out) / "report.json"), serial);
}

TEST(Cli, PrintConfigLayersSources)
{
    gen::TempDir dir("config");
    auto cfg = dir / "cfg.json";
    write(cfg, R"({"parallelism": 3, "country": "lv", "max_results": 7})");
    auto r = cli({"--config", cfg.string(), "--out", (dir / "o").string(), "--parallelism", "5",
                     "--targets", (kFixtures / "targets.jsonl").string(), "--print-config", "gather"},
        {{"SHODAN_API_KEY", "secret-value"}});
    ASSERT_EQ(r.rc, 0) << r.err;
    auto brace = r.out.find('{');
    auto end = r.out.find("\n}\n");
    ASSERT_NE(end, std::string::npos);
    auto snap = nlohmann::json::parse(r.out.substr(brace, end + 2 - brace));
    EXPECT_EQ(snap["parallelism"], 5);
    EXPECT_EQ(snap["country"], "LV");
    EXPECT_EQ(snap["max_results"], 7);
    EXPECT_EQ(r.out.find("secret-value"), std::string::npos);
    EXPECT_NE(r.out.find("redis\tLV\t2"), std::string::npos);
    EXPECT_EQ(r.out.find("mysql"), std::string::npos);

    write(cfg, R"({"paralelism": 3})");
    auto bad = cli({"--config", cfg.string(), "--out", (dir / "o").string(), "gather"});
    EXPECT_EQ(bad.rc, 1);
    EXPECT_NE(bad.err.find("paralelism"), std::string::npos) << bad.err;
    EXPECT_EQ(cli({"--out", (dir / "o").string(), "--country", "Latvia", "gather"}).rc, 1);
    EXPECT_EQ(cli({"--out", (dir / "o").string(), "--service", "oracle", "gather"}).rc, 1);
}

TEST(Cli, FleetCommands)
{
    gen::TempDir dir("fleet");
    auto cfg = dir / "fleet.json";
    write(cfg, R"({"instances": [{"service": "redis", "scenario": "sensitive", "seed": 3, "country": "EE"}]})");
    auto state = (dir / "state").string();
    auto up = cli({"fleet", "up", "--config", cfg.string(), "--state-dir", state, "--duration-s", "0.2"});
    ASSERT_EQ(up.rc, 0) << up.err;
    EXPECT_NE(up.out.find("redis\tsensitive\t127.0.0.1:"), std::string::npos) << up.out;
    auto truth = cli({"fleet", "ground-truth", "--state-dir", state});
    ASSERT_EQ(truth.rc, 0) << truth.err;
    ASSERT_EQ(lines(truth.out), 1u);
    EXPECT_EQ(nlohmann::json::parse(truth.out)["expected_category"], "sensitive_data");
    auto log = cli({"fleet", "log", "--state-dir", state, "--audit"});
    EXPECT_EQ(log.rc, 0) << log.err;

    write(dir / "state/commands.jsonl",
        R"({"instance_id":0,"service":"redis","timestamp":"2026-10-16T12:00:00.000000Z","sequence":0,)"
        R"("raw_bytes":"","parsed_command":"FLUSHALL"})"
        "\n");
    auto audit = cli({"fleet", "log", "--state-dir", state, "--audit"});
    EXPECT_EQ(audit.rc, 1);
    EXPECT_NE(audit.err.find("violation: instance 0 redis"), std::string::npos) << audit.err;
    EXPECT_NE(audit.out.find("FLUSHALL"), std::string::npos) << audit.out;

    write(cfg, R"({"instances": [{"service": "oracle", "scenario": "empty"}]})");
    EXPECT_EQ(cli({"fleet", "up", "--config", cfg.string(), "--state-dir", state, "--duration-s", "0.1"}).rc, 1);
    EXPECT_EQ(cli({"fleet", "ground-truth"}).rc, 1);
}

TEST(Cli, RuleFilesReplaceDefaults)
{
    auto fleet = fleet::spawn_fleet({{gen::instance(ServiceKind::Redis, fleet::Scenario::Sensitive, 9)}});
    gen::TempDir dir("rules");
    auto targets = write_targets(fleet, dir / "targets.jsonl");
    write(dir / "sensitive.json", R"([{"id": "never", "kind": "email", "pattern": "zq{9}", "where": "sample"}])");
    write(dir / "cfg.json", "{\"sensitive_rules\": \"" + (dir / "sensitive.json").string() + "\"}");
    auto out = (dir / "run").string();
    auto r = cli({"--config", (dir / "cfg.json").string(), "--out", out, "--targets", targets.string(), "scan"});
    ASSERT_EQ(r.rc, 0) << r.err;
    auto results = load_results(out);
    ASSERT_EQ(results.size(), 1u);
    EXPECT_EQ(results[0].category, ExposureCategory::SystemOrNonSensitive);

    write(dir / "sensitive.json", "[{\"id\": \"x\"}]");
    auto bad = cli({"--config", (dir / "cfg.json").string(), "--out", out, "--targets", targets.string(), "scan"});
    EXPECT_EQ(bad.rc, 1);
}
