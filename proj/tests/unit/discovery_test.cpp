#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "../support/generators.hpp"
#include "../support/tempdir.hpp"
#include "exposcan/discovery.hpp"
#include "exposcan/errors.hpp"

using namespace exposcan;

namespace {

const std::filesystem::path kFixtures = EXPOSCAN_FIXTURES;

TargetRecord rec(const std::string &addr, std::uint16_t port, ServiceKind s, const std::string &cc = "LV",
    int t = 0)
{
    TargetRecord r;
    r.address = addr;
    r.port = port;
    r.service = s;
    r.country = cc;
    r.discovered_at = UtcTime(std::chrono::seconds(1790000000 + t));
    return r;
}

UtcTime fixed_clock() { return UtcTime(std::chrono::seconds(1791000000)); }

std::string slurp(const std::filesystem::path &p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::filesystem::path &p)
{
    std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST(Dedupe, MatchesBruteForce)
{
    gen::Rng rng(11);
    const std::vector<std::string> addrs = {"10.0.0.1", "10.0.0.2", "10.0.0.3"};
    const std::vector<std::uint16_t> ports = {6379, 27017};
    const std::vector<ServiceKind> services = {ServiceKind::Redis, ServiceKind::MongoDB};
    for (int round = 0; round < 300; ++round) {
        std::vector<TargetRecord> in;
        std::size_t n = rng.below(30);
        for (std::size_t i = 0; i < n; ++i) {
            in.push_back(rec(rng.pick(addrs), rng.pick(ports), rng.pick(services), rng.coin() ? "LV" : "EE",
                static_cast<int>(i)));
        }
        std::vector<TargetRecord> expected;
        for (std::size_t i = 0; i < in.size(); ++i) {
            bool earlier = false;
            for (std::size_t j = 0; j < i; ++j) {
                earlier = earlier || identity(in[j]) == identity(in[i]);
            }
            if (!earlier) {
                expected.push_back(in[i]);
            }
        }
        EXPECT_EQ(dedupe_targets(in), expected);
        EXPECT_EQ(dedupe_targets(expected), expected);
    }
}

TEST(Persist, LayoutAndRoundTrip)
{
    gen::TempDir dir("persist");
    std::vector<TargetRecord> in = {
        rec("10.0.0.2", 6379, ServiceKind::Redis, "LV", 1),
        rec("10.0.0.9", 3306, ServiceKind::MySQL, "EE", 2),
        rec("10.0.0.1", 6379, ServiceKind::Redis, "LV", 3),
        rec("10.0.0.2", 6379, ServiceKind::Redis, "LV", 4),
    };
    auto manifest = persist_targets(in, dir.path());
    ASSERT_EQ(manifest.size(), 2u);
    EXPECT_EQ(manifest[0], (ManifestEntry{"EE/mysql/targets.jsonl", 1}));
    EXPECT_EQ(manifest[1], (ManifestEntry{"LV/redis/targets.jsonl", 2}));
    EXPECT_EQ(line_count(dir / "LV/redis/targets.jsonl"), 2u);
    EXPECT_EQ(line_count(dir / "EE/mysql/targets.jsonl"), 1u);

    auto loaded = load_targets(dir.path());
    ASSERT_EQ(loaded.size(), 3u);
    std::vector<TargetRecord> expected = {in[1], in[2], in[0]};
    EXPECT_EQ(loaded, expected);

    std::string before = slurp(dir / "LV/redis/targets.jsonl");
    persist_targets(in, dir.path());
    EXPECT_EQ(slurp(dir / "LV/redis/targets.jsonl"), before);

    EXPECT_EQ(load_targets(dir.path(), {ServiceKind::MySQL, std::nullopt}).size(), 1u);
    EXPECT_EQ(load_targets(dir.path(), {std::nullopt, std::string("LV")}).size(), 2u);
}

TEST(Persist, FirstLineHasFixedKeyOrder)
{
    gen::TempDir dir("order");
    persist_targets({rec("10.0.0.1", 6379, ServiceKind::Redis)}, dir.path());
    std::string line = slurp(dir / "LV/redis/targets.jsonl");
    EXPECT_EQ(line,
        R"({"address":"10.0.0.1","port":6379,"service":"redis","country":"LV","source":"file",)"
        R"("discovered_at":"2026-09-21T14:13:20Z"})"
        "\n");
}

TEST(Persist, CorruptLineIsNamed)
{
    gen::TempDir dir("corrupt");
    persist_targets({rec("10.0.0.1", 6379, ServiceKind::Redis), rec("10.0.0.2", 6379, ServiceKind::Redis)},
        dir.path());
    auto file = dir / "LV/redis/targets.jsonl";
    std::string content = slurp(file);
    auto nl = content.find('\n');
    content = content.substr(0, nl + 1) + "{\"address\": \n";
    std::ofstream(file) << content;
    try {
        load_targets(dir.path());
        FAIL() << "expected ParseError";
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
}

TEST(Persist, RejectsInvalidRecords)
{
    gen::TempDir dir("invalid");
    auto bad = rec("10.0.0.1", 0, ServiceKind::Redis);
    EXPECT_THROW(persist_targets({bad}, dir.path()), PreconditionError);
    EXPECT_THROW(load_targets(dir / "missing"), IoError);
}

TEST(FileSource, FiltersByServiceAndCountry)
{
    SourceQuery q;
    q.service = ServiceKind::Redis;
    auto redis = fetch_from_file(kFixtures / "targets.jsonl", q);
    ASSERT_EQ(redis.size(), 2u);
    EXPECT_EQ(redis[0].address, "192.0.2.10");
    EXPECT_EQ(redis[0].source, TargetSource::File);

    q.country = "EE";
    EXPECT_TRUE(fetch_from_file(kFixtures / "targets.jsonl", q).empty());
    q.service = ServiceKind::MySQL;
    EXPECT_EQ(fetch_from_file(kFixtures / "targets.jsonl", q).size(), 1u);

    SourceQuery capped;
    capped.service = ServiceKind::Redis;
    capped.max_results = 1;
    EXPECT_EQ(fetch_from_file(kFixtures / "targets.jsonl", capped).size(), 1u);
    capped.max_results = 0;
    EXPECT_THROW(fetch_from_file(kFixtures / "targets.jsonl", capped), PreconditionError);
    EXPECT_THROW(fetch_from_file(kFixtures / "nope.jsonl", q), IoError);
}

TEST(Shodan, RecordedResponse)
{
    auto transport = FixtureTransport::from_file(kFixtures / "shodan_responses.json");
    RemoteSourceConfig cfg;
    cfg.transport = transport.get();
    cfg.min_interval = std::chrono::milliseconds(0);
    cfg.clock = fixed_clock;
    SourceQuery q;
    q.service = ServiceKind::MongoDB;
    q.api_key = "k3y";
    auto hits = ShodanSource(cfg).fetch(q);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].address, "203.0.113.5");
    EXPECT_EQ(hits[0].port, 27017);
    EXPECT_EQ(hits[0].country, "EE");
    EXPECT_EQ(hits[1].country, "??");
    EXPECT_EQ(hits[0].source, TargetSource::Shodan);
    EXPECT_EQ(hits[0].discovered_at, fixed_clock());
    auto reqs = transport->requests();
    ASSERT_EQ(reqs.size(), 1u);
    EXPECT_NE(reqs[0].find("api.shodan.io/shodan/host/search?key=k3y&query=product%3AMongoDB"), std::string::npos);

    q.api_key.reset();
    EXPECT_THROW(ShodanSource(cfg).fetch(q), PreconditionError);
}

TEST(BinaryEdge, RecordedResponse)
{
    auto transport = FixtureTransport::from_file(kFixtures / "binaryedge_responses.json");
    RemoteSourceConfig cfg;
    cfg.transport = transport.get();
    cfg.min_interval = std::chrono::milliseconds(0);
    cfg.clock = fixed_clock;
    SourceQuery q;
    q.service = ServiceKind::Elasticsearch;
    q.api_key = "k";
    q.country = "LV";
    auto hits = fetch_targets(TargetSource::BinaryEdge, q, {}, cfg);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].country, "LV");
    EXPECT_EQ(hits[1].country, "FI");
    EXPECT_EQ(hits[1].port, 9200);
    EXPECT_NE(transport->requests()[0].find("country%3ALV"), std::string::npos);
}

TEST(Remote, HttpFailuresMapToErrors)
{
    auto run = [](int status, const std::string &body) {
        FixtureTransport t(nlohmann::json{{"responses", {{{"match", "/"}, {"status", status}, {"body", body}}}}});
        RemoteSourceConfig cfg;
        cfg.transport = &t;
        cfg.min_interval = std::chrono::milliseconds(0);
        SourceQuery q;
        q.api_key = "k";
        return ShodanSource(cfg).fetch(q);
    };
    EXPECT_THROW(run(401, "{}"), AuthError);
    EXPECT_THROW(run(429, "{}"), QuotaError);
    EXPECT_THROW(run(500, "{}"), IoError);
    EXPECT_THROW(run(200, "not json"), ParseError);
    EXPECT_THROW(run(200, R"({"error": "Insufficient query credits"})"), QuotaError);
    EXPECT_THROW(run(200, R"({"matches": [{"ip_str": "1.2.3.4", "port": 70000}], "total": 1})"), ParseError);
}

TEST(Remote, PaginatesUntilTotal)
{
    nlohmann::json page1 = {{"total", 150}, {"matches", nlohmann::json::array()}};
    nlohmann::json page2 = {{"total", 150}, {"matches", nlohmann::json::array()}};
    for (int i = 0; i < 100; ++i) {
        page1["matches"].push_back({{"ip_str", "10.1.0." + std::to_string(i)}, {"port", 6379}});
    }
    for (int i = 0; i < 50; ++i) {
        page2["matches"].push_back({{"ip_str", "10.2.0." + std::to_string(i)}, {"port", 6379}});
    }
    FixtureTransport t(nlohmann::json{{"responses",
        {{{"match", "page=1"}, {"body", page1}}, {{"match", "page=2"}, {"body", page2}}}}});
    RemoteSourceConfig cfg;
    cfg.transport = &t;
    cfg.min_interval = std::chrono::milliseconds(0);
    SourceQuery q;
    q.service = ServiceKind::Redis;
    q.api_key = "k";
    q.max_results = 1000;
    EXPECT_EQ(ShodanSource(cfg).fetch(q).size(), 150u);
    EXPECT_EQ(t.requests().size(), 2u);
    q.max_results = 30;
    EXPECT_EQ(ShodanSource(cfg).fetch(q).size(), 30u);
}

TEST(RateLimiter, SpacesRequests)
{
    RateLimiter limiter(std::chrono::milliseconds(40));
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 3; ++i) {
        limiter.acquire();
    }
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(80));
}
