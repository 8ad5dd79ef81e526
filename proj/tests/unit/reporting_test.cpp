#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "exposcan/errors.hpp"
#include "exposcan/reporting.hpp"

using namespace exposcan;

namespace {

// counts[c] results of category c for one service.
std::vector<ProbeResult> synth(ServiceKind service, const std::array<std::size_t, 6> &counts, int base = 0)
{
    std::vector<ProbeResult> out;
    int n = base;
    for (std::size_t c = 0; c < 6; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            ProbeResult r;
            r.target.address = "10.0." + std::to_string(n / 250) + "." + std::to_string(n % 250 + 1);
            r.target.port = default_port(service);
            r.target.service = service;
            r.target.discovered_at = UtcTime(std::chrono::seconds(1700000000 + n));
            r.category = static_cast<ExposureCategory>(c);
            r.status = c == 0 ? ConnStatus::Refused : ConnStatus::ProtocolOk;
            ++n;
            out.push_back(std::move(r));
        }
    }
    return out;
}

const ServiceStats &stats_for(const ExposureReport &r, ServiceKind s)
{
    for (const auto &st : r.per_service) {
        if (st.service == s) {
            return st;
        }
    }
    throw std::runtime_error("service missing from report");
}

std::size_t cat(ExposureCategory c) { return static_cast<std::size_t>(c); }

} // namespace

TEST(Aggregate, RedisColumnArithmetic)
{
    // 110 closed, 2 refused credentials, 10 with sensitive data
    auto report = aggregate(synth(ServiceKind::Redis, {110, 2, 0, 0, 10, 0}));
    const auto &s = stats_for(report, ServiceKind::Redis);
    EXPECT_EQ(s.total_found, 122u);
    EXPECT_EQ(s.connected, 12u);
    EXPECT_DOUBLE_EQ(s.connect_ratio, 12.0 / 122.0);
    EXPECT_DOUBLE_EQ(s.category_ratios[cat(ExposureCategory::SensitiveData)], 10.0 / 12.0);
    EXPECT_DOUBLE_EQ(s.category_ratios[cat(ExposureCategory::ConnectedNoData)], 2.0 / 12.0);
    EXPECT_EQ(format_percent(s.connect_ratio), "9.8");
    EXPECT_EQ(format_percent(s.category_ratios[cat(ExposureCategory::SensitiveData)]), "83.3");
    EXPECT_EQ(format_percent(s.category_ratios[cat(ExposureCategory::ConnectedNoData)]), "16.7");
}

TEST(Aggregate, MongoColumnArithmetic)
{
    auto report = aggregate(synth(ServiceKind::MongoDB, {163, 0, 0, 3, 1, 10}));
    const auto &s = stats_for(report, ServiceKind::MongoDB);
    EXPECT_EQ(s.total_found, 177u);
    EXPECT_EQ(s.connected, 14u);
    EXPECT_EQ(format_percent(s.connect_ratio), "7.9");
    EXPECT_EQ(format_percent(s.category_ratios[cat(ExposureCategory::Compromised)]), "71.4");
    EXPECT_EQ(format_percent(s.category_ratios[cat(ExposureCategory::SensitiveData)]), "7.1");
    EXPECT_DOUBLE_EQ(report.overall.compromised_ratio_of_open, 10.0 / 14.0);
}

TEST(Aggregate, EmptyInput)
{
    auto report = aggregate({});
    EXPECT_TRUE(report.per_service.empty());
    EXPECT_FALSE(report.generated_at);
    EXPECT_EQ(report.overall.total_found, 0u);
    EXPECT_EQ(report.overall.open_ratio, 0.0);
    for (auto f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text}) {
        EXPECT_FALSE(render_report(report, f).empty());
    }
    EXPECT_EQ(parse_report_json(render_report(report, ReportFormat::Json)), report);
}

TEST(Aggregate, ConservationBoundsAndPermutation)
{
    std::mt19937_64 rng(3);
    for (int round = 0; round < 50; ++round) {
        std::vector<ProbeResult> all;
        int base = 0;
        for (ServiceKind s : kAllServices) {
            std::array<std::size_t, 6> counts{};
            for (auto &c : counts) {
                c = rng() % 5;
            }
            auto part = synth(s, counts, base);
            base += 100;
            all.insert(all.end(), part.begin(), part.end());
        }
        auto report = aggregate(all);
        std::size_t total = 0;
        std::size_t open = 0;
        for (const auto &st : report.per_service) {
            std::size_t sum = 0;
            for (std::size_t c = 0; c < 6; ++c) {
                sum += st.per_category[c];
                EXPECT_GE(st.category_ratios[c], 0.0);
                EXPECT_LE(st.category_ratios[c], 1.0);
            }
            EXPECT_EQ(sum, st.total_found);
            EXPECT_EQ(st.connected, st.total_found - st.per_category[0]);
            total += sum;
            open += st.connected;
        }
        EXPECT_EQ(total, all.size());
        EXPECT_EQ(report.overall.open_count, open);
        std::shuffle(all.begin(), all.end(), rng);
        EXPECT_EQ(aggregate(all), report);
    }
}

TEST(Aggregate, GeneratedAtIsLatestDiscovery)
{
    auto results = synth(ServiceKind::Redis, {1, 0, 0, 0, 1, 0});
    auto report = aggregate(results, "runs/a");
    EXPECT_EQ(report.generated_at, results[1].target.discovered_at);
    EXPECT_EQ(report.scan_root, "runs/a");
}

TEST(Render, JsonRoundTrip)
{
    auto all = synth(ServiceKind::Redis, {5, 1, 2, 3, 4, 0});
    auto more = synth(ServiceKind::PostgreSQL, {0, 0, 1, 1, 0, 2}, 50);
    all.insert(all.end(), more.begin(), more.end());
    auto report = aggregate(all, "root");
    std::string json = render_report(report, ReportFormat::Json);
    EXPECT_EQ(parse_report_json(json), report);
    EXPECT_EQ(render_report(parse_report_json(json), ReportFormat::Json), json);
    EXPECT_THROW(parse_report_json("{"), ParseError);
}

TEST(Render, CsvRowsAreServicesTimesCategories)
{
    auto all = synth(ServiceKind::Redis, {1, 1, 1, 1, 1, 1});
    auto more = synth(ServiceKind::MySQL, {1, 0, 0, 2, 0, 0}, 50);
    auto third = synth(ServiceKind::Cassandra, {0, 0, 3, 0, 0, 0}, 100);
    all.insert(all.end(), more.begin(), more.end());
    all.insert(all.end(), third.begin(), third.end());
    std::istringstream csv(render_report(aggregate(all), ReportFormat::Csv));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "service,category,count,ratio");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 3u * 6u);
}

TEST(Render, TextHasOneRowPerService)
{
    auto all = synth(ServiceKind::Redis, {1, 0, 0, 0, 1, 0});
    auto more = synth(ServiceKind::Elasticsearch, {0, 0, 1, 0, 0, 0}, 50);
    all.insert(all.end(), more.begin(), more.end());
    std::string text = render_report(aggregate(all), ReportFormat::Text);
    EXPECT_NE(text.find("Redis"), std::string::npos);
    EXPECT_NE(text.find("Elasticsearch"), std::string::npos);
    EXPECT_EQ(text.find("MongoDB"), std::string::npos);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Render, UnknownFormat)
{
    EXPECT_THROW(parse_format("xml"), UnsupportedFormat);
    EXPECT_EQ(parse_format("csv"), ReportFormat::Csv);
}

TEST(Matrix, Cells)
{
    std::vector<ProbeResult> all;
    // 1 of 21 connected in no-data: under the partial threshold
    auto es = synth(ServiceKind::Elasticsearch, {0, 1, 5, 5, 5, 5});
    // every connected CouchDB refused credentials
    auto couch = synth(ServiceKind::CouchDB, {2, 3, 0, 0, 0, 0}, 100);
    for (auto &r : couch) {
        if (r.category == ExposureCategory::ConnectedNoData) {
            r.status = ConnStatus::AuthRequired;
            r.harvest.auth_blocked = true;
        }
    }
    auto cass = synth(ServiceKind::Cassandra, {4, 0, 0, 1, 0, 0}, 200);
    all.insert(all.end(), es.begin(), es.end());
    all.insert(all.end(), couch.begin(), couch.end());
    all.insert(all.end(), cass.begin(), cass.end());
    auto m = render_capability_matrix(aggregate(all));

    ASSERT_EQ(m.services.size(), 3u);
    std::vector<std::string> es_col, couch_col, cass_col;
    for (std::size_t row = 0; row < 6; ++row) {
        es_col.push_back(m.cell(row, ServiceKind::Elasticsearch));
        couch_col.push_back(m.cell(row, ServiceKind::CouchDB));
        cass_col.push_back(m.cell(row, ServiceKind::Cassandra));
    }
    EXPECT_EQ(es_col, (std::vector<std::string>{"+", "+/-", "+", "+", "+", "+"}));
    EXPECT_EQ(couch_col, (std::vector<std::string>(6, "-")));
    EXPECT_EQ(cass_col, (std::vector<std::string>{"+", "-", "-", "+", "-", "-"}));
    std::string text = render_matrix_text(m);
    EXPECT_NE(text.find("Managed to connect"), std::string::npos);
    EXPECT_NE(text.find("+/-"), std::string::npos);
}

TEST(Matrix, PartialThresholdBoundary)
{
    // exactly 1 of 20 is 5%, which is not below the threshold
    auto at = synth(ServiceKind::Redis, {0, 0, 1, 19, 0, 0});
    EXPECT_EQ(render_capability_matrix(aggregate(at)).cell(2, ServiceKind::Redis), "+");
    auto below = synth(ServiceKind::Redis, {0, 0, 1, 20, 0, 0});
    EXPECT_EQ(render_capability_matrix(aggregate(below)).cell(2, ServiceKind::Redis), "+/-");
}
