#include "exposcan/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>

#include "exposcan/errors.hpp"

namespace exposcan {

namespace {

double ratio(std::size_t num, std::size_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string pad(const std::string &s, std::size_t width, bool right)
{
    if (s.size() >= width) {
        return s;
    }
    std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

std::string table(const std::vector<std::vector<std::string>> &rows, std::size_t left_columns)
{
    std::vector<std::size_t> widths;
    for (const auto &row : rows) {
        widths.resize(std::max(widths.size(), row.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    std::string out;
    for (const auto &row : rows) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) {
                line += "  ";
            }
            line += pad(row[i], widths[i], i >= left_columns);
        }
        while (!line.empty() && line.back() == ' ') {
            line.pop_back();
        }
        out += line + "\n";
    }
    return out;
}

template <typename J> J category_map(const std::array<double, kCategoryCount> &v, std::size_t from)
{
    J j = J::object();
    for (std::size_t c = from; c < kCategoryCount; ++c) {
        j[std::string(category_name(static_cast<ExposureCategory>(c)))] = v[c];
    }
    return j;
}

std::string csv_field(const std::string &s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

std::string ratio_text(double r)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", r);
    return buf;
}

} // namespace

ExposureReport aggregate(const std::vector<ProbeResult> &results, const std::string &scan_root)
{
    ExposureReport report;
    report.scan_root = scan_root;
    std::map<ServiceKind, ServiceStats> stats;
    for (const auto &r : results) {
        auto &s = stats[r.target.service];
        s.service = r.target.service;
        ++s.total_found;
        ++s.per_category[static_cast<std::size_t>(r.category)];
        if (r.category == ExposureCategory::ConnectedNoData && r.harvest.auth_blocked) {
            ++s.access_denied;
        }
        if (!report.generated_at || r.target.discovered_at > *report.generated_at) {
            report.generated_at = r.target.discovered_at;
        }
    }
    CategoryCounts open_by_category{};
    for (ServiceKind kind : kAllServices) {
        auto it = stats.find(kind);
        if (it == stats.end()) {
            continue;
        }
        ServiceStats s = it->second;
        s.connected = s.total_found - s.per_category[0];
        s.connect_ratio = ratio(s.connected, s.total_found);
        s.category_ratios[0] = ratio(s.per_category[0], s.total_found);
        for (std::size_t c = 1; c < kCategoryCount; ++c) {
            s.category_ratios[c] = ratio(s.per_category[c], s.connected);
            open_by_category[c] += s.per_category[c];
        }
        report.overall.total_found += s.total_found;
        report.overall.open_count += s.connected;
        report.per_service.push_back(s);
    }
    auto &o = report.overall;
    o.open_ratio = ratio(o.open_count, o.total_found);
    o.compromised_ratio_of_open = ratio(open_by_category[5], o.open_count);
    for (std::size_t c = 1; c < kCategoryCount; ++c) {
        o.distribution[c] = ratio(open_by_category[c], o.open_count);
    }
    return report;
}

ReportFormat parse_format(std::string_view name)
{
    if (name == "json") {
        return ReportFormat::Json;
    }
    if (name == "csv") {
        return ReportFormat::Csv;
    }
    if (name == "text") {
        return ReportFormat::Text;
    }
    throw UnsupportedFormat("unsupported report format '" + std::string(name) + "' (json, csv, text)");
}

nlohmann::ordered_json to_json(const ExposureReport &report)
{
    using oj = nlohmann::ordered_json;
    oj j;
    j["generated_at"] = report.generated_at ? oj(format_iso8601(*report.generated_at)) : oj();
    j["scan_root"] = report.scan_root;
    j["per_service"] = oj::array();
    for (const auto &s : report.per_service) {
        oj e;
        e["service"] = service_name(s.service);
        e["total_found"] = s.total_found;
        e["connected"] = s.connected;
        e["access_denied"] = s.access_denied;
        e["per_category"] = oj::object();
        for (std::size_t c = 0; c < kCategoryCount; ++c) {
            e["per_category"][std::string(category_name(static_cast<ExposureCategory>(c)))] = s.per_category[c];
        }
        e["connect_ratio"] = s.connect_ratio;
        e["category_ratios"] = category_map<oj>(s.category_ratios, 0);
        j["per_service"].push_back(std::move(e));
    }
    oj o;
    o["total_found"] = report.overall.total_found;
    o["open_count"] = report.overall.open_count;
    o["open_ratio"] = report.overall.open_ratio;
    o["compromised_ratio_of_open"] = report.overall.compromised_ratio_of_open;
    o["distribution"] = category_map<oj>(report.overall.distribution, 1);
    j["overall"] = std::move(o);
    return j;
}

ExposureReport parse_report_json(std::string_view text)
{
    try {
        auto j = nlohmann::json::parse(text);
        ExposureReport r;
        if (!j.at("generated_at").is_null()) {
            auto t = parse_iso8601(j["generated_at"].get<std::string>());
            if (!t) {
                throw ParseError("bad generated_at");
            }
            r.generated_at = *t;
        }
        r.scan_root = j.at("scan_root").get<std::string>();
        for (const auto &e : j.at("per_service")) {
            ServiceStats s;
            auto kind = parse_service(e.at("service").get<std::string>());
            if (!kind) {
                throw ParseError("unknown service in report");
            }
            s.service = *kind;
            s.total_found = e.at("total_found").get<std::size_t>();
            s.connected = e.at("connected").get<std::size_t>();
            s.access_denied = e.at("access_denied").get<std::size_t>();
            s.connect_ratio = e.at("connect_ratio").get<double>();
            for (std::size_t c = 0; c < kCategoryCount; ++c) {
                std::string name(category_name(static_cast<ExposureCategory>(c)));
                s.per_category[c] = e.at("per_category").at(name).get<std::size_t>();
                s.category_ratios[c] = e.at("category_ratios").at(name).get<double>();
            }
            r.per_service.push_back(s);
        }
        const auto &o = j.at("overall");
        r.overall.total_found = o.at("total_found").get<std::size_t>();
        r.overall.open_count = o.at("open_count").get<std::size_t>();
        r.overall.open_ratio = o.at("open_ratio").get<double>();
        r.overall.compromised_ratio_of_open = o.at("compromised_ratio_of_open").get<double>();
        for (std::size_t c = 1; c < kCategoryCount; ++c) {
            r.overall.distribution[c] =
                o.at("distribution").at(std::string(category_name(static_cast<ExposureCategory>(c)))).get<double>();
        }
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("bad report: ") + e.what());
    }
}

std::string format_percent(double r)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", r * 100.0);
    return buf;
}

std::string render_report(const ExposureReport &report, ReportFormat format)
{
    switch (format) {
    case ReportFormat::Json: return to_json(report).dump(2) + "\n";
    case ReportFormat::Csv: {
        std::string out = "service,category,count,ratio\n";
        for (const auto &s : report.per_service) {
            for (std::size_t c = 0; c < kCategoryCount; ++c) {
                out += csv_field(std::string(service_name(s.service))) + ","
                    + std::string(category_name(static_cast<ExposureCategory>(c))) + ","
                    + std::to_string(s.per_category[c]) + "," + ratio_text(s.category_ratios[c]) + "\n";
            }
        }
        return out;
    }
    case ReportFormat::Text: {
        std::vector<std::vector<std::string>> rows = {{"service", "found", "connected", "connect%",
            "no-data%", "empty%", "system%", "sensitive%", "compromised%"}};
        for (const auto &s : report.per_service) {
            std::vector<std::string> row = {std::string(service_display_name(s.service)),
                std::to_string(s.total_found), std::to_string(s.connected), format_percent(s.connect_ratio)};
            for (std::size_t c = 1; c < kCategoryCount; ++c) {
                row.push_back(format_percent(s.category_ratios[c]));
            }
            rows.push_back(std::move(row));
        }
        const auto &o = report.overall;
        std::vector<std::string> total = {"all", std::to_string(o.total_found), std::to_string(o.open_count),
            format_percent(o.open_ratio)};
        for (std::size_t c = 1; c < kCategoryCount; ++c) {
            total.push_back(format_percent(o.distribution[c]));
        }
        rows.push_back(std::move(total));
        return table(rows, 1);
    }
    }
    throw UnsupportedFormat("unsupported report format");
}

const std::string &CapabilityMatrix::cell(std::size_t row, ServiceKind service) const
{
    auto it = std::find(services.begin(), services.end(), service);
    if (it == services.end()) {
        throw PreconditionError("service not in matrix: " + std::string(service_name(service)));
    }
    return cells.at(row).at(static_cast<std::size_t>(it - services.begin()));
}

CapabilityMatrix render_capability_matrix(const ExposureReport &report)
{
    CapabilityMatrix m;
    for (const auto &s : report.per_service) {
        m.services.push_back(s.service);
        // Nothing reached, or every connection refused without credentials.
        bool nothing = s.connected == 0 || s.access_denied == s.connected;
        m.cells[0].push_back(nothing ? "-" : "+");
        for (std::size_t c = 1; c < kCategoryCount; ++c) {
            std::string v = "-";
            if (!nothing && s.per_category[c] > 0) {
                v = ratio(s.per_category[c], s.connected) < kPartialShare ? "+/-" : "+";
            }
            m.cells[c].push_back(v);
        }
    }
    return m;
}

std::string render_matrix_text(const CapabilityMatrix &m)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head = {""};
    for (ServiceKind s : m.services) {
        head.emplace_back(service_display_name(s));
    }
    rows.push_back(std::move(head));
    for (std::size_t r = 0; r < kCategoryCount; ++r) {
        std::vector<std::string> row = {std::string(kMatrixRows[r])};
        row.insert(row.end(), m.cells[r].begin(), m.cells[r].end());
        rows.push_back(std::move(row));
    }
    return table(rows, 1);
}

} // namespace exposcan
