#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exposcan/classification.hpp"
#include "exposcan/engine.hpp"

namespace exposcan {

using CategoryCounts = std::array<std::size_t, kCategoryCount>;
using CategoryRatios = std::array<double, kCategoryCount>;

struct ServiceStats {
    ServiceKind service = ServiceKind::MongoDB;
    std::size_t total_found = 0;
    std::size_t connected = 0;
    // Connected results refused for lack of credentials (a subset of
    // category 1).
    std::size_t access_denied = 0;
    CategoryCounts per_category{};
    double connect_ratio = 0.0;
    // Category 0 over total_found; categories 1-5 over connected.
    CategoryRatios category_ratios{};

    bool operator==(const ServiceStats &) const = default;
};

struct OverallStats {
    std::size_t total_found = 0;
    std::size_t open_count = 0;
    double open_ratio = 0.0;
    double compromised_ratio_of_open = 0.0;
    // Index 0 unused (always 0); 1-5 are shares of open_count.
    CategoryRatios distribution{};

    bool operator==(const OverallStats &) const = default;
};

struct ExposureReport {
    std::optional<UtcTime> generated_at;
    std::string scan_root;
    std::vector<ServiceStats> per_service; // services present, in enum order
    OverallStats overall;

    bool operator==(const ExposureReport &) const = default;
};

// generated_at is the latest discovered_at among the result targets, so
// the same results always give the same report.
ExposureReport aggregate(const std::vector<ProbeResult> &results, const std::string &scan_root = {});

enum class ReportFormat { Json, Csv, Text };

// Throws UnsupportedFormat.
ReportFormat parse_format(std::string_view name);

std::string render_report(const ExposureReport &report, ReportFormat format);
ExposureReport parse_report_json(std::string_view text);

nlohmann::ordered_json to_json(const ExposureReport &report);

inline constexpr std::array<std::string_view, kCategoryCount> kMatrixRows = {
    "Managed to connect",
    "Failed to gather data",
    "Database is empty",
    "System or non-sensitive data",
    "Sensitive data",
    "Compromised",
};

// Shares of connected below this render as "+/-".
inline constexpr double kPartialShare = 0.05;

struct CapabilityMatrix {
    std::vector<ServiceKind> services;
    // cells[row][column]: "+", "-" or "+/-"; row 0 is the connect row.
    std::array<std::vector<std::string>, kCategoryCount> cells;

    [[nodiscard]] const std::string &cell(std::size_t row, ServiceKind service) const;
};

CapabilityMatrix render_capability_matrix(const ExposureReport &report);
std::string render_matrix_text(const CapabilityMatrix &matrix);

// Percentage with one decimal, e.g. "9.8".
std::string format_percent(double ratio);

} // namespace exposcan
