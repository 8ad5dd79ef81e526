#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exposcan/classification.hpp"
#include "exposcan/harvest.hpp"
#include "exposcan/probes.hpp"
#include "exposcan/target.hpp"

namespace exposcan {

struct ProbeTiming {
    UtcTime started_at{};
    std::chrono::milliseconds duration{0};
    std::size_t messages_sent = 0;
};

struct ProbeResult {
    TargetRecord target;
    ConnStatus status = ConnStatus::Refused;
    Harvest harvest;
    ExposureCategory category = ExposureCategory::FailedToConnect;
    std::vector<Evidence> evidence;
    // Kept out of results.jsonl so persisted results stay reproducible.
    ProbeTiming timing;
};

struct ScanConfig {
    ProbeBudget budget;
    ProbeOptions options;
    std::size_t parallelism = 8;
    const RuleSet *sensitive_rules = nullptr; // defaults when null
    const RuleSet *ransom_rules = nullptr;
    std::function<UtcTime()> clock = utc_now;
};

// Wall-clock ceiling for one target: connect_timeout + k * io_timeout.
std::size_t timeout_round_trips(ServiceKind service, const ProbeBudget &budget);
std::chrono::milliseconds timeout_ceiling(ServiceKind service, const ProbeBudget &budget);

ConnStatus check_connection(const TargetRecord &target, const ProbeBudget &budget);

// Probes a target whose connection status is already known. Targets that
// did not connect are classified without contacting them again.
ProbeResult probe_target(const TargetRecord &target, ConnStatus status, const ScanConfig &config);

ProbeResult run_probe(const TargetRecord &target, const ScanConfig &config);

// One result per target, sorted by layout order whatever the parallelism.
std::vector<ProbeResult> run_scan(const std::vector<TargetRecord> &targets, const ScanConfig &config);

struct StatusRecord {
    TargetRecord target;
    ConnStatus status = ConnStatus::Refused;
    bool operator==(const StatusRecord &) const = default;
};

std::vector<StatusRecord> run_checks(const std::vector<TargetRecord> &targets, const ScanConfig &config);

// Probes every status record, connected or not, in parallel.
std::vector<ProbeResult> run_probes(const std::vector<StatusRecord> &statuses, const ScanConfig &config);

nlohmann::ordered_json to_json(const ProbeResult &r);
ProbeResult probe_result_from_json(const nlohmann::json &j);
nlohmann::ordered_json timing_to_json(const ProbeResult &r);

nlohmann::ordered_json to_json(const StatusRecord &s);
StatusRecord status_from_json(const nlohmann::json &j);

inline constexpr std::string_view kStatusFile = "status.jsonl";
inline constexpr std::string_view kResultsFile = "results.jsonl";
inline constexpr std::string_view kTimingsFile = "timings.jsonl";

// Layout files, grouped per <COUNTRY>/<service> and sorted.
void persist_statuses(const std::vector<StatusRecord> &statuses, const std::filesystem::path &root);
std::vector<StatusRecord> load_statuses(const std::filesystem::path &root, const TargetFilter &filter = {});

void persist_results(const std::vector<ProbeResult> &results, const std::filesystem::path &root);
std::vector<ProbeResult> load_results(const std::filesystem::path &root, const TargetFilter &filter = {});

} // namespace exposcan
