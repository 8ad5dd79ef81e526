#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "exposcan/cli.hpp"
#include "exposcan/harvest.hpp"
#include "exposcan/target.hpp"

namespace exposcan::cli {

// Effective configuration after layering defaults, environment, config file
// and flags, in that order.
struct Settings {
    std::filesystem::path out;
    std::vector<TargetSource> sources{TargetSource::File};
    std::optional<std::filesystem::path> targets;
    std::optional<std::filesystem::path> fixture;
    bool live = false;
    std::optional<ServiceKind> service;
    std::optional<std::string> country;
    std::optional<std::size_t> max_results;
    std::size_t parallelism = 8;
    ProbeBudget budget;
    bool try_default_credentials = false;
    bool authorized = false;
    std::chrono::milliseconds rate_limit{1000};
    std::optional<std::string> shodan_key;
    std::optional<std::string> binaryedge_key;
    std::map<TargetSource, std::map<ServiceKind, std::string>> queries;
    // Replace the built-in detector rules.
    std::optional<std::filesystem::path> sensitive_rules;
    std::optional<std::filesystem::path> ransom_rules;

    [[nodiscard]] TargetFilter filter() const { return {service, country}; }
};

inline constexpr std::string_view kShodanKeyVar = "SHODAN_API_KEY";
inline constexpr std::string_view kBinaryEdgeKeyVar = "BINARYEDGE_API_KEY";

void apply_environment(Settings &s, const CliEnvironment &env);
// Throws ParseError on unknown keys or ill-typed values.
void apply_config_file(Settings &s, const std::filesystem::path &path);
void apply_config_json(Settings &s, const nlohmann::json &j);

// API keys appear only as "set" or null.
nlohmann::ordered_json snapshot(const Settings &s);

enum class Step { Gather, Check, Parse, Report };

std::string_view step_name(Step s);

struct RunManifest {
    std::string run_id;
    std::string root;
    std::set<Step> steps_completed;
    nlohmann::ordered_json config_snapshot;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

std::optional<RunManifest> load_manifest(const std::filesystem::path &root);
void save_manifest(const RunManifest &m, const std::filesystem::path &root);

std::string make_run_id(UtcTime t);

// Records `step` as done and forgets every later step, which now describe
// stale inputs.
void record_step(const std::filesystem::path &root, Step step, const Settings &s, UtcTime now);

} // namespace exposcan::cli
