#include "settings.hpp"

#include <fstream>

#include "exposcan/errors.hpp"
#include "exposcan/fsutil.hpp"

namespace exposcan::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void apply_environment(Settings &s, const CliEnvironment &env)
{
    if (!env.getenv) {
        return;
    }
    if (auto v = env.getenv(kShodanKeyVar); v && !v->empty()) {
        s.shodan_key = *v;
    }
    if (auto v = env.getenv(kBinaryEdgeKeyVar); v && !v->empty()) {
        s.binaryedge_key = *v;
    }
}

namespace {

std::size_t positive(const json &v, const std::string &key)
{
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
        throw ParseError("config: '" + key + "' must be a positive integer");
    }
    return v.get<std::size_t>();
}

std::string text(const json &v, const std::string &key)
{
    if (!v.is_string()) {
        throw ParseError("config: '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

ServiceKind service_of(const std::string &name, const std::string &key)
{
    auto s = parse_service(name);
    if (!s) {
        throw ParseError("config: unknown service '" + name + "' in '" + key + "'");
    }
    return *s;
}

TargetSource source_of(const std::string &name, const std::string &key)
{
    auto s = parse_source(name);
    if (!s) {
        throw ParseError("config: unknown source '" + name + "' in '" + key + "'");
    }
    return *s;
}

} // namespace

void apply_config_json(Settings &s, const json &j)
{
    if (!j.is_object()) {
        throw ParseError("config: top level must be an object");
    }
    for (const auto &[key, v] : j.items()) {
        if (key == "out") {
            s.out = text(v, key);
        } else if (key == "sources") {
            if (!v.is_array() || v.empty()) {
                throw ParseError("config: 'sources' must be a non-empty array");
            }
            s.sources.clear();
            for (const auto &e : v) {
                s.sources.push_back(source_of(text(e, key), key));
            }
        } else if (key == "targets") {
            s.targets = text(v, key);
        } else if (key == "fixture") {
            s.fixture = text(v, key);
        } else if (key == "service") {
            s.service = service_of(text(v, key), key);
        } else if (key == "country") {
            s.country = text(v, key);
        } else if (key == "max_results") {
            s.max_results = positive(v, key);
        } else if (key == "parallelism") {
            s.parallelism = positive(v, key);
        } else if (key == "connect_timeout_ms") {
            s.budget.connect_timeout = std::chrono::milliseconds(positive(v, key));
        } else if (key == "io_timeout_ms") {
            s.budget.io_timeout = std::chrono::milliseconds(positive(v, key));
        } else if (key == "max_namespaces") {
            s.budget.max_namespaces = positive(v, key);
        } else if (key == "max_samples_per_namespace") {
            s.budget.max_samples_per_namespace = positive(v, key);
        } else if (key == "max_bytes_total") {
            s.budget.max_bytes_total = positive(v, key);
        } else if (key == "try_default_credentials") {
            if (!v.is_boolean()) {
                throw ParseError("config: 'try_default_credentials' must be a boolean");
            }
            s.try_default_credentials = v.get<bool>();
        } else if (key == "rate_limit_ms") {
            s.rate_limit = std::chrono::milliseconds(positive(v, key));
        } else if (key == "shodan_api_key") {
            s.shodan_key = text(v, key);
        } else if (key == "binaryedge_api_key") {
            s.binaryedge_key = text(v, key);
        } else if (key == "sensitive_rules") {
            s.sensitive_rules = text(v, key);
        } else if (key == "ransom_rules") {
            s.ransom_rules = text(v, key);
        } else if (key == "queries") {
            if (!v.is_object()) {
                throw ParseError("config: 'queries' must map source to {service: query}");
            }
            for (const auto &[src, per] : v.items()) {
                TargetSource source = source_of(src, key);
                if (!per.is_object()) {
                    throw ParseError("config: 'queries." + src + "' must be an object");
                }
                for (const auto &[svc, q] : per.items()) {
                    s.queries[source][service_of(svc, key)] = text(q, key + "." + src + "." + svc);
                }
            }
        } else {
            throw ParseError("config: unknown key '" + key + "'");
        }
    }
}

void apply_config_file(Settings &s, const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw ParseError("config file " + path.string() + " is not valid JSON");
    }
    apply_config_json(s, j);
}

ordered_json snapshot(const Settings &s)
{
    auto opt = [](const auto &v) -> ordered_json {
        if (!v) {
            return nullptr;
        }
        return *v;
    };
    ordered_json j;
    j["out"] = s.out.string();
    j["sources"] = ordered_json::array();
    for (auto src : s.sources) {
        j["sources"].push_back(source_name(src));
    }
    j["targets"] = s.targets ? ordered_json(s.targets->string()) : ordered_json(nullptr);
    j["fixture"] = s.fixture ? ordered_json(s.fixture->string()) : ordered_json(nullptr);
    j["live"] = s.live;
    j["service"] = s.service ? ordered_json(service_name(*s.service)) : ordered_json(nullptr);
    j["country"] = opt(s.country);
    j["max_results"] = opt(s.max_results);
    j["parallelism"] = s.parallelism;
    j["budget"] = to_json(s.budget);
    j["try_default_credentials"] = s.try_default_credentials;
    j["authorized"] = s.authorized;
    j["rate_limit_ms"] = s.rate_limit.count();
    j["shodan_api_key"] = s.shodan_key ? ordered_json("set") : ordered_json(nullptr);
    j["binaryedge_api_key"] = s.binaryedge_key ? ordered_json("set") : ordered_json(nullptr);
    ordered_json queries = ordered_json::object();
    for (const auto &[src, per] : s.queries) {
        ordered_json m = ordered_json::object();
        for (const auto &[svc, q] : per) {
            m[std::string(service_name(svc))] = q;
        }
        queries[std::string(source_name(src))] = std::move(m);
    }
    j["queries"] = std::move(queries);
    j["sensitive_rules"] = s.sensitive_rules ? ordered_json(s.sensitive_rules->string()) : ordered_json(nullptr);
    j["ransom_rules"] = s.ransom_rules ? ordered_json(s.ransom_rules->string()) : ordered_json(nullptr);
    return j;
}

std::string_view step_name(Step s)
{
    switch (s) {
    case Step::Gather: return "gather";
    case Step::Check: return "check";
    case Step::Parse: return "parse";
    case Step::Report: return "report";
    }
    return "unknown";
}

namespace {

std::optional<Step> parse_step(std::string_view name)
{
    for (Step s : {Step::Gather, Step::Check, Step::Parse, Step::Report}) {
        if (step_name(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

} // namespace

std::optional<RunManifest> load_manifest(const fs::path &root)
{
    fs::path path = root / kManifestFile;
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError(path.string() + " is not valid JSON");
    }
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.root = j.at("root").get<std::string>();
        for (const auto &e : j.at("steps_completed")) {
            auto step = parse_step(e.get<std::string>());
            if (!step) {
                throw ParseError(path.string() + ": unknown step '" + e.get<std::string>() + "'");
            }
            m.steps_completed.insert(*step);
        }
        m.config_snapshot = j.at("config_snapshot");
    } catch (const json::exception &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return m;
}

void save_manifest(const RunManifest &m, const fs::path &root)
{
    ordered_json j;
    j["run_id"] = m.run_id;
    j["root"] = m.root;
    j["steps_completed"] = ordered_json::array();
    for (Step s : m.steps_completed) {
        j["steps_completed"].push_back(step_name(s));
    }
    j["config_snapshot"] = m.config_snapshot;
    ensure_directory(root);
    write_file_atomically(root / kManifestFile, j.dump(2) + "\n");
}

std::string make_run_id(UtcTime t)
{
    std::string iso = format_iso8601(t);
    std::string id;
    for (char c : iso) {
        if (c != '-' && c != ':') {
            id += c;
        }
    }
    return id;
}

void record_step(const fs::path &root, Step step, const Settings &s, UtcTime now)
{
    RunManifest m = load_manifest(root).value_or(RunManifest{});
    if (m.run_id.empty() || step == Step::Gather) {
        m.run_id = make_run_id(now);
    }
    m.root = root.string();
    for (auto it = m.steps_completed.begin(); it != m.steps_completed.end();) {
        it = *it > step ? m.steps_completed.erase(it) : std::next(it);
    }
    m.steps_completed.insert(step);
    m.config_snapshot = snapshot(s);
    save_manifest(m, root);
}

} // namespace exposcan::cli
