#include <algorithm>
#include <array>
#include <cctype>
#include <random>

#include "exposcan/errors.hpp"
#include "exposcan/fsutil.hpp"
#include "exposcan/mockfleet.hpp"

namespace exposcan::fleet {

namespace {

constexpr std::array<std::string_view, 6> kScenarioNames = {
    "closed", "auth", "empty", "nonsensitive", "sensitive", "compromised"};

constexpr std::array<std::string_view, 7> kBehaviorNames = {
    "normal", "garbage", "tarpit", "close_mid_handshake", "legacy_only", "cachedump_error", "oversized"};

constexpr std::array<std::string_view, 8> kColors = {
    "amber", "teal", "olive", "slate", "coral", "ivory", "indigo", "maroon"};
constexpr std::array<std::string_view, 8> kItems = {
    "lamp", "kettle", "bracket", "hinge", "spool", "basket", "ladder", "valve"};
constexpr std::array<std::string_view, 8> kCities = {
    "Tartu", "Lyon", "Porto", "Ghent", "Bergen", "Turku", "Graz", "Leeds"};
constexpr std::array<std::string_view, 8> kFirst = {
    "Maria", "Jonas", "Aino", "Lukas", "Emma", "Oskar", "Liis", "Marten"};
constexpr std::array<std::string_view, 8> kLast = {
    "Tamm", "Saar", "Sepp", "Kask", "Magi", "Rebane", "Ilves", "Koppel"};

constexpr std::string_view kBitcoinAddress = "1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa";
constexpr std::string_view kAlnumUpper = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
constexpr std::string_view kAlnum = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
        [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

class Gen {
public:
    Gen(ServiceKind service, Scenario scenario, std::uint64_t seed)
        : rng_(seed * 1000003u + static_cast<std::uint64_t>(service) * 97u + static_cast<std::uint64_t>(scenario))
    {}

    std::uint64_t below(std::uint64_t n) { return rng_() % n; }

    template <std::size_t N> std::string pick(const std::array<std::string_view, N> &a)
    {
        return std::string(a[below(N)]);
    }

    std::string digits(std::size_t n)
    {
        std::string out;
        for (std::size_t i = 0; i < n; ++i) {
            out += static_cast<char>('0' + below(10));
        }
        return out;
    }

    std::string chars(std::string_view alphabet, std::size_t n)
    {
        std::string out;
        for (std::size_t i = 0; i < n; ++i) {
            out += alphabet[below(alphabet.size())];
        }
        return out;
    }

private:
    std::mt19937_64 rng_;
};

std::string luhn_card(Gen &g)
{
    std::string body = "4" + g.digits(14);
    int sum = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        int d = body[body.size() - 1 - i] - '0';
        if (i % 2 == 0) {
            d *= 2;
            if (d > 9) {
                d -= 9;
            }
        }
        sum += d;
    }
    body += static_cast<char>('0' + (10 - sum % 10) % 10);
    std::string out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (i > 0 && i % 4 == 0) {
            out += ' ';
        }
        out += body[i];
    }
    return out;
}

std::string ssn(Gen &g)
{
    return std::to_string(100 + g.below(500)) + "-" + std::to_string(10 + g.below(89)) + "-"
        + std::to_string(1000 + g.below(8999));
}

DataRecord person(Gen &g, std::size_t index)
{
    std::string first = g.pick(kFirst);
    std::string last = g.pick(kLast);
    return {
        {"name", first + " " + last},
        {"email", lower(first) + "." + lower(last) + std::to_string(index) + "@example.com"},
        {"phone", "+372 5" + g.digits(3) + " " + g.digits(4)},
        {"card", luhn_card(g)},
        {"password", g.chars(kAlnum, 12)},
        {"ssn", ssn(g)},
        {"api_token", "AKIA" + g.chars(kAlnumUpper, 16)},
    };
}

DataRecord product(Gen &g)
{
    return {
        {"item", g.pick(kColors) + " " + g.pick(kItems)},
        {"color", g.pick(kColors)},
        {"qty", std::to_string(g.below(90) + 1)},
        {"city", g.pick(kCities)},
    };
}

std::string ransom_text(Gen &g)
{
    return "All your data is backed up. To restore your data send 0.0" + std::to_string(1 + g.below(9))
        + " BTC to " + std::string(kBitcoinAddress) + " and include your server address.";
}

std::vector<DataNamespace> system_namespaces(ServiceKind service)
{
    auto ns = [](std::string name, std::vector<DataTable> tables = {}) {
        return DataNamespace{std::move(name), std::move(tables), true};
    };
    switch (service) {
    case ServiceKind::MongoDB:
        return {ns("admin", {{"system.version", {{{"_id", "featureCompatibilityVersion"}, {"version", "6.0"}}}}}),
            ns("config", {{"system.sessions", {}}}), ns("local", {{"startup_log", {{{"hostname", "mock"}}}}})};
    case ServiceKind::Elasticsearch: return {ns(".geoip_databases", {{"_doc", {}}})};
    case ServiceKind::CouchDB: return {ns("_replicator", {{"docs", {}}}), ns("_users", {{"docs", {}}})};
    case ServiceKind::Cassandra:
        return {ns("system", {{"local", {{{"key", "local"}, {"cluster_name", "Mock Cluster"}}}}}),
            ns("system_auth", {{"roles", {}}}), ns("system_distributed", {{"repair_history", {}}}),
            ns("system_schema", {{"keyspaces", {}}}), ns("system_traces", {{"events", {}}})};
    case ServiceKind::MySQL:
        return {ns("information_schema", {{"TABLES", {}}}), ns("mysql", {{"user", {}}}),
            ns("performance_schema", {{"threads", {}}}), ns("sys", {{"version", {}}})};
    case ServiceKind::PostgreSQL:
        return {ns("postgres", {}), ns("template0", {}), ns("template1", {})};
    case ServiceKind::Redis:
    case ServiceKind::Memcached: return {};
    }
    return {};
}

bool key_value(ServiceKind s) { return s == ServiceKind::Redis || s == ServiceKind::Memcached; }

std::string kv_namespace(ServiceKind s) { return s == ServiceKind::Redis ? "db0" : "slab:1"; }

std::string default_version(ServiceKind s)
{
    switch (s) {
    case ServiceKind::MongoDB: return "6.0.5";
    case ServiceKind::Redis: return "7.0.11";
    case ServiceKind::Elasticsearch: return "7.17.9";
    case ServiceKind::CouchDB: return "3.3.2";
    case ServiceKind::Cassandra: return "4.1.1";
    case ServiceKind::Memcached: return "1.6.21";
    case ServiceKind::MySQL: return "8.0.33";
    case ServiceKind::PostgreSQL: return "15.3";
    }
    return "0";
}

std::string table_name(ServiceKind s, std::string_view wanted)
{
    if (s == ServiceKind::Elasticsearch) {
        return "_doc";
    }
    if (s == ServiceKind::CouchDB) {
        return "docs";
    }
    return std::string(wanted);
}

// Key-value services store each record under a key; everything else keeps
// records in one table of the namespace.
std::vector<DataNamespace> user_data(ServiceKind service, Scenario scenario, Gen &g)
{
    bool kv = key_value(service);
    bool lower_only = service == ServiceKind::Elasticsearch || service == ServiceKind::CouchDB
        || service == ServiceKind::Cassandra || service == ServiceKind::PostgreSQL;
    switch (scenario) {
    case Scenario::Closed:
    case Scenario::Empty: return {};
    case Scenario::Auth:
    case Scenario::NonSensitive: {
        std::size_t n = 3 + g.below(3);
        if (kv) {
            DataTable t{"keys", {}};
            for (std::size_t i = 0; i < n; ++i) {
                DataRecord r = product(g);
                r.insert(r.begin(), {"_key", "product:" + std::to_string(i + 1)});
                t.rows.push_back(std::move(r));
            }
            t.rows.push_back({{"_key", "config:theme"}, {"value", g.pick(kColors)}});
            return {{kv_namespace(service), {t}, false}};
        }
        DataTable t{table_name(service, "products"), {}};
        for (std::size_t i = 0; i < n; ++i) {
            t.rows.push_back(product(g));
        }
        return {{"inventory", {t}, false}};
    }
    case Scenario::Sensitive: {
        if (kv) {
            DataTable t{"keys", {}};
            DataRecord user = person(g, 1);
            DataRecord hash = user;
            hash.insert(hash.begin(), {"_key", "user:1"});
            t.rows.push_back(hash);
            for (const auto &[field, value] : user) {
                if (t.rows.size() < 10) {
                    t.rows.push_back({{"_key", "user:1:" + field}, {"value", value}});
                }
            }
            for (std::size_t i = 2; t.rows.size() < 10; ++i) {
                DataRecord other = person(g, i);
                t.rows.push_back({{"_key", "user:" + std::to_string(i) + ":email"}, {"value", other[1].second}});
            }
            return {{kv_namespace(service), {t}, false}};
        }
        DataTable t{table_name(service, "customers"), {}};
        std::size_t n = 3 + g.below(3);
        for (std::size_t i = 0; i < n; ++i) {
            t.rows.push_back(person(g, i + 1));
        }
        return {{"customers", {t}, false}};
    }
    case Scenario::Compromised: {
        DataRecord note = {{"content", ransom_text(g)}, {"contact", "see the address above"}};
        if (kv) {
            DataTable t{"keys", {{{"_key", "READ_ME_TO_RECOVER_YOUR_DATA"}, {"value", note[0].second}}}};
            return {{kv_namespace(service), {t}, false}};
        }
        std::string name = lower_only ? "read_me_to_recover" : "READ_ME_TO_RECOVER_YOUR_DATA";
        return {{name, {{table_name(service, lower_only ? "readme" : "README"), {note}}}, false}};
    }
    }
    return {};
}

void pad_oversized(Dataset &d)
{
    const std::string blob(256 * 1024, 'x');
    for (auto &ns : d.namespaces) {
        if (ns.system) {
            continue;
        }
        for (auto &t : ns.tables) {
            while (t.rows.size() < 8) {
                DataRecord r = t.rows.empty() ? DataRecord{} : t.rows.front();
                if (!r.empty() && r.front().first == "_key") {
                    r.front().second += ":" + std::to_string(t.rows.size());
                }
                t.rows.push_back(std::move(r));
            }
            for (auto &r : t.rows) {
                r.emplace_back("blob", blob);
            }
        }
    }
}

std::string value_text(const nlohmann::json &v)
{
    return v.is_string() ? v.get<std::string>() : v.dump();
}

DataTable table_from_json(const nlohmann::json &j, const std::string &default_name)
{
    DataTable t{j.value("name", default_name), {}};
    for (const auto &row : j.at("rows")) {
        if (!row.is_object()) {
            throw ParseError("data_overrides rows must be objects");
        }
        DataRecord r;
        for (const auto &[k, v] : row.items()) {
            r.emplace_back(k, value_text(v));
        }
        // json objects iterate sorted; keep _key first for key-value data
        std::stable_partition(r.begin(), r.end(), [](const auto &p) { return p.first == "_key"; });
        t.rows.push_back(std::move(r));
    }
    return t;
}

} // namespace

std::string_view scenario_name(Scenario s) { return kScenarioNames[static_cast<std::size_t>(s)]; }

std::optional<Scenario> parse_scenario(std::string_view name)
{
    for (std::size_t i = 0; i < kScenarioNames.size(); ++i) {
        if (kScenarioNames[i] == name) {
            return static_cast<Scenario>(i);
        }
    }
    return std::nullopt;
}

ExposureCategory expected_category(Scenario s) { return static_cast<ExposureCategory>(static_cast<int>(s)); }

Scenario scenario_for(ExposureCategory c) { return static_cast<Scenario>(static_cast<int>(c)); }

std::string_view behavior_name(Behavior b) { return kBehaviorNames[static_cast<std::size_t>(b)]; }

std::optional<Behavior> parse_behavior(std::string_view name)
{
    for (std::size_t i = 0; i < kBehaviorNames.size(); ++i) {
        if (kBehaviorNames[i] == name) {
            return static_cast<Behavior>(i);
        }
    }
    return std::nullopt;
}

std::size_t Dataset::record_count() const
{
    std::size_t n = 0;
    for (const auto &ns : namespaces) {
        if (ns.system) {
            continue;
        }
        for (const auto &t : ns.tables) {
            n += t.rows.size();
        }
    }
    return n;
}

nlohmann::ordered_json to_json(const Dataset &d)
{
    using oj = nlohmann::ordered_json;
    oj j;
    j["service"] = service_name(d.service);
    j["scenario"] = scenario_name(d.scenario);
    j["version"] = d.version;
    j["requires_auth"] = d.requires_auth;
    j["namespaces"] = oj::array();
    for (const auto &ns : d.namespaces) {
        oj n;
        n["name"] = ns.name;
        n["system"] = ns.system;
        n["tables"] = oj::array();
        for (const auto &t : ns.tables) {
            oj rows = oj::array();
            for (const auto &r : t.rows) {
                oj row = oj::object();
                for (const auto &[k, v] : r) {
                    row[k] = v;
                }
                rows.push_back(std::move(row));
            }
            n["tables"].push_back({{"name", t.name}, {"rows", std::move(rows)}});
        }
        j["namespaces"].push_back(std::move(n));
    }
    return j;
}

Dataset generate_scenario_data(ServiceKind service, Scenario scenario, std::uint64_t seed)
{
    Gen g(service, scenario, seed);
    Dataset d;
    d.service = service;
    d.scenario = scenario;
    d.version = default_version(service);
    d.requires_auth = scenario == Scenario::Auth;
    if (scenario == Scenario::Closed) {
        return d;
    }
    d.namespaces = system_namespaces(service);
    for (auto &ns : user_data(service, scenario, g)) {
        d.namespaces.push_back(std::move(ns));
    }
    return d;
}

Behavior instance_behavior(const InstanceConfig &c)
{
    auto it = c.data_overrides.find("behavior");
    if (it == c.data_overrides.end()) {
        return Behavior::Normal;
    }
    auto b = it->is_string() ? parse_behavior(it->get<std::string>()) : std::nullopt;
    if (!b) {
        throw ParseError("unknown behavior " + it->dump());
    }
    return *b;
}

Dataset instance_dataset(const InstanceConfig &c)
{
    Dataset d = generate_scenario_data(c.service, c.scenario, c.seed);
    const auto &o = c.data_overrides;
    try {
        if (o.contains("version")) {
            d.version = o.at("version").get<std::string>();
        }
        if (o.contains("namespaces")) {
            std::erase_if(d.namespaces, [](const DataNamespace &ns) { return !ns.system; });
            std::string default_table = key_value(c.service) ? "keys" : table_name(c.service, "records");
            for (const auto &n : o.at("namespaces")) {
                DataNamespace ns{n.at("name").get<std::string>(), {}, n.value("system", false)};
                if (n.contains("tables")) {
                    for (const auto &t : n.at("tables")) {
                        ns.tables.push_back(table_from_json(t, default_table));
                    }
                } else if (n.contains("rows")) {
                    ns.tables.push_back(table_from_json(n, default_table));
                    ns.tables.back().name = default_table;
                }
                d.namespaces.push_back(std::move(ns));
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("bad data_overrides: ") + e.what());
    }
    if (instance_behavior(c) == Behavior::Oversized) {
        pad_oversized(d);
    }
    return d;
}

FleetConfig parse_fleet_config(std::string_view json_text)
{
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("instances") || !j["instances"].is_array()) {
        throw ParseError("fleet config must be an object with an \"instances\" array");
    }
    FleetConfig config;
    std::size_t index = 0;
    for (const auto &e : j["instances"]) {
        std::string where = "instance " + std::to_string(index++) + ": ";
        if (!e.is_object()) {
            throw ParseError(where + "not an object");
        }
        InstanceConfig c;
        if (!e.contains("service") || !e["service"].is_string()) {
            throw ParseError(where + "missing service");
        }
        auto service = parse_service(e["service"].get<std::string>());
        if (!service) {
            throw UnsupportedService(where + "unsupported service '" + e["service"].get<std::string>() + "'");
        }
        c.service = *service;
        if (!e.contains("scenario") || !e["scenario"].is_string()) {
            throw ParseError(where + "missing scenario");
        }
        auto scenario = parse_scenario(e["scenario"].get<std::string>());
        if (!scenario) {
            throw ParseError(where + "unknown scenario '" + e["scenario"].get<std::string>() + "'");
        }
        c.scenario = *scenario;
        if (e.contains("port")) {
            const auto &p = e["port"];
            if (p.is_string() && p.get<std::string>() == "auto") {
                c.port = std::nullopt;
            } else if (p.is_number_integer() && p.get<std::int64_t>() >= 1 && p.get<std::int64_t>() <= 65535) {
                c.port = static_cast<std::uint16_t>(p.get<std::int64_t>());
            } else {
                throw ParseError(where + "port must be \"auto\" or 1-65535");
            }
        }
        if (e.contains("seed")) {
            if (!e["seed"].is_number_unsigned()) {
                throw ParseError(where + "seed must be a non-negative integer");
            }
            c.seed = e["seed"].get<std::uint64_t>();
        }
        if (e.contains("country")) {
            if (!e["country"].is_string() || !is_valid_country(e["country"].get<std::string>())) {
                throw ParseError(where + "country must be two uppercase letters");
            }
            c.country = e["country"].get<std::string>();
        }
        if (e.contains("data_overrides") && !e["data_overrides"].is_null()) {
            if (!e["data_overrides"].is_object()) {
                throw ParseError(where + "data_overrides must be an object");
            }
            c.data_overrides = e["data_overrides"];
            instance_behavior(c);
        }
        config.instances.push_back(std::move(c));
    }
    return config;
}

FleetConfig load_fleet_config(const std::filesystem::path &path)
{
    return parse_fleet_config(read_file(path));
}

nlohmann::ordered_json to_json(const FleetConfig &c)
{
    using oj = nlohmann::ordered_json;
    oj j;
    j["instances"] = oj::array();
    for (const auto &i : c.instances) {
        oj e;
        e["service"] = service_name(i.service);
        e["scenario"] = scenario_name(i.scenario);
        e["port"] = i.port ? oj(*i.port) : oj("auto");
        e["seed"] = i.seed;
        e["country"] = i.country;
        e["data_overrides"] = oj::parse(i.data_overrides.dump());
        j["instances"].push_back(std::move(e));
    }
    return j;
}


} // namespace exposcan::fleet
