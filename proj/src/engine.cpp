#include "exposcan/engine.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <sstream>
#include <thread>

#include "exposcan/errors.hpp"
#include "exposcan/fsutil.hpp"

namespace exposcan {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::size_t probe_units(ServiceKind service, const ProbeBudget &budget)
{
    // The probe opens a fresh connection, counted as one unit.
    return probe_round_trips(service, budget) + 1;
}

Clock::time_point deadline_after(Clock::time_point start, const ProbeBudget &budget, std::size_t units)
{
    return start + budget.connect_timeout + budget.io_timeout * static_cast<long>(units);
}

ConnStatus check_until(const TargetRecord &target, const ProbeBudget &budget, Clock::time_point deadline,
    std::size_t *messages = nullptr)
{
    auto conn = net::tcp_connect(target.address, target.port, budget.connect_timeout);
    switch (conn.outcome) {
    case net::ConnectOutcome::Refused: return ConnStatus::Refused;
    case net::ConnectOutcome::TimedOut: return ConnStatus::TimedOut;
    case net::ConnectOutcome::Connected: break;
    }
    ProbeSession session(target, budget, {}, deadline);
    auto stream = session.adopt(std::move(conn.socket));
    auto status = check_handshake(session, stream);
    if (messages != nullptr) {
        *messages += session.messages_sent();
    }
    return status;
}

ProbeResult probe_until(const TargetRecord &target, ConnStatus status, const ScanConfig &config,
    Clock::time_point deadline, std::size_t &messages)
{
    ProbeResult r;
    r.target = target;
    r.status = status;
    if (is_connected(status)) {
        ProbeSession session(target, config.budget, config.options, deadline);
        r.harvest = probe_service(session);
        messages += session.messages_sent();
        if (r.harvest.auth_blocked) {
            r.status = ConnStatus::AuthRequired;
        }
    }
    const RuleSet &sensitive = config.sensitive_rules ? *config.sensitive_rules : RuleSet::default_sensitive();
    const RuleSet &ransom = config.ransom_rules ? *config.ransom_rules : RuleSet::default_ransom();
    auto hits = is_connected(r.status) ? detect_sensitive(r.harvest, sensitive) : std::vector<SensitiveHit>{};
    auto notes = is_connected(r.status) ? detect_compromise(r.harvest, ransom) : std::vector<Evidence>{};
    auto c = classify(r.status, r.harvest, hits, notes);
    r.category = c.category;
    r.evidence = std::move(c.evidence);
    return r;
}

template <typename In, typename Out, typename Fn>
std::vector<Out> parallel_map(const std::vector<In> &items, std::size_t parallelism, Fn fn)
{
    std::vector<Out> out(items.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) {
                return;
            }
            out[i] = fn(items[i]);
        }
    };
    std::size_t threads = std::min(std::max<std::size_t>(parallelism, 1), items.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    if (threads > 0) {
        worker();
    }
    for (auto &t : pool) {
        t.join();
    }
    return out;
}

void check_parallelism(const ScanConfig &config)
{
    if (config.parallelism < 1) {
        throw PreconditionError("parallelism must be at least 1");
    }
    config.budget.validate();
}

template <typename T, typename ToJson>
void persist_grouped(const std::vector<T> &items, const fs::path &root, std::string_view name, ToJson to_line)
{
    std::map<std::pair<std::string, ServiceKind>, std::vector<const T *>> groups;
    for (const auto &item : items) {
        groups[{item.target.country, item.target.service}].push_back(&item);
    }
    for (auto &[key, group] : groups) {
        std::stable_sort(group.begin(), group.end(),
            [](const T *a, const T *b) { return layout_less(a->target, b->target); });
        fs::path dir = root / key.first / std::string(service_name(key.second));
        ensure_directory(dir);
        std::string content;
        for (const T *item : group) {
            content += to_line(*item);
            content += '\n';
        }
        write_file_atomically(dir / std::string(name), content);
    }
}

template <typename T, typename FromJson>
std::vector<T> load_grouped(const fs::path &root, std::string_view name, const TargetFilter &filter, FromJson from)
{
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw IoError("root " + root.string() + " does not exist");
    }
    std::vector<T> out;
    for (const auto &file : find_layout_files(root, name)) {
        std::istringstream in(read_file(file));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                auto j = nlohmann::json::parse(line);
                T item = from(j);
                if (filter.accepts(item.target)) {
                    out.push_back(std::move(item));
                }
            } catch (const nlohmann::json::exception &e) {
                throw ParseError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
            } catch (const Error &e) {
                throw ParseError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const T &a, const T &b) { return layout_less(a.target, b.target); });
    return out;
}

} // namespace

std::size_t timeout_round_trips(ServiceKind service, const ProbeBudget &budget)
{
    return check_round_trips(service) + probe_units(service, budget);
}

std::chrono::milliseconds timeout_ceiling(ServiceKind service, const ProbeBudget &budget)
{
    return budget.connect_timeout
        + budget.io_timeout * static_cast<long>(timeout_round_trips(service, budget));
}

ConnStatus check_connection(const TargetRecord &target, const ProbeBudget &budget)
{
    budget.validate();
    auto deadline = deadline_after(Clock::now(), budget, check_round_trips(target.service));
    return check_until(target, budget, deadline);
}

ProbeResult probe_target(const TargetRecord &target, ConnStatus status, const ScanConfig &config)
{
    config.budget.validate();
    auto wall_start = Clock::now();
    ProbeResult r;
    std::size_t messages = 0;
    auto started = config.clock();
    r = probe_until(target, status, config,
        deadline_after(wall_start, config.budget, probe_units(target.service, config.budget)), messages);
    r.timing = {started, std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - wall_start), messages};
    return r;
}

ProbeResult run_probe(const TargetRecord &target, const ScanConfig &config)
{
    config.budget.validate();
    auto wall_start = Clock::now();
    auto started = config.clock();
    auto deadline = deadline_after(wall_start, config.budget, timeout_round_trips(target.service, config.budget));
    std::size_t messages = 0;
    ConnStatus status = check_until(target, config.budget, deadline, &messages);
    ProbeResult r = probe_until(target, status, config, deadline, messages);
    r.timing = {started, std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - wall_start), messages};
    return r;
}

std::vector<ProbeResult> run_scan(const std::vector<TargetRecord> &targets, const ScanConfig &config)
{
    check_parallelism(config);
    auto out = parallel_map<TargetRecord, ProbeResult>(targets, config.parallelism,
        [&](const TargetRecord &t) { return run_probe(t, config); });
    std::stable_sort(out.begin(), out.end(),
        [](const ProbeResult &a, const ProbeResult &b) { return layout_less(a.target, b.target); });
    return out;
}

std::vector<StatusRecord> run_checks(const std::vector<TargetRecord> &targets, const ScanConfig &config)
{
    check_parallelism(config);
    auto out = parallel_map<TargetRecord, StatusRecord>(targets, config.parallelism,
        [&](const TargetRecord &t) { return StatusRecord{t, check_connection(t, config.budget)}; });
    std::stable_sort(out.begin(), out.end(),
        [](const StatusRecord &a, const StatusRecord &b) { return layout_less(a.target, b.target); });
    return out;
}

std::vector<ProbeResult> run_probes(const std::vector<StatusRecord> &statuses, const ScanConfig &config)
{
    check_parallelism(config);
    auto out = parallel_map<StatusRecord, ProbeResult>(statuses, config.parallelism,
        [&](const StatusRecord &s) { return probe_target(s.target, s.status, config); });
    std::stable_sort(out.begin(), out.end(),
        [](const ProbeResult &a, const ProbeResult &b) { return layout_less(a.target, b.target); });
    return out;
}

nlohmann::ordered_json to_json(const ProbeResult &r)
{
    nlohmann::ordered_json j;
    j["target"] = to_json(r.target);
    j["status"] = status_name(r.status);
    j["category"] = category_name(r.category);
    j["category_ordinal"] = ordinal(r.category);
    j["harvest"] = to_json(r.harvest);
    j["evidence"] = nlohmann::ordered_json::array();
    for (const auto &e : r.evidence) {
        j["evidence"].push_back(to_json(e));
    }
    return j;
}

ProbeResult probe_result_from_json(const nlohmann::json &j)
{
    ProbeResult r;
    r.target = target_from_json(j.at("target"));
    auto status = parse_status(j.at("status").get<std::string>());
    auto category = parse_category(j.at("category").get<std::string>());
    if (!status || !category) {
        throw ParseError("unknown status or category");
    }
    r.status = *status;
    r.category = *category;
    r.harvest = harvest_from_json(j.at("harvest"));
    for (const auto &e : j.at("evidence")) {
        r.evidence.push_back(evidence_from_json(e));
    }
    return r;
}

nlohmann::ordered_json timing_to_json(const ProbeResult &r)
{
    nlohmann::ordered_json j;
    j["address"] = r.target.address;
    j["port"] = r.target.port;
    j["service"] = service_name(r.target.service);
    j["started_at"] = format_iso8601(r.timing.started_at);
    j["duration_ms"] = r.timing.duration.count();
    j["messages_sent"] = r.timing.messages_sent;
    return j;
}

nlohmann::ordered_json to_json(const StatusRecord &s)
{
    nlohmann::ordered_json j;
    j["target"] = to_json(s.target);
    j["status"] = status_name(s.status);
    return j;
}

StatusRecord status_from_json(const nlohmann::json &j)
{
    StatusRecord s;
    s.target = target_from_json(j.at("target"));
    auto status = parse_status(j.at("status").get<std::string>());
    if (!status) {
        throw ParseError("unknown status");
    }
    s.status = *status;
    return s;
}

void persist_statuses(const std::vector<StatusRecord> &statuses, const fs::path &root)
{
    persist_grouped(statuses, root, kStatusFile, [](const StatusRecord &s) { return to_json(s).dump(); });
}

std::vector<StatusRecord> load_statuses(const fs::path &root, const TargetFilter &filter)
{
    return load_grouped<StatusRecord>(root, kStatusFile, filter, status_from_json);
}

void persist_results(const std::vector<ProbeResult> &results, const fs::path &root)
{
    auto dump = [](const nlohmann::ordered_json &j) {
        return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
    };
    persist_grouped(results, root, kResultsFile, [&](const ProbeResult &r) { return dump(to_json(r)); });
    persist_grouped(results, root, kTimingsFile, [&](const ProbeResult &r) { return dump(timing_to_json(r)); });
}

std::vector<ProbeResult> load_results(const fs::path &root, const TargetFilter &filter)
{
    return load_grouped<ProbeResult>(root, kResultsFile, filter, probe_result_from_json);
}

} // namespace exposcan
