#include <limits>
#include <map>
#include <memory>

#include "commands.hpp"
#include "exposcan/discovery.hpp"
#include "exposcan/engine.hpp"
#include "exposcan/errors.hpp"
#include "exposcan/fsutil.hpp"
#include "exposcan/net.hpp"
#include "exposcan/reporting.hpp"

namespace exposcan::cli {

namespace fs = std::filesystem;

namespace {

UtcTime now(const Io &io) { return io.env.clock ? io.env.clock() : utc_now(); }

ScanConfig scan_config(const Settings &s, const Io &io)
{
    s.budget.validate();
    ScanConfig c;
    c.budget = s.budget;
    c.options.try_default_credentials = s.try_default_credentials;
    c.parallelism = s.parallelism;
    c.clock = io.env.clock ? io.env.clock : utc_now;
    return c;
}

// Probing anything beyond this host needs explicit sign-off.
bool authorized(const std::vector<TargetRecord> &targets, const Settings &s, const Io &io, std::string_view step)
{
    if (s.authorized) {
        return true;
    }
    for (const auto &t : targets) {
        if (!net::is_loopback_address(t.address)) {
            io.err << step << ": target " << t.address << " is not a loopback address; pass "
                   << "--i-have-authorization once you hold written permission to test it\n";
            return false;
        }
    }
    return true;
}

bool step_done(const fs::path &root, Step step)
{
    auto m = load_manifest(root);
    return m && m->steps_completed.count(step) > 0;
}

std::optional<std::string> api_key(const Settings &s, TargetSource src)
{
    return src == TargetSource::Shodan ? s.shodan_key : s.binaryedge_key;
}

std::string_view key_var(TargetSource src)
{
    return src == TargetSource::Shodan ? kShodanKeyVar : kBinaryEdgeKeyVar;
}

} // namespace

int cmd_gather(const Settings &s, Io io)
{
    std::vector<ServiceKind> services;
    if (s.service) {
        services.push_back(*s.service);
    } else {
        services.assign(kAllServices.begin(), kAllServices.end());
    }

    std::unique_ptr<HttpTransport> transport;
    std::vector<TargetRecord> found;
    std::size_t failed = 0;
    for (TargetSource src : s.sources) {
        try {
            RemoteSourceConfig remote;
            remote.min_interval = s.rate_limit;
            remote.clock = io.env.clock ? io.env.clock : utc_now;
            if (src == TargetSource::File) {
                if (!s.targets) {
                    throw PreconditionError("the file source needs --targets <file>");
                }
            } else {
                if (!api_key(s, src)) {
                    throw AuthError("no API key; set " + std::string(key_var(src)));
                }
                if (!transport) {
                    if (s.fixture) {
                        transport = FixtureTransport::from_file(*s.fixture);
                    } else if (s.live) {
                        transport = make_live_transport();
                    } else {
                        throw PreconditionError("remote sources need --live or --fixture <responses.json>");
                    }
                }
                remote.transport = transport.get();
            }
            for (ServiceKind svc : services) {
                SourceQuery q;
                q.service = svc;
                q.country = s.country;
                if (src == TargetSource::File) {
                    q.max_results = s.max_results.value_or(std::numeric_limits<std::size_t>::max());
                } else {
                    q.max_results = s.max_results.value_or(q.max_results);
                    q.api_key = api_key(s, src);
                    if (auto per = s.queries.find(src); per != s.queries.end()) {
                        if (auto it = per->second.find(svc); it != per->second.end()) {
                            q.query_override = it->second;
                        }
                    }
                }
                auto batch = fetch_targets(src, q, s.targets.value_or(fs::path{}), remote);
                found.insert(found.end(), batch.begin(), batch.end());
            }
        } catch (const Error &e) {
            io.err << "gather: " << source_name(src) << ": " << e.what() << "\n";
            ++failed;
        }
    }
    if (failed == s.sources.size()) {
        io.err << "gather: every source failed\n";
        return 1;
    }

    auto unique = dedupe_targets(found);
    persist_targets(unique, s.out);
    record_step(s.out, Step::Gather, s, now(io));

    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto &t : unique) {
        ++counts[{std::string(service_name(t.service)), t.country}];
    }
    for (const auto &[key, n] : counts) {
        io.out << key.first << "\t" << key.second << "\t" << n << "\n";
    }
    io.out << "total\t" << unique.size() << " unique of " << found.size() << " found\n";
    return failed > 0 ? 2 : 0;
}

int cmd_check(const Settings &s, Io io)
{
    auto targets = load_targets(s.out, s.filter());
    if (targets.empty()) {
        io.err << "check: no targets under " << s.out.string() << "; run gather first\n";
        return 1;
    }
    if (!authorized(targets, s, io, "check")) {
        return 1;
    }
    auto statuses = run_checks(targets, scan_config(s, io));
    persist_statuses(statuses, s.out);
    record_step(s.out, Step::Check, s, now(io));

    std::map<ConnStatus, std::size_t> counts;
    for (const auto &st : statuses) {
        ++counts[st.status];
    }
    for (const auto &[status, n] : counts) {
        io.out << status_name(status) << "\t" << n << "\n";
    }
    return 0;
}

int cmd_parse(const Settings &s, Io io)
{
    if (!step_done(s.out, Step::Check)) {
        io.err << "parse: the check step has not been run under " << s.out.string() << "\n";
        return 1;
    }
    auto statuses = load_statuses(s.out, s.filter());
    if (statuses.empty()) {
        io.err << "parse: no check statuses under " << s.out.string() << "\n";
        return 1;
    }
    std::vector<TargetRecord> targets;
    for (const auto &st : statuses) {
        targets.push_back(st.target);
    }
    if (!authorized(targets, s, io, "parse")) {
        return 1;
    }
    auto config = scan_config(s, io);
    std::optional<RuleSet> sensitive;
    std::optional<RuleSet> ransom;
    if (s.sensitive_rules) {
        sensitive = RuleSet::load(s.sensitive_rules->string(), RuleSet::Family::Sensitive);
        config.sensitive_rules = &*sensitive;
    }
    if (s.ransom_rules) {
        ransom = RuleSet::load(s.ransom_rules->string(), RuleSet::Family::Ransom);
        config.ransom_rules = &*ransom;
    }
    auto results = run_probes(statuses, config);
    persist_results(results, s.out);
    record_step(s.out, Step::Parse, s, now(io));

    std::map<ExposureCategory, std::size_t> counts;
    for (const auto &r : results) {
        ++counts[r.category];
    }
    for (const auto &[cat, n] : counts) {
        io.out << category_name(cat) << "\t" << n << "\n";
    }
    return 0;
}

int cmd_report(const Settings &s, const std::string &format, bool matrix, Io io)
{
    ReportFormat fmt = parse_format(format);
    if (!step_done(s.out, Step::Parse)) {
        io.err << "report: the parse step has not been run under " << s.out.string() << "\n";
        return 1;
    }
    auto results = load_results(s.out, s.filter());
    if (results.empty()) {
        io.err << "report: no results under " << s.out.string() << "\n";
        return 1;
    }
    auto report = aggregate(results, s.out.string());
    write_file_atomically(s.out / "report.json", render_report(report, ReportFormat::Json));
    write_file_atomically(s.out / "report.csv", render_report(report, ReportFormat::Csv));
    record_step(s.out, Step::Report, s, now(io));

    io.out << render_report(report, fmt);
    if (matrix) {
        io.out << "\n" << render_matrix_text(render_capability_matrix(report));
    }
    return 0;
}

int cmd_scan(const Settings &s, const std::string &format, bool matrix, Io io)
{
    parse_format(format);
    int gathered = cmd_gather(s, io);
    if (gathered == 1) {
        return 1;
    }
    for (auto step : {cmd_check, cmd_parse}) {
        if (int rc = step(s, io); rc != 0) {
            return rc;
        }
    }
    if (int rc = cmd_report(s, format, matrix, io); rc != 0) {
        return rc;
    }
    return gathered;
}

} // namespace exposcan::cli
