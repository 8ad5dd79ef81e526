#include "common.hpp"
#include "exposcan/codec/pg.hpp"

namespace exposcan {

namespace {

pg::Message read_message(net::Stream &s)
{
    return s.read_frame([](ByteView b) { return pg::decode(b); });
}

enum class StartupOutcome { Ready, AuthRequired, Error };

struct StartupResult {
    StartupOutcome outcome = StartupOutcome::Error;
    std::string auth_method;
    pg::Fields error;
    std::vector<std::pair<std::string, std::string>> parameters;
};

std::string auth_method_name(std::int32_t code)
{
    switch (static_cast<pg::AuthCode>(code)) {
    case pg::AuthCode::CleartextPassword: return "cleartext";
    case pg::AuthCode::Md5Password: return "md5";
    case pg::AuthCode::Sasl: return "sasl";
    default: return "code " + std::to_string(code);
    }
}

std::string field(const pg::Fields &f, char code)
{
    for (const auto &[c, v] : f) {
        if (c == code) {
            return v;
        }
    }
    return {};
}

bool is_auth_error(const pg::Fields &f) { return field(f, 'C').rfind("28", 0) == 0; }

StartupResult startup(ProbeSession &session, net::Stream &s, const std::string &database)
{
    pg::Startup msg;
    msg.params = {{"user", "postgres"}, {"database", database}};
    session.send(s, pg::encode_startup(msg));
    StartupResult out;
    for (;;) {
        auto m = read_message(s);
        switch (m.type) {
        case 'R': {
            auto auth = pg::parse_authentication(m);
            if (auth.code != static_cast<std::int32_t>(pg::AuthCode::Ok)) {
                out.outcome = StartupOutcome::AuthRequired;
                out.auth_method = auth_method_name(auth.code);
                if (auth.code == static_cast<std::int32_t>(pg::AuthCode::Sasl)) {
                    std::string mechs;
                    ByteReader r(auth.extra);
                    while (!r.at_end()) {
                        std::string mech = r.cstring();
                        if (mech.empty()) {
                            break;
                        }
                        mechs += (mechs.empty() ? "" : ",") + mech;
                    }
                    out.auth_method += " " + mechs;
                }
                return out;
            }
            break;
        }
        case 'S': out.parameters.push_back(pg::parse_parameter_status(m)); break;
        case 'E':
            out.error = pg::parse_error(m);
            out.outcome = is_auth_error(out.error) ? StartupOutcome::AuthRequired : StartupOutcome::Error;
            return out;
        case 'K':
        case 'N': break;
        case 'Z': out.outcome = StartupOutcome::Ready; return out;
        default: throw_malformed(0, std::string("unexpected message '") + m.type + "' during startup");
        }
    }
}

struct QueryResult {
    std::vector<pg::Column> columns;
    std::vector<pg::Row> rows;
    pg::Fields error;
};

QueryResult run_query(ProbeSession &session, net::Stream &s, const std::string &sql)
{
    session.send(s, pg::encode(pg::make_query(sql)));
    QueryResult out;
    for (;;) {
        auto m = read_message(s);
        switch (m.type) {
        case 'T': out.columns = pg::parse_row_description(m); break;
        case 'D': out.rows.push_back(pg::parse_data_row(m)); break;
        case 'E': out.error = pg::parse_error(m); break;
        case 'C':
        case 'I':
        case 'N': break;
        case 'Z': return out;
        default: throw_malformed(0, std::string("unexpected message '") + m.type + "' in query reply");
        }
    }
}

void record_startup(Harvest &h, const StartupResult &r)
{
    for (const auto &[k, v] : r.parameters) {
        if (k == "server_version" || k == "server_encoding" || k == "application_name") {
            h.server_info[k] = v;
        }
    }
    if (!r.auth_method.empty()) {
        h.server_info["auth_method"] = r.auth_method;
    }
    if (!r.error.empty()) {
        h.server_info["error_severity"] = field(r.error, 'S');
        h.server_info["error_code"] = field(r.error, 'C');
        h.server_info["error_message"] = field(r.error, 'M');
    }
}

} // namespace

ConnStatus check_postgres(ProbeSession &session, net::Stream &stream)
{
    auto r = startup(session, stream, "postgres");
    return r.outcome == StartupOutcome::AuthRequired ? ConnStatus::AuthRequired : ConnStatus::ProtocolOk;
}

Harvest probe_postgres(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "postgresql";
        auto stream = session.open();
        auto first = startup(session, stream, "postgres");
        record_startup(h, first);
        if (first.outcome == StartupOutcome::AuthRequired) {
            h.auth_blocked = true;
            return;
        }
        if (first.outcome != StartupOutcome::Ready) {
            h.notes.push_back("startup rejected");
            return;
        }
        const auto &budget = session.budget();
        auto dbs = run_query(session, stream, "SELECT datname FROM pg_database LIMIT "
            + std::to_string(budget.max_namespaces + 16));
        if (!dbs.error.empty()) {
            if (is_auth_error(dbs.error)) {
                h.auth_blocked = true;
            }
            h.notes.push_back("database listing failed: " + field(dbs.error, 'M'));
            return;
        }
        std::vector<std::string> names;
        for (const auto &row : dbs.rows) {
            if (!row.empty() && row[0]) {
                names.push_back(*row[0]);
            }
        }
        stream.close();
        bool complete = true;
        const std::size_t per_ns = budget.max_samples_per_namespace;
        for (const auto &db : detail::user_namespaces(h, ServiceKind::PostgreSQL, names, budget.max_namespaces)) {
            NamespaceSample ns{db, std::nullopt, {}};
            auto conn = session.open();
            auto r = startup(session, conn, db);
            if (r.outcome != StartupOutcome::Ready) {
                h.notes.push_back("could not open database " + db);
                complete = false;
                h.namespaces.push_back(std::move(ns));
                continue;
            }
            auto tables = run_query(session, conn,
                "SELECT table_schema, table_name FROM information_schema.tables WHERE table_schema "
                "NOT IN ('pg_catalog', 'information_schema') LIMIT "
                    + std::to_string(per_ns + 1));
            if (!tables.error.empty()) {
                h.notes.push_back("table listing failed on " + db);
                complete = false;
                h.namespaces.push_back(std::move(ns));
                continue;
            }
            bool saw_all = tables.rows.size() <= per_ns;
            for (const auto &row : tables.rows) {
                std::size_t left = per_ns - ns.samples.size();
                if (row.size() < 2 || !row[0] || !row[1]) {
                    continue;
                }
                std::string qs = detail::quote_ident(*row[0], '"');
                std::string qt = detail::quote_ident(*row[1], '"');
                if (left == 0 || qs.empty() || qt.empty()) {
                    saw_all = false;
                    break;
                }
                auto rows = run_query(session, conn,
                    "SELECT * FROM " + qs + "." + qt + " LIMIT " + std::to_string(left));
                if (!rows.error.empty()) {
                    h.notes.push_back("select failed on " + db + "." + *row[1]);
                    saw_all = false;
                    continue;
                }
                if (rows.rows.size() >= left) {
                    saw_all = false;
                }
                for (const auto &data : rows.rows) {
                    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
                    obj["_table"] = *row[1];
                    for (std::size_t i = 0; i < data.size() && i < rows.columns.size(); ++i) {
                        obj[rows.columns[i].name] = data[i] ? nlohmann::ordered_json(*data[i]) : nlohmann::ordered_json();
                    }
                    if (ns.samples.size() < per_ns) {
                        ns.samples.push_back(sample_text(detail::dump_json(obj)));
                    }
                }
            }
            if (saw_all && ns.samples.empty()) {
                ns.record_count = 0;
            }
            h.namespaces.push_back(std::move(ns));
        }
        if (complete) {
            detail::settle_empty(h);
        }
    });
}

} // namespace exposcan
