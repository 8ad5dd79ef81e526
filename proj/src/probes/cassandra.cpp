#include "common.hpp"
#include "exposcan/codec/cql.hpp"

namespace exposcan {

namespace {

class CqlClient {
public:
    CqlClient(ProbeSession &session, net::Stream &stream) : session_(session), stream_(stream) {}

    cql::Frame request(cql::Opcode op, Bytes body)
    {
        cql::Frame f;
        f.version = cql::kRequestVersion;
        f.stream = next_stream_++;
        f.opcode = static_cast<std::uint8_t>(op);
        f.body = std::move(body);
        session_.send(stream_, cql::encode(f));
        auto reply = stream_.read_frame([](ByteView b) { return cql::decode(b); });
        if (!reply.is_response()) {
            throw_malformed(0, "CQL reply lacks the response bit");
        }
        return reply;
    }

    cql::Frame query(const std::string &q)
    {
        return request(cql::Opcode::Query, cql::encode_query({q, 0x0001, 0}));
    }

private:
    ProbeSession &session_;
    net::Stream &stream_;
    std::int16_t next_stream_ = 0;
};

bool is(const cql::Frame &f, cql::Opcode op) { return f.opcode == static_cast<std::uint8_t>(op); }

cql::StringMap startup_options() { return {{"CQL_VERSION", "3.0.0"}}; }

std::vector<std::string> first_column(const cql::Rows &rows)
{
    std::vector<std::string> out;
    if (rows.columns.empty()) {
        return out;
    }
    for (const auto &row : rows.rows) {
        if (!row.empty()) {
            out.push_back(cql::cell_text(rows.columns[0].type, row[0]));
        }
    }
    return out;
}

std::string sql_literal(const std::string &s)
{
    std::string out = "'";
    for (char c : s) {
        out += c;
        if (c == '\'') {
            out += '\'';
        }
    }
    return out + "'";
}

} // namespace

ConnStatus check_cassandra(ProbeSession &session, net::Stream &stream)
{
    CqlClient client(session, stream);
    auto supported = client.request(cql::Opcode::Options, {});
    if (!is(supported, cql::Opcode::Supported)) {
        return ConnStatus::TcpOnly;
    }
    auto ready = client.request(cql::Opcode::Startup, cql::encode_string_map(startup_options()));
    if (is(ready, cql::Opcode::Authenticate)) {
        return ConnStatus::AuthRequired;
    }
    return is(ready, cql::Opcode::Ready) || is(ready, cql::Opcode::Error) ? ConnStatus::ProtocolOk
                                                                           : ConnStatus::TcpOnly;
}

Harvest probe_cassandra(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "cassandra";
        auto stream = session.open();
        CqlClient client(session, stream);
        auto supported = client.request(cql::Opcode::Options, {});
        if (is(supported, cql::Opcode::Supported)) {
            for (const auto &[k, values] : cql::decode_string_multimap(supported.body)) {
                std::string joined;
                for (const auto &v : values) {
                    joined += (joined.empty() ? "" : ",") + v;
                }
                h.server_info[k] = joined;
            }
        }
        auto ready = client.request(cql::Opcode::Startup, cql::encode_string_map(startup_options()));
        if (is(ready, cql::Opcode::Authenticate)) {
            h.auth_blocked = true;
            h.server_info["authenticator"] = cql::decode_string(ready.body);
            return;
        }
        if (!is(ready, cql::Opcode::Ready)) {
            if (is(ready, cql::Opcode::Error)) {
                h.server_info["startup_error"] = cql::decode_error(ready.body).message;
            }
            h.notes.push_back("STARTUP not accepted");
            return;
        }
        auto ks_reply = client.query("SELECT keyspace_name FROM system_schema.keyspaces");
        if (!is(ks_reply, cql::Opcode::Result)) {
            auto err = is(ks_reply, cql::Opcode::Error) ? cql::decode_error(ks_reply.body) : cql::ErrorBody{};
            if (err.code == 0x0100 || err.code == 0x2100) {
                h.auth_blocked = true;
                h.server_info["auth_error"] = err.message;
            } else {
                h.notes.push_back("keyspace listing failed: " + err.message);
            }
            return;
        }
        const auto &budget = session.budget();
        auto keyspaces = first_column(cql::decode_result(ks_reply.body).rows);
        bool complete = true;
        for (const auto &ks : detail::user_namespaces(h, ServiceKind::Cassandra, keyspaces, budget.max_namespaces)) {
            NamespaceSample ns{ks, std::nullopt, {}};
            auto tables_reply = client.query(
                "SELECT table_name FROM system_schema.tables WHERE keyspace_name=" + sql_literal(ks));
            if (!is(tables_reply, cql::Opcode::Result)) {
                h.notes.push_back("table listing failed on " + ks);
                complete = false;
                h.namespaces.push_back(std::move(ns));
                continue;
            }
            auto tables = first_column(cql::decode_result(tables_reply.body).rows);
            bool saw_all = true;
            for (const auto &table : tables) {
                std::size_t left = budget.max_samples_per_namespace - ns.samples.size();
                std::string qks = detail::quote_ident(ks, '"');
                std::string qt = detail::quote_ident(table, '"');
                if (left == 0 || qks.empty() || qt.empty()) {
                    saw_all = false;
                    break;
                }
                auto rows_reply = client.query(
                    "SELECT * FROM " + qks + "." + qt + " LIMIT " + std::to_string(left));
                if (!is(rows_reply, cql::Opcode::Result)) {
                    h.notes.push_back("select failed on " + ks + "." + table);
                    saw_all = false;
                    continue;
                }
                auto rows = cql::decode_result(rows_reply.body).rows;
                if (rows.rows.size() >= left) {
                    saw_all = false;
                }
                for (const auto &row : rows.rows) {
                    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
                    obj["_table"] = table;
                    for (std::size_t i = 0; i < row.size() && i < rows.columns.size(); ++i) {
                        obj[rows.columns[i].name] = cql::cell_text(rows.columns[i].type, row[i]);
                    }
                    if (ns.samples.size() < budget.max_samples_per_namespace) {
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
