#include <cstdio>

#include "common.hpp"
#include "exposcan/codec/mysql.hpp"

namespace exposcan {

namespace {

mysql::Packet read_packet(net::Stream &s)
{
    return s.read_frame([](ByteView b) { return mysql::decode_packet(b); });
}

struct QueryResult {
    mysql::ResultSet rows;
    std::optional<mysql::ErrPacket> error;
};

QueryResult run_query(ProbeSession &session, net::Stream &s, const std::string &sql)
{
    session.send(s, mysql::encode_packet({0, mysql::encode_com_query(sql)}));
    QueryResult out;
    auto head = read_packet(s);
    if (mysql::is_err(head.payload)) {
        out.error = mysql::decode_err(head.payload);
        return out;
    }
    if (mysql::is_ok(head.payload)) {
        return out;
    }
    ByteReader r(head.payload);
    auto columns = mysql::get_lenenc_int(r);
    if (columns == 0 || columns > 4096) {
        throw_malformed(0, "bad column count");
    }
    for (std::uint64_t i = 0; i < columns; ++i) {
        out.rows.columns.push_back(mysql::decode_column_name(read_packet(s).payload));
    }
    if (!mysql::is_eof(read_packet(s).payload)) {
        throw_malformed(0, "missing EOF after column definitions");
    }
    for (;;) {
        auto p = read_packet(s);
        if (mysql::is_eof(p.payload)) {
            break;
        }
        if (mysql::is_err(p.payload)) {
            out.error = mysql::decode_err(p.payload);
            break;
        }
        out.rows.rows.push_back(mysql::decode_text_row(p.payload, out.rows.columns.size()));
    }
    return out;
}

std::vector<std::string> first_column(const mysql::ResultSet &rs)
{
    std::vector<std::string> out;
    for (const auto &row : rs.rows) {
        if (!row.empty() && row[0]) {
            out.push_back(*row[0]);
        }
    }
    return out;
}

void record_handshake(Harvest &h, const mysql::Handshake &hs)
{
    char caps[16];
    std::snprintf(caps, sizeof(caps), "0x%08x", hs.capability_flags);
    h.server_info["protocol_version"] = std::to_string(hs.protocol_version);
    h.server_info["version"] = hs.server_version;
    h.server_info["capability_flags"] = caps;
    if (!hs.auth_plugin_name.empty()) {
        h.server_info["auth_plugin"] = hs.auth_plugin_name;
    }
}

} // namespace

ConnStatus check_mysql(ProbeSession &, net::Stream &stream)
{
    auto p = read_packet(stream);
    if (mysql::is_err(p.payload)) {
        mysql::decode_err(p.payload);
        return ConnStatus::ProtocolOk;
    }
    auto hs = mysql::decode_handshake(p.payload);
    return hs.protocol_version == 10 ? ConnStatus::ProtocolOk : ConnStatus::TcpOnly;
}

Harvest probe_mysql(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "mysql";
        auto stream = session.open();
        auto first = read_packet(stream);
        if (mysql::is_err(first.payload)) {
            auto err = mysql::decode_err(first.payload);
            h.server_info["error_code"] = std::to_string(err.code);
            h.server_info["error_message"] = err.message;
            h.notes.push_back("server refused the connection");
            return;
        }
        auto hs = mysql::decode_handshake(first.payload);
        record_handshake(h, hs);
        if (!session.options().try_default_credentials) {
            h.auth_blocked = true;
            h.notes.push_back("login not attempted; default credentials disabled");
            return;
        }
        mysql::HandshakeResponse login;
        login.capability_flags = mysql::cap::kLongPassword | mysql::cap::kProtocol41
            | mysql::cap::kSecureConnection | mysql::cap::kPluginAuth;
        login.max_packet_size = 1u << 24;
        login.character_set = 33;
        login.username = "root";
        login.auth_plugin_name = "mysql_native_password";
        session.send(stream, mysql::encode_packet(
            {static_cast<std::uint8_t>(first.sequence_id + 1), mysql::encode_handshake_response(login)}));
        auto answer = read_packet(stream);
        if (!mysql::is_ok(answer.payload)) {
            h.auth_blocked = true;
            if (mysql::is_err(answer.payload)) {
                auto err = mysql::decode_err(answer.payload);
                h.server_info["login_error"] = std::to_string(err.code) + " " + err.message;
            } else {
                h.server_info["login_error"] = "authentication method switch requested";
            }
            return;
        }
        h.server_info["login"] = "root with empty password";
        auto dbs = run_query(session, stream, "SHOW DATABASES");
        if (dbs.error) {
            h.notes.push_back("SHOW DATABASES failed: " + dbs.error->message);
            return;
        }
        const auto &budget = session.budget();
        bool complete = true;
        for (const auto &db : detail::user_namespaces(h, ServiceKind::MySQL, first_column(dbs.rows), budget.max_namespaces)) {
            NamespaceSample ns{db, std::nullopt, {}};
            std::string qdb = detail::quote_ident(db, '`');
            if (qdb.empty()) {
                h.notes.push_back("skipped unquotable schema name");
                complete = false;
                continue;
            }
            auto tables = run_query(session, stream, "SHOW TABLES FROM " + qdb);
            if (tables.error) {
                h.notes.push_back("SHOW TABLES failed on " + db);
                complete = false;
                h.namespaces.push_back(std::move(ns));
                continue;
            }
            bool saw_all = true;
            for (const auto &table : first_column(tables.rows)) {
                std::size_t left = budget.max_samples_per_namespace - ns.samples.size();
                std::string qt = detail::quote_ident(table, '`');
                if (left == 0 || qt.empty()) {
                    saw_all = false;
                    break;
                }
                auto rows = run_query(session, stream,
                    "SELECT * FROM " + qdb + "." + qt + " LIMIT " + std::to_string(left));
                if (rows.error) {
                    h.notes.push_back("select failed on " + db + "." + table);
                    saw_all = false;
                    continue;
                }
                if (rows.rows.rows.size() >= left) {
                    saw_all = false;
                }
                for (const auto &row : rows.rows.rows) {
                    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
                    obj["_table"] = table;
                    for (std::size_t i = 0; i < row.size() && i < rows.rows.columns.size(); ++i) {
                        obj[rows.rows.columns[i]] = row[i] ? nlohmann::ordered_json(*row[i]) : nlohmann::ordered_json();
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
