#include <charconv>

#include "emulator.hpp"
#include "exposcan/allowlist.hpp"
#include "exposcan/codec/cql.hpp"
#include "exposcan/codec/mysql.hpp"
#include "exposcan/codec/pg.hpp"

namespace exposcan::fleet::detail {

namespace {

// SELECT * FROM <a>.<b> LIMIT <n>, with identifiers optionally quoted.
struct TableSelect {
    std::string schema;
    std::string table;
    std::size_t limit = 0;
};

std::size_t read_ident(std::string_view s, std::size_t at, std::string &out)
{
    if (at < s.size() && (s[at] == '"' || s[at] == '`')) {
        char q = s[at];
        std::size_t i = at + 1;
        for (; i < s.size(); ++i) {
            if (s[i] == q) {
                if (i + 1 < s.size() && s[i + 1] == q) {
                    ++i;
                    continue;
                }
                break;
            }
        }
        if (i >= s.size()) {
            return std::string_view::npos;
        }
        out = unquote(s.substr(at, i - at + 1));
        return i + 1;
    }
    std::size_t i = at;
    while (i < s.size() && s[i] != '.' && s[i] != ' ') {
        ++i;
    }
    out = std::string(s.substr(at, i - at));
    return i == at ? std::string_view::npos : i;
}

std::optional<TableSelect> parse_table_select(std::string_view sql)
{
    constexpr std::string_view head = "SELECT * FROM ";
    if (upper(sql.substr(0, head.size())) != head) {
        return std::nullopt;
    }
    TableSelect out;
    std::size_t at = read_ident(sql, head.size(), out.schema);
    if (at == std::string_view::npos || at >= sql.size() || sql[at] != '.') {
        return std::nullopt;
    }
    at = read_ident(sql, at + 1, out.table);
    constexpr std::string_view tail = " LIMIT ";
    if (at == std::string_view::npos || upper(sql.substr(at, tail.size())) != tail) {
        return std::nullopt;
    }
    std::string_view n = sql.substr(at + tail.size());
    auto [p, ec] = std::from_chars(n.data(), n.data() + n.size(), out.limit);
    if (ec != std::errc() || p != n.data() + n.size()) {
        return std::nullopt;
    }
    return out;
}

std::optional<std::size_t> trailing_limit(std::string_view sql)
{
    auto pos = upper(sql).rfind(" LIMIT ");
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    std::string_view n = sql.substr(pos + 7);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(n.data(), n.data() + n.size(), v);
    if (ec != std::errc() || p != n.data() + n.size()) {
        return std::nullopt;
    }
    return v;
}

const DataTable *find_table(const Context &ctx, const std::string &ns_name, const std::string &table)
{
    const DataNamespace *ns = ctx.find(ns_name);
    if (ns == nullptr) {
        return nullptr;
    }
    for (const auto &t : ns->tables) {
        if (t.name == table) {
            return &t;
        }
    }
    return nullptr;
}

std::vector<std::string> columns_of(const DataTable &t)
{
    std::vector<std::string> cols;
    for (const auto &r : t.rows) {
        for (const auto &[k, v] : r) {
            if (std::find(cols.begin(), cols.end(), k) == cols.end()) {
                cols.push_back(k);
            }
        }
    }
    if (cols.empty()) {
        cols.push_back("id");
    }
    return cols;
}

std::optional<std::string> cell(const DataRecord &r, const std::string &col)
{
    for (const auto &[k, v] : r) {
        if (k == col) {
            return v;
        }
    }
    return std::nullopt;
}

// ---- Cassandra

cql::Frame cql_reply(const cql::Frame &req, cql::Opcode op, Bytes body)
{
    cql::Frame f;
    f.version = cql::kResponseVersion;
    f.stream = req.stream;
    f.opcode = static_cast<std::uint8_t>(op);
    f.body = std::move(body);
    return f;
}

cql::Frame cql_error(const cql::Frame &req, std::int32_t code, const std::string &msg)
{
    return cql_reply(req, cql::Opcode::Error, cql::encode_error({code, msg}));
}

cql::Frame cql_rows(const cql::Frame &req, const std::string &ks, const std::string &table,
    const std::vector<std::string> &columns, const std::vector<std::vector<std::optional<std::string>>> &rows)
{
    cql::Result r;
    r.kind = cql::ResultKind::Rows;
    r.rows.keyspace = ks;
    r.rows.table = table;
    for (const auto &c : columns) {
        r.rows.columns.push_back({c, static_cast<std::uint16_t>(cql::ColumnType::Varchar)});
    }
    for (const auto &row : rows) {
        std::vector<cql::Cell> cells;
        for (const auto &c : row) {
            cells.push_back(c ? cql::text_cell(*c) : cql::Cell{});
        }
        r.rows.rows.push_back(std::move(cells));
    }
    return cql_reply(req, cql::Opcode::Result, cql::encode_result(r));
}

std::optional<std::string> quoted_literal(std::string_view sql, std::string_view after)
{
    auto pos = sql.find(after);
    if (pos == std::string_view::npos) {
        return std::nullopt;
    }
    std::size_t i = pos + after.size();
    if (i >= sql.size() || sql[i] != '\'') {
        return std::nullopt;
    }
    std::string out;
    for (++i; i < sql.size(); ++i) {
        if (sql[i] == '\'') {
            if (i + 1 < sql.size() && sql[i + 1] == '\'') {
                out += '\'';
                ++i;
                continue;
            }
            return out;
        }
        out += sql[i];
    }
    return std::nullopt;
}

cql::Frame cql_query(const Context &ctx, const cql::Frame &req, const std::string &q)
{
    std::string up = upper(q);
    if (up == "SELECT KEYSPACE_NAME FROM SYSTEM_SCHEMA.KEYSPACES") {
        std::vector<std::vector<std::optional<std::string>>> rows;
        for (const auto *ns : ctx.visible()) {
            rows.push_back({ns->name});
        }
        return cql_rows(req, "system_schema", "keyspaces", {"keyspace_name"}, rows);
    }
    if (up.rfind("SELECT TABLE_NAME FROM SYSTEM_SCHEMA.TABLES WHERE KEYSPACE_NAME=", 0) == 0) {
        auto ks = quoted_literal(q, "=");
        std::vector<std::vector<std::optional<std::string>>> rows;
        const DataNamespace *ns = ks ? ctx.find(*ks) : nullptr;
        if (ns != nullptr) {
            for (const auto &t : ns->tables) {
                rows.push_back({t.name});
            }
        }
        return cql_rows(req, "system_schema", "tables", {"table_name"}, rows);
    }
    if (auto sel = parse_table_select(q)) {
        const DataTable *t = find_table(ctx, sel->schema, sel->table);
        if (t == nullptr) {
            return cql_error(req, 0x2200, "unconfigured table " + sel->table);
        }
        auto cols = columns_of(*t);
        std::vector<std::vector<std::optional<std::string>>> rows;
        for (const auto &r : t->rows) {
            if (rows.size() >= sel->limit) {
                break;
            }
            std::vector<std::optional<std::string>> row;
            for (const auto &c : cols) {
                row.push_back(cell(r, c));
            }
            rows.push_back(std::move(row));
        }
        return cql_rows(req, sel->schema, sel->table, cols, rows);
    }
    return cql_error(req, 0x2000, "line 1:0 no viable alternative at input");
}

} // namespace

void serve_cassandra(Context &ctx, Peer &peer)
{
    bool ready = false;
    for (;;) {
        auto f = peer.next([](ByteView b) { return cql::decode(b); },
            [](const cql::Frame &frame) { return describe_cql(frame); });
        if (!f) {
            return;
        }
        if (f->is_response()) {
            peer.send(cql::encode(cql_error(*f, 0x000A, "expected a request frame")));
            return;
        }
        cql::Frame reply;
        switch (static_cast<cql::Opcode>(f->opcode)) {
        case cql::Opcode::Options:
            reply = cql_reply(*f, cql::Opcode::Supported,
                cql::encode_string_multimap({{"CQL_VERSION", {"3.4.6"}}, {"COMPRESSION", {"snappy", "lz4"}},
                    {"PROTOCOL_VERSIONS", {"3/v3", "4/v4", "5/v5-beta"}}}));
            break;
        case cql::Opcode::Startup:
            if (ctx.data.requires_auth) {
                reply = cql_reply(*f, cql::Opcode::Authenticate,
                    cql::encode_string("org.apache.cassandra.auth.PasswordAuthenticator"));
            } else {
                ready = true;
                reply = cql_reply(*f, cql::Opcode::Ready, {});
            }
            break;
        case cql::Opcode::Query:
            if (!ready) {
                reply = cql_error(*f, 0x000A, "STARTUP has not been sent");
            } else {
                reply = cql_query(ctx, *f, cql::decode_query(f->body).query);
            }
            break;
        default: reply = cql_error(*f, 0x000A, "unsupported opcode"); break;
        }
        peer.send(cql::encode(reply));
    }
}

// ---- MySQL

namespace {

Bytes scramble(std::uint64_t seed)
{
    Bytes out(20);
    std::uint64_t x = seed * 6364136223846793005ULL + 1442695040888963407ULL;
    for (auto &b : out) {
        x = x * 6364136223846793005ULL + 1442695040888963407ULL;
        b = static_cast<std::uint8_t>(0x21 + (x >> 33) % 0x5e);
    }
    return out;
}

void send_packets(Peer &peer, std::uint8_t first_seq, const std::vector<Bytes> &payloads)
{
    Bytes out;
    std::uint8_t seq = first_seq;
    for (const auto &p : payloads) {
        auto framed = mysql::encode_packet({seq++, p});
        out.insert(out.end(), framed.begin(), framed.end());
    }
    peer.send(out);
}

Bytes mysql_error(std::uint16_t code, const std::string &state, const std::string &msg)
{
    return mysql::encode_err({code, state, msg});
}

std::vector<Bytes> mysql_query(const Context &ctx, const std::string &sql)
{
    std::string up = upper(sql);
    mysql::ResultSet rs;
    if (up == "SHOW DATABASES") {
        rs.columns = {"Database"};
        for (const auto *ns : ctx.visible()) {
            rs.rows.push_back({ns->name});
        }
        return mysql::encode_text_resultset(rs);
    }
    if (up.rfind("SHOW TABLES FROM ", 0) == 0) {
        std::string db = unquote(std::string_view(sql).substr(17));
        const DataNamespace *ns = ctx.find(db);
        if (ns == nullptr) {
            return {mysql_error(1049, "42000", "Unknown database '" + db + "'")};
        }
        rs.columns = {"Tables_in_" + db};
        for (const auto &t : ns->tables) {
            rs.rows.push_back({t.name});
        }
        return mysql::encode_text_resultset(rs);
    }
    if (auto sel = parse_table_select(sql)) {
        const DataTable *t = find_table(ctx, sel->schema, sel->table);
        if (t == nullptr) {
            return {mysql_error(1146, "42S02", "Table '" + sel->schema + "." + sel->table + "' doesn't exist")};
        }
        rs.columns = columns_of(*t);
        for (const auto &r : t->rows) {
            if (rs.rows.size() >= sel->limit) {
                break;
            }
            mysql::Row row;
            for (const auto &c : rs.columns) {
                row.push_back(cell(r, c));
            }
            rs.rows.push_back(std::move(row));
        }
        return mysql::encode_text_resultset(rs);
    }
    return {mysql_error(1064, "42000", "You have an error in your SQL syntax")};
}

} // namespace

void serve_mysql(Context &ctx, Peer &peer)
{
    mysql::Handshake hs;
    hs.server_version = ctx.data.version;
    hs.connection_id = static_cast<std::uint32_t>(ctx.instance_id + 8);
    hs.auth_plugin_data = scramble(ctx.seed);
    hs.capability_flags = mysql::cap::kLongPassword | mysql::cap::kConnectWithDb | mysql::cap::kProtocol41
        | mysql::cap::kSecureConnection | mysql::cap::kPluginAuth | mysql::cap::kPluginAuthLenencData;
    hs.character_set = 255;
    hs.status_flags = 0x0002;
    hs.auth_plugin_name = "mysql_native_password";
    peer.send(mysql::encode_packet({0, mysql::encode_handshake(hs)}));

    auto login = peer.next([](ByteView b) { return mysql::decode_packet(b); },
        [](const mysql::Packet &p) { return describe_mysql_login(mysql::decode_handshake_response(p.payload).username); });
    if (!login) {
        return;
    }
    auto seq = static_cast<std::uint8_t>(login->sequence_id + 1);
    std::optional<mysql::HandshakeResponse> resp;
    try {
        resp = mysql::decode_handshake_response(login->payload);
    } catch (const DecodeError &) {
    }
    if (!resp || ctx.data.requires_auth || resp->username != "root" || !resp->auth_response.empty()) {
        std::string user = resp ? resp->username : std::string("unknown");
        send_packets(peer, seq, {mysql_error(1045, "28000",
            "Access denied for user '" + user + "'@'localhost' (using password: NO)")});
        return;
    }
    send_packets(peer, seq, {mysql::encode_ok()});

    for (;;) {
        auto p = peer.next([](ByteView b) { return mysql::decode_packet(b); },
            [](const mysql::Packet &pkt) { return describe_mysql_command(pkt.payload); });
        if (!p) {
            return;
        }
        if (p->payload.size() == 1 && p->payload[0] == mysql::kComQuit) {
            return;
        }
        auto sql = mysql::decode_com_query(p->payload);
        if (!sql) {
            send_packets(peer, 1, {mysql_error(1047, "08S01", "Unknown command")});
            continue;
        }
        send_packets(peer, 1, mysql_query(ctx, *sql));
    }
}

// ---- PostgreSQL

namespace {

Bytes pg_bytes(const std::vector<pg::Message> &msgs)
{
    Bytes out;
    for (const auto &m : msgs) {
        auto b = pg::encode(m);
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

pg::Message pg_error(const std::string &severity, const std::string &code, const std::string &msg)
{
    return pg::make_error({{'S', severity}, {'V', severity}, {'C', code}, {'M', msg}});
}

std::vector<pg::Message> pg_rows(const std::vector<std::string> &columns, const std::vector<pg::Row> &rows)
{
    std::vector<pg::Column> cols;
    for (const auto &c : columns) {
        cols.push_back({c, 25});
    }
    std::vector<pg::Message> out = {pg::make_row_description(cols)};
    for (const auto &r : rows) {
        out.push_back(pg::make_data_row(r));
    }
    out.push_back(pg::make_command_complete("SELECT " + std::to_string(rows.size())));
    return out;
}

std::vector<pg::Message> pg_query(const Context &ctx, const std::string &database, const std::string &sql)
{
    std::string up = upper(sql);
    auto limit = trailing_limit(sql);
    if (up.rfind("SELECT DATNAME FROM PG_DATABASE", 0) == 0) {
        std::vector<pg::Row> rows;
        for (const auto *ns : ctx.visible()) {
            if (!limit || rows.size() < *limit) {
                rows.push_back({ns->name});
            }
        }
        return pg_rows({"datname"}, rows);
    }
    if (up.rfind("SELECT TABLE_SCHEMA, TABLE_NAME FROM INFORMATION_SCHEMA.TABLES", 0) == 0) {
        std::vector<pg::Row> rows;
        if (const DataNamespace *ns = ctx.find(database)) {
            for (const auto &t : ns->tables) {
                if (!limit || rows.size() < *limit) {
                    rows.push_back({std::string("public"), t.name});
                }
            }
        }
        return pg_rows({"table_schema", "table_name"}, rows);
    }
    if (auto sel = parse_table_select(sql)) {
        const DataTable *t = sel->schema == "public" ? find_table(ctx, database, sel->table) : nullptr;
        if (t == nullptr) {
            return {pg_error("ERROR", "42P01", "relation \"" + sel->schema + "." + sel->table + "\" does not exist")};
        }
        auto cols = columns_of(*t);
        std::vector<pg::Row> rows;
        for (const auto &r : t->rows) {
            if (rows.size() >= sel->limit) {
                break;
            }
            pg::Row row;
            for (const auto &c : cols) {
                row.push_back(cell(r, c));
            }
            rows.push_back(std::move(row));
        }
        return pg_rows(cols, rows);
    }
    return {pg_error("ERROR", "42601", "syntax error at or near \"" + sql.substr(0, sql.find(' ')) + "\"")};
}

} // namespace

void serve_postgres(Context &ctx, Peer &peer)
{
    auto start = peer.next([](ByteView b) { return pg::decode_startup(b); },
        [](const pg::Startup &s) { return describe_pg_startup(s); });
    if (!start) {
        return;
    }
    if (start->protocol != pg::kProtocol30) {
        peer.send(pg_bytes({pg_error("FATAL", "0A000", "unsupported frontend protocol")}));
        return;
    }
    std::string database = "postgres";
    std::string user;
    for (const auto &[k, v] : start->params) {
        if (k == "database") {
            database = v;
        } else if (k == "user") {
            user = v;
        }
    }
    if (ctx.data.requires_auth) {
        std::string mechs("SCRAM-SHA-256\0\0", 15);
        Bytes extra(mechs.begin(), mechs.end());
        peer.send(pg_bytes({pg::make_authentication({static_cast<std::int32_t>(pg::AuthCode::Sasl), extra})}));
        peer.drain();
        return;
    }
    if (ctx.find(database) == nullptr) {
        peer.send(pg_bytes({pg_error("FATAL", "3D000", "database \"" + database + "\" does not exist")}));
        return;
    }
    peer.send(pg_bytes({pg::make_authentication({0, {}}), pg::make_parameter_status("server_version", ctx.data.version),
        pg::make_parameter_status("server_encoding", "UTF8"), pg::make_parameter_status("client_encoding", "UTF8"),
        pg::make_ready_for_query('I')}));
    for (;;) {
        auto m = peer.next([](ByteView b) { return pg::decode(b); },
            [](const pg::Message &msg) { return describe_pg(msg); });
        if (!m || m->type == 'X') {
            return;
        }
        std::vector<pg::Message> reply;
        if (m->type == 'Q') {
            reply = pg_query(ctx, database, pg::parse_query(*m));
        } else {
            reply = {pg_error("ERROR", "08P01", std::string("unsupported message type ") + m->type)};
        }
        reply.push_back(pg::make_ready_for_query('I'));
        peer.send(pg_bytes(reply));
    }
}

} // namespace exposcan::fleet::detail
