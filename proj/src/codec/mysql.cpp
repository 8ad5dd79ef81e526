#include "exposcan/codec/mysql.hpp"

namespace exposcan::mysql {

namespace {

template <typename Fn> auto in_payload(Fn &&fn)
{
    try {
        return fn();
    } catch (const DecodeError &e) {
        if (e.truncated()) {
            throw_malformed(e.offset(), std::string("MySQL payload too short: ") + e.what());
        }
        throw;
    }
}

void put_lenenc_string(ByteWriter &w, const std::string &s)
{
    put_lenenc_int(w, s.size());
    w.str(s);
}

std::string get_lenenc_string(ByteReader &r)
{
    std::uint64_t n = get_lenenc_int(r);
    if (n > r.remaining()) {
        throw_malformed(r.absolute(), "length-encoded string overruns packet");
    }
    return r.str(static_cast<std::size_t>(n));
}

} // namespace

void put_lenenc_int(ByteWriter &w, std::uint64_t v)
{
    if (v < 251) {
        w.u8(static_cast<std::uint8_t>(v));
    } else if (v < (1u << 16)) {
        w.u8(0xFC);
        w.u16le(static_cast<std::uint16_t>(v));
    } else if (v < (1u << 24)) {
        w.u8(0xFD);
        w.u24le(static_cast<std::uint32_t>(v));
    } else {
        w.u8(0xFE);
        w.u64le(v);
    }
}

std::uint64_t get_lenenc_int(ByteReader &r)
{
    std::uint8_t first = r.u8();
    switch (first) {
    case 0xFB: throw_malformed(r.absolute(), "NULL where an integer was expected");
    case 0xFC: return r.u16le();
    case 0xFD: return r.u24le();
    case 0xFE: return r.u64le();
    case 0xFF: throw_malformed(r.absolute(), "0xFF is not a length-encoded integer");
    default: return first;
    }
}

Bytes encode_packet(const Packet &p)
{
    ByteWriter w;
    w.u24le(static_cast<std::uint32_t>(p.payload.size()));
    w.u8(p.sequence_id);
    w.bytes(p.payload);
    return w.take();
}

Decoded<Packet> decode_packet(ByteView data)
{
    ByteReader r(data);
    std::uint32_t len = r.u24le();
    Packet p;
    p.sequence_id = r.u8();
    auto body = r.bytes(len);
    p.payload.assign(body.begin(), body.end());
    return {std::move(p), 4 + static_cast<std::size_t>(len)};
}

Bytes encode_handshake(const Handshake &h)
{
    bool secure = (h.capability_flags & cap::kSecureConnection) != 0;
    bool plugin = (h.capability_flags & cap::kPluginAuth) != 0;
    std::size_t expected = secure ? 20 : 8;
    if (h.auth_plugin_data.size() != expected) {
        throw std::invalid_argument("handshake scramble must be " + std::to_string(expected) + " bytes");
    }
    ByteWriter w;
    w.u8(h.protocol_version);
    w.cstring(h.server_version);
    w.u32le(h.connection_id);
    w.bytes(ByteView(h.auth_plugin_data).first(8));
    w.u8(0);
    w.u16le(static_cast<std::uint16_t>(h.capability_flags & 0xFFFF));
    w.u8(h.character_set);
    w.u16le(h.status_flags);
    w.u16le(static_cast<std::uint16_t>(h.capability_flags >> 16));
    w.u8(plugin ? static_cast<std::uint8_t>(h.auth_plugin_data.size() + 1) : 0);
    for (int i = 0; i < 10; ++i) {
        w.u8(0);
    }
    if (secure) {
        w.bytes(ByteView(h.auth_plugin_data).subspan(8));
        w.u8(0);
    }
    if (plugin) {
        w.cstring(h.auth_plugin_name);
    }
    return w.take();
}

Handshake decode_handshake(ByteView payload)
{
    return in_payload([&] {
        ByteReader r(payload);
        Handshake h;
        h.protocol_version = r.u8();
        if (h.protocol_version == 0xFF) {
            throw_malformed(0, "server sent an error instead of a handshake");
        }
        if (h.protocol_version != 10) {
            throw_malformed(0, "unsupported handshake protocol version");
        }
        h.server_version = r.cstring();
        h.connection_id = r.u32le();
        auto part1 = r.bytes(8);
        h.auth_plugin_data.assign(part1.begin(), part1.end());
        r.u8(); // filler
        h.capability_flags = r.u16le();
        if (r.at_end()) {
            return h;
        }
        h.character_set = r.u8();
        h.status_flags = r.u16le();
        h.capability_flags |= static_cast<std::uint32_t>(r.u16le()) << 16;
        std::uint8_t data_len = r.u8();
        r.skip(10);
        if ((h.capability_flags & cap::kSecureConnection) != 0) {
            std::size_t n = std::max<std::size_t>(13, data_len > 8 ? data_len - 8u : 0u);
            auto part2 = r.bytes(n);
            std::size_t keep = (part2.back() == 0) ? n - 1 : n;
            h.auth_plugin_data.insert(h.auth_plugin_data.end(), part2.begin(),
                part2.begin() + static_cast<std::ptrdiff_t>(keep));
        }
        if ((h.capability_flags & cap::kPluginAuth) != 0) {
            // Some servers omit the final NUL.
            try {
                h.auth_plugin_name = r.cstring();
            } catch (const DecodeError &) {
                h.auth_plugin_name = to_string(r.rest());
            }
        }
        return h;
    });
}

Bytes encode_handshake_response(const HandshakeResponse &resp)
{
    ByteWriter w;
    w.u32le(resp.capability_flags);
    w.u32le(resp.max_packet_size);
    w.u8(resp.character_set);
    for (int i = 0; i < 23; ++i) {
        w.u8(0);
    }
    w.cstring(resp.username);
    if ((resp.capability_flags & cap::kPluginAuthLenencData) != 0) {
        put_lenenc_int(w, resp.auth_response.size());
        w.bytes(resp.auth_response);
    } else {
        w.u8(static_cast<std::uint8_t>(resp.auth_response.size()));
        w.bytes(resp.auth_response);
    }
    if ((resp.capability_flags & cap::kConnectWithDb) != 0) {
        w.cstring(resp.database.value_or(""));
    }
    if ((resp.capability_flags & cap::kPluginAuth) != 0) {
        w.cstring(resp.auth_plugin_name);
    }
    return w.take();
}

HandshakeResponse decode_handshake_response(ByteView payload)
{
    return in_payload([&] {
        ByteReader r(payload);
        HandshakeResponse resp;
        resp.capability_flags = r.u32le();
        if ((resp.capability_flags & cap::kProtocol41) == 0) {
            throw_malformed(0, "pre-4.1 handshake response");
        }
        resp.max_packet_size = r.u32le();
        resp.character_set = r.u8();
        r.skip(23);
        resp.username = r.cstring();
        std::uint64_t n = (resp.capability_flags & cap::kPluginAuthLenencData) != 0
            ? get_lenenc_int(r)
            : r.u8();
        if (n > r.remaining()) {
            throw_malformed(r.absolute(), "auth response overruns packet");
        }
        auto auth = r.bytes(static_cast<std::size_t>(n));
        resp.auth_response.assign(auth.begin(), auth.end());
        if ((resp.capability_flags & cap::kConnectWithDb) != 0) {
            resp.database = r.cstring();
        }
        if ((resp.capability_flags & cap::kPluginAuth) != 0) {
            resp.auth_plugin_name = r.cstring();
        }
        return resp;
    });
}

Bytes encode_ok()
{
    ByteWriter w;
    w.u8(0x00);
    put_lenenc_int(w, 0);
    put_lenenc_int(w, 0);
    w.u16le(0x0002); // SERVER_STATUS_AUTOCOMMIT
    w.u16le(0);
    return w.take();
}

Bytes encode_eof()
{
    ByteWriter w;
    w.u8(0xFE);
    w.u16le(0);
    w.u16le(0x0002);
    return w.take();
}

Bytes encode_err(const ErrPacket &e)
{
    ByteWriter w;
    w.u8(0xFF);
    w.u16le(e.code);
    w.u8('#');
    std::string state = e.sql_state;
    state.resize(5, '0');
    w.str(state);
    w.str(e.message);
    return w.take();
}

ErrPacket decode_err(ByteView payload)
{
    return in_payload([&] {
        ByteReader r(payload);
        if (r.u8() != 0xFF) {
            throw_malformed(0, "not an ERR packet");
        }
        ErrPacket e;
        e.code = r.u16le();
        if (!r.at_end() && payload[r.position()] == '#') {
            r.u8();
            e.sql_state = r.str(5);
        } else {
            e.sql_state.clear();
        }
        e.message = to_string(r.rest());
        return e;
    });
}

Bytes encode_com_query(const std::string &sql)
{
    ByteWriter w;
    w.u8(kComQuery);
    w.str(sql);
    return w.take();
}

std::optional<std::string> decode_com_query(ByteView payload)
{
    if (payload.empty() || payload[0] != kComQuery) {
        return std::nullopt;
    }
    return std::string(payload.begin() + 1, payload.end());
}

Bytes encode_column_definition(const std::string &name)
{
    ByteWriter w;
    put_lenenc_string(w, "def");
    put_lenenc_string(w, "");
    put_lenenc_string(w, "");
    put_lenenc_string(w, "");
    put_lenenc_string(w, name);
    put_lenenc_string(w, name);
    put_lenenc_int(w, 0x0C);
    w.u16le(33);     // utf8_general_ci
    w.u32le(1024);   // column length
    w.u8(0xFD);      // VAR_STRING
    w.u16le(0);
    w.u8(0);
    w.u16le(0);
    return w.take();
}

std::string decode_column_name(ByteView payload)
{
    return in_payload([&] {
        ByteReader r(payload);
        for (int i = 0; i < 4; ++i) {
            get_lenenc_string(r);
        }
        return get_lenenc_string(r);
    });
}

Row decode_text_row(ByteView payload, std::size_t columns)
{
    return in_payload([&] {
        ByteReader r(payload);
        Row row;
        for (std::size_t i = 0; i < columns; ++i) {
            if (!r.at_end() && payload[r.position()] == 0xFB) {
                r.u8();
                row.emplace_back(std::nullopt);
            } else {
                row.emplace_back(get_lenenc_string(r));
            }
        }
        if (!r.at_end()) {
            throw_malformed(r.absolute(), "trailing bytes after row");
        }
        return row;
    });
}

std::vector<Bytes> encode_text_resultset(const ResultSet &rs)
{
    std::vector<Bytes> out;
    ByteWriter count;
    put_lenenc_int(count, rs.columns.size());
    out.push_back(count.take());
    for (const auto &c : rs.columns) {
        out.push_back(encode_column_definition(c));
    }
    out.push_back(encode_eof());
    for (const auto &row : rs.rows) {
        ByteWriter w;
        for (const auto &cell : row) {
            if (!cell) {
                w.u8(0xFB);
            } else {
                put_lenenc_string(w, *cell);
            }
        }
        out.push_back(w.take());
    }
    out.push_back(encode_eof());
    return out;
}

} // namespace exposcan::mysql
