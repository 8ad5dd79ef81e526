#include "exposcan/codec/pg.hpp"

#include <cctype>

namespace exposcan::pg {

namespace {

template <typename Fn> auto in_body(Fn &&fn)
{
    try {
        return fn();
    } catch (const DecodeError &e) {
        if (e.truncated()) {
            throw_malformed(e.offset(), std::string("PostgreSQL message body too short: ") + e.what());
        }
        throw;
    }
}

void expect_type(const Message &m, char type)
{
    if (m.type != type) {
        throw_malformed(0, std::string("expected message '") + type + "'");
    }
}

} // namespace

Bytes encode(const Message &m)
{
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(m.type));
    w.i32be(static_cast<std::int32_t>(m.body.size() + 4));
    w.bytes(m.body);
    return w.take();
}

Decoded<Message> decode(ByteView data)
{
    ByteReader r(data);
    Message m;
    m.type = static_cast<char>(r.u8());
    if (!std::isalnum(static_cast<unsigned char>(m.type))) {
        throw_malformed(0, "bad message type byte");
    }
    std::int32_t len = r.i32be();
    if (len < 4 || static_cast<std::size_t>(len) > kMaxMessageSize) {
        throw_malformed(1, "bad message length");
    }
    auto body = r.bytes(static_cast<std::size_t>(len) - 4);
    m.body.assign(body.begin(), body.end());
    return {std::move(m), 1 + static_cast<std::size_t>(len)};
}

Bytes encode_startup(const Startup &s)
{
    ByteWriter w;
    w.i32be(0);
    w.i32be(s.protocol);
    for (const auto &[k, v] : s.params) {
        w.cstring(k);
        w.cstring(v);
    }
    w.u8(0);
    w.patch_u32be(0, static_cast<std::uint32_t>(w.size()));
    return w.take();
}

Decoded<Startup> decode_startup(ByteView data)
{
    ByteReader head(data);
    std::int32_t len = head.i32be();
    if (len < 9 || len > 10000) {
        throw_malformed(0, "bad startup length");
    }
    auto size = static_cast<std::size_t>(len);
    if (data.size() < size) {
        throw_truncated(data.size(), "startup message incomplete");
    }
    return in_body([&] {
        ByteReader r(data.subspan(4, size - 4), 4);
        Startup s;
        s.protocol = r.i32be();
        for (;;) {
            std::string key = r.cstring();
            if (key.empty()) {
                break;
            }
            s.params.emplace_back(std::move(key), r.cstring());
        }
        if (!r.at_end()) {
            throw_malformed(r.absolute(), "trailing bytes after startup parameters");
        }
        return Decoded<Startup>{std::move(s), size};
    });
}

Message make_authentication(const Authentication &a)
{
    ByteWriter w;
    w.i32be(a.code);
    w.bytes(a.extra);
    return {'R', w.take()};
}

Authentication parse_authentication(const Message &m)
{
    expect_type(m, 'R');
    return in_body([&] {
        ByteReader r(m.body);
        Authentication a;
        a.code = r.i32be();
        auto rest = r.rest();
        a.extra.assign(rest.begin(), rest.end());
        return a;
    });
}

Message make_error(const Fields &fields)
{
    ByteWriter w;
    for (const auto &[code, value] : fields) {
        w.u8(static_cast<std::uint8_t>(code));
        w.cstring(value);
    }
    w.u8(0);
    return {'E', w.take()};
}

Fields parse_error(const Message &m)
{
    if (m.type != 'E' && m.type != 'N') {
        throw_malformed(0, "expected an error or notice message");
    }
    return in_body([&] {
        ByteReader r(m.body);
        Fields out;
        for (;;) {
            std::uint8_t code = r.u8();
            if (code == 0) {
                break;
            }
            out.emplace_back(static_cast<char>(code), r.cstring());
        }
        return out;
    });
}

Message make_parameter_status(const std::string &name, const std::string &value)
{
    ByteWriter w;
    w.cstring(name);
    w.cstring(value);
    return {'S', w.take()};
}

std::pair<std::string, std::string> parse_parameter_status(const Message &m)
{
    expect_type(m, 'S');
    return in_body([&] {
        ByteReader r(m.body);
        std::string k = r.cstring();
        return std::make_pair(std::move(k), r.cstring());
    });
}

Message make_query(const std::string &sql)
{
    ByteWriter w;
    w.cstring(sql);
    return {'Q', w.take()};
}

std::string parse_query(const Message &m)
{
    expect_type(m, 'Q');
    return in_body([&] {
        ByteReader r(m.body);
        return r.cstring();
    });
}

Message make_ready_for_query(char status)
{
    return {'Z', Bytes{static_cast<std::uint8_t>(status)}};
}

Message make_command_complete(const std::string &tag)
{
    ByteWriter w;
    w.cstring(tag);
    return {'C', w.take()};
}

Message make_row_description(const std::vector<Column> &columns)
{
    ByteWriter w;
    w.i16be(static_cast<std::int16_t>(columns.size()));
    for (const auto &c : columns) {
        w.cstring(c.name);
        w.i32be(0);  // table oid
        w.i16be(0);  // attribute number
        w.i32be(c.type_oid);
        w.i16be(-1); // type size
        w.i32be(-1); // type modifier
        w.i16be(0);  // text format
    }
    return {'T', w.take()};
}

std::vector<Column> parse_row_description(const Message &m)
{
    expect_type(m, 'T');
    return in_body([&] {
        ByteReader r(m.body);
        std::int16_t n = r.i16be();
        if (n < 0) {
            throw_malformed(0, "negative field count");
        }
        std::vector<Column> out;
        for (std::int16_t i = 0; i < n; ++i) {
            Column c;
            c.name = r.cstring();
            r.i32be();
            r.i16be();
            c.type_oid = r.i32be();
            r.i16be();
            r.i32be();
            r.i16be();
            out.push_back(std::move(c));
        }
        return out;
    });
}

Message make_data_row(const Row &row)
{
    ByteWriter w;
    w.i16be(static_cast<std::int16_t>(row.size()));
    for (const auto &cell : row) {
        if (!cell) {
            w.i32be(-1);
        } else {
            w.i32be(static_cast<std::int32_t>(cell->size()));
            w.str(*cell);
        }
    }
    return {'D', w.take()};
}

Row parse_data_row(const Message &m)
{
    expect_type(m, 'D');
    return in_body([&] {
        ByteReader r(m.body);
        std::int16_t n = r.i16be();
        if (n < 0) {
            throw_malformed(0, "negative column count");
        }
        Row row;
        for (std::int16_t i = 0; i < n; ++i) {
            std::int32_t len = r.i32be();
            if (len < 0) {
                row.emplace_back(std::nullopt);
            } else {
                row.emplace_back(r.str(static_cast<std::size_t>(len)));
            }
        }
        return row;
    });
}

} // namespace exposcan::pg
