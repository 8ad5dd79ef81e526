#include "exposcan/codec/cql.hpp"

#include <bit>

namespace exposcan::cql {

namespace {

// Body readers operate on complete frames, so a short body is malformed.
template <typename Fn> auto in_body(Fn &&fn)
{
    try {
        return fn();
    } catch (const DecodeError &e) {
        if (e.truncated()) {
            throw_malformed(e.offset(), std::string("CQL body too short: ") + e.what());
        }
        throw;
    }
}

void put_string(ByteWriter &w, const std::string &s)
{
    w.u16be(static_cast<std::uint16_t>(s.size()));
    w.str(s);
}

std::string get_string(ByteReader &r) { return r.str(r.u16be()); }

void put_long_string(ByteWriter &w, const std::string &s)
{
    w.i32be(static_cast<std::int32_t>(s.size()));
    w.str(s);
}

std::string get_long_string(ByteReader &r)
{
    std::int32_t n = r.i32be();
    if (n < 0 || static_cast<std::size_t>(n) > r.remaining()) {
        throw_malformed(r.absolute(), "bad long string length");
    }
    return r.str(static_cast<std::size_t>(n));
}

} // namespace

Bytes encode(const Frame &f)
{
    ByteWriter w;
    w.u8(f.version);
    w.u8(f.flags);
    w.i16be(f.stream);
    w.u8(f.opcode);
    w.u32be(static_cast<std::uint32_t>(f.body.size()));
    w.bytes(f.body);
    return w.take();
}

Decoded<Frame> decode(ByteView data)
{
    ByteReader r(data);
    Frame f;
    f.version = r.u8();
    std::uint8_t v = f.version & 0x7F;
    if (v < 3 || v > 5) {
        throw_malformed(0, "unsupported CQL protocol version");
    }
    f.flags = r.u8();
    f.stream = r.i16be();
    f.opcode = r.u8();
    if (f.opcode > 0x10) {
        throw_malformed(4, "unknown CQL opcode");
    }
    std::uint32_t len = r.u32be();
    if (len > kMaxBodySize) {
        throw_malformed(5, "CQL body too large");
    }
    auto body = r.bytes(len);
    f.body.assign(body.begin(), body.end());
    return {std::move(f), kHeaderSize + len};
}

Bytes encode_string_map(const StringMap &m)
{
    ByteWriter w;
    w.u16be(static_cast<std::uint16_t>(m.size()));
    for (const auto &[k, v] : m) {
        put_string(w, k);
        put_string(w, v);
    }
    return w.take();
}

StringMap decode_string_map(ByteView body)
{
    return in_body([&] {
        ByteReader r(body);
        StringMap out;
        std::uint16_t n = r.u16be();
        for (std::uint16_t i = 0; i < n; ++i) {
            std::string k = get_string(r);
            out.emplace_back(std::move(k), get_string(r));
        }
        return out;
    });
}

Bytes encode_string_multimap(const StringMultimap &m)
{
    ByteWriter w;
    w.u16be(static_cast<std::uint16_t>(m.size()));
    for (const auto &[k, values] : m) {
        put_string(w, k);
        w.u16be(static_cast<std::uint16_t>(values.size()));
        for (const auto &v : values) {
            put_string(w, v);
        }
    }
    return w.take();
}

StringMultimap decode_string_multimap(ByteView body)
{
    return in_body([&] {
        ByteReader r(body);
        StringMultimap out;
        std::uint16_t n = r.u16be();
        for (std::uint16_t i = 0; i < n; ++i) {
            std::string k = get_string(r);
            std::uint16_t count = r.u16be();
            std::vector<std::string> values;
            for (std::uint16_t j = 0; j < count; ++j) {
                values.push_back(get_string(r));
            }
            out.emplace_back(std::move(k), std::move(values));
        }
        return out;
    });
}

Bytes encode_query(const QueryBody &q)
{
    ByteWriter w;
    put_long_string(w, q.query);
    w.u16be(q.consistency);
    w.u8(q.flags);
    return w.take();
}

QueryBody decode_query(ByteView body)
{
    return in_body([&] {
        ByteReader r(body);
        QueryBody q;
        q.query = get_long_string(r);
        q.consistency = r.u16be();
        q.flags = r.u8();
        return q;
    });
}

Bytes encode_string(const std::string &s)
{
    ByteWriter w;
    put_string(w, s);
    return w.take();
}

std::string decode_string(ByteView body)
{
    return in_body([&] {
        ByteReader r(body);
        return get_string(r);
    });
}

Bytes encode_error(const ErrorBody &e)
{
    ByteWriter w;
    w.i32be(e.code);
    put_string(w, e.message);
    return w.take();
}

ErrorBody decode_error(ByteView body)
{
    return in_body([&] {
        ByteReader r(body);
        ErrorBody e;
        e.code = r.i32be();
        e.message = get_string(r);
        return e;
    });
}

Bytes encode_result(const Result &res)
{
    ByteWriter w;
    w.i32be(static_cast<std::int32_t>(res.kind));
    if (res.kind == ResultKind::SetKeyspace) {
        put_string(w, res.rows.keyspace);
    } else if (res.kind == ResultKind::Rows) {
        const Rows &rows = res.rows;
        w.i32be(0x0001); // global tables spec
        w.i32be(static_cast<std::int32_t>(rows.columns.size()));
        put_string(w, rows.keyspace);
        put_string(w, rows.table);
        for (const auto &c : rows.columns) {
            put_string(w, c.name);
            w.u16be(c.type);
        }
        w.i32be(static_cast<std::int32_t>(rows.rows.size()));
        for (const auto &row : rows.rows) {
            for (const auto &cell : row) {
                if (!cell) {
                    w.i32be(-1);
                } else {
                    w.i32be(static_cast<std::int32_t>(cell->size()));
                    w.bytes(*cell);
                }
            }
        }
    }
    return w.take();
}

Result decode_result(ByteView body)
{
    return in_body([&] {
        ByteReader r(body);
        Result res;
        std::int32_t kind = r.i32be();
        if (kind == static_cast<std::int32_t>(ResultKind::Void)) {
            res.kind = ResultKind::Void;
            return res;
        }
        if (kind == static_cast<std::int32_t>(ResultKind::SetKeyspace)) {
            res.kind = ResultKind::SetKeyspace;
            res.rows.keyspace = get_string(r);
            return res;
        }
        if (kind != static_cast<std::int32_t>(ResultKind::Rows)) {
            throw_malformed(0, "unsupported CQL result kind");
        }
        res.kind = ResultKind::Rows;
        Rows &rows = res.rows;
        std::int32_t flags = r.i32be();
        std::int32_t ncols = r.i32be();
        if (ncols < 0 || ncols > 4096) {
            throw_malformed(r.absolute(), "bad column count");
        }
        if ((flags & 0x0002) != 0) { // has_more_pages: paging state follows
            std::int32_t n = r.i32be();
            if (n > 0) {
                r.skip(static_cast<std::size_t>(n));
            }
        }
        bool global = (flags & 0x0001) != 0;
        bool no_metadata = (flags & 0x0004) != 0;
        if (!no_metadata) {
            if (global) {
                rows.keyspace = get_string(r);
                rows.table = get_string(r);
            }
            for (std::int32_t i = 0; i < ncols; ++i) {
                if (!global) {
                    rows.keyspace = get_string(r);
                    rows.table = get_string(r);
                }
                Column c;
                c.name = get_string(r);
                c.type = r.u16be();
                if (c.type == 0x0000) { // custom: class name follows
                    get_string(r);
                } else if (c.type >= 0x0020) {
                    throw_malformed(r.absolute(), "collection and UDT columns are not supported");
                }
                rows.columns.push_back(std::move(c));
            }
        }
        std::int32_t nrows = r.i32be();
        if (nrows < 0 || static_cast<std::size_t>(nrows) > body.size()) {
            throw_malformed(r.absolute(), "bad row count");
        }
        for (std::int32_t i = 0; i < nrows; ++i) {
            std::vector<Cell> row;
            for (std::int32_t c = 0; c < ncols; ++c) {
                std::int32_t n = r.i32be();
                if (n < 0) {
                    row.emplace_back(std::nullopt);
                } else {
                    auto b = r.bytes(static_cast<std::size_t>(n));
                    row.emplace_back(Bytes(b.begin(), b.end()));
                }
            }
            rows.rows.push_back(std::move(row));
        }
        return res;
    });
}

std::string cell_text(std::uint16_t type, const Cell &cell)
{
    if (!cell) {
        return "null";
    }
    const Bytes &b = *cell;
    auto be = [&](std::size_t n) {
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            v = (v << 8) | b[i];
        }
        return v;
    };
    switch (static_cast<ColumnType>(type)) {
    case ColumnType::Ascii:
    case ColumnType::Varchar: return {b.begin(), b.end()};
    case ColumnType::Int:
        if (b.size() == 4) {
            return std::to_string(static_cast<std::int32_t>(be(4)));
        }
        break;
    case ColumnType::Bigint:
        if (b.size() == 8) {
            return std::to_string(static_cast<std::int64_t>(be(8)));
        }
        break;
    case ColumnType::Boolean:
        if (b.size() == 1) {
            return b[0] != 0 ? "true" : "false";
        }
        break;
    case ColumnType::Double:
        if (b.size() == 8) {
            return std::to_string(std::bit_cast<double>(be(8)));
        }
        break;
    default: break;
    }
    return "0x" + to_hex(b);
}

Cell text_cell(const std::string &s) { return Bytes(s.begin(), s.end()); }

} // namespace exposcan::cql
