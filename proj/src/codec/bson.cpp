#include "exposcan/codec/bson.hpp"

#include <json.hpp>

namespace exposcan::bson {

namespace {

enum : std::uint8_t {
    kDouble = 0x01,
    kString = 0x02,
    kDocument = 0x03,
    kArray = 0x04,
    kBinary = 0x05,
    kUndefined = 0x06,
    kObjectId = 0x07,
    kBool = 0x08,
    kDateTime = 0x09,
    kNull = 0x0A,
    kRegex = 0x0B,
    kDbPointer = 0x0C,
    kJavaScript = 0x0D,
    kSymbol = 0x0E,
    kCodeWithScope = 0x0F,
    kInt32 = 0x10,
    kTimestamp = 0x11,
    kInt64 = 0x12,
    kDecimal128 = 0x13,
    kMinKey = 0xFF,
    kMaxKey = 0x7F,
};

std::uint8_t type_of(const Value &v)
{
    struct Visitor {
        std::uint8_t operator()(const Null &) const { return kNull; }
        std::uint8_t operator()(bool) const { return kBool; }
        std::uint8_t operator()(std::int32_t) const { return kInt32; }
        std::uint8_t operator()(std::int64_t) const { return kInt64; }
        std::uint8_t operator()(double) const { return kDouble; }
        std::uint8_t operator()(const std::string &) const { return kString; }
        std::uint8_t operator()(const Document &) const { return kDocument; }
        std::uint8_t operator()(const Array &) const { return kArray; }
        std::uint8_t operator()(const Binary &) const { return kBinary; }
        std::uint8_t operator()(const Unsupported &u) const { return u.type; }
    };
    return std::visit(Visitor{}, v.v);
}

void encode_document(const Document &doc, ByteWriter &w);

void encode_string(const std::string &s, ByteWriter &w)
{
    w.i32le(static_cast<std::int32_t>(s.size() + 1));
    w.cstring(s);
}

void encode_value(const Value &v, ByteWriter &w)
{
    struct Visitor {
        ByteWriter &w;
        void operator()(const Null &) const {}
        void operator()(bool b) const { w.u8(b ? 1 : 0); }
        void operator()(std::int32_t i) const { w.i32le(i); }
        void operator()(std::int64_t i) const { w.i64le(i); }
        void operator()(double d) const { w.f64le(d); }
        void operator()(const std::string &s) const { encode_string(s, w); }
        void operator()(const Document &d) const { encode_document(d, w); }
        void operator()(const Array &a) const
        {
            Document as_doc;
            as_doc.reserve(a.items.size());
            for (std::size_t i = 0; i < a.items.size(); ++i) {
                as_doc.push_back({std::to_string(i), a.items[i]});
            }
            encode_document(as_doc, w);
        }
        void operator()(const Binary &b) const
        {
            w.i32le(static_cast<std::int32_t>(b.data.size()));
            w.u8(b.subtype);
            w.bytes(b.data);
        }
        void operator()(const Unsupported &u) const { w.bytes(u.raw); }
    };
    std::visit(Visitor{w}, v.v);
}

void encode_document(const Document &doc, ByteWriter &w)
{
    std::size_t start = w.size();
    w.i32le(0);
    for (const auto &e : doc) {
        w.u8(type_of(e.value));
        w.cstring(e.key);
        encode_value(e.value, w);
    }
    w.u8(0);
    w.patch_u32le(start, static_cast<std::uint32_t>(w.size() - start));
}

class Decoder {
public:
    explicit Decoder(ByteView data) : data_(data) {}

    Document document(std::size_t offset, int depth, std::size_t *consumed)
    {
        if (depth > kMaxDepth) {
            throw_malformed(offset, "BSON nesting too deep");
        }
        ByteReader head(data_.subspan(offset), offset);
        std::int32_t len = head.i32le();
        if (len < 5 || static_cast<std::size_t>(len) > kMaxDocumentSize) {
            throw_malformed(offset, "bad BSON document length");
        }
        auto size = static_cast<std::size_t>(len);
        if (data_.size() - offset < size) {
            throw_truncated(offset, "BSON document incomplete");
        }
        if (data_[offset + size - 1] != 0) {
            throw_malformed(offset + size - 1, "BSON document not NUL-terminated");
        }
        ByteReader r(data_.subspan(offset + 4, size - 5), offset + 4);
        Document doc;
        while (!r.at_end()) {
            std::uint8_t type = r.u8();
            std::string key = cstring(r);
            doc.push_back({std::move(key), value(type, r, depth)});
        }
        *consumed = size;
        return doc;
    }

private:
    // Inside a bounded document, running out of bytes is malformed.
    static std::string cstring(ByteReader &r)
    {
        try {
            return r.cstring();
        } catch (const DecodeError &e) {
            throw_malformed(e.offset(), "BSON key or string overruns its document");
        }
    }

    template <typename Fn> static auto bounded(ByteReader &r, Fn &&fn)
    {
        try {
            return fn();
        } catch (const DecodeError &e) {
            if (e.truncated()) {
                throw_malformed(r.absolute(), "BSON element overruns its document");
            }
            throw;
        }
    }

    std::string string_payload(ByteReader &r)
    {
        return bounded(r, [&] {
            std::int32_t len = r.i32le();
            if (len < 1 || static_cast<std::size_t>(len) > r.remaining()) {
                throw_malformed(r.absolute(), "bad BSON string length");
            }
            std::string s = r.str(static_cast<std::size_t>(len - 1));
            if (r.u8() != 0) {
                throw_malformed(r.absolute(), "BSON string not NUL-terminated");
            }
            return s;
        });
    }

    Document nested(ByteReader &r, int depth)
    {
        std::size_t consumed = 0;
        std::size_t at = r.absolute();
        if (r.remaining() < 5) {
            throw_malformed(at, "nested BSON document overruns its parent");
        }
        ByteReader peek(data_.subspan(at, 4), at);
        std::int32_t len = peek.i32le();
        if (len < 5 || static_cast<std::size_t>(len) > r.remaining()) {
            throw_malformed(at, "nested BSON document overruns its parent");
        }
        Document d = document(at, depth + 1, &consumed);
        r.skip(consumed);
        return d;
    }

    Bytes raw(ByteReader &r, std::size_t n)
    {
        return bounded(r, [&] {
            auto b = r.bytes(n);
            return Bytes(b.begin(), b.end());
        });
    }

    Value value(std::uint8_t type, ByteReader &r, int depth)
    {
        switch (type) {
        case kDouble: return bounded(r, [&] { return r.f64le(); });
        case kString: return string_payload(r);
        case kDocument: return nested(r, depth);
        case kArray: {
            Array a;
            for (auto &e : nested(r, depth)) {
                a.items.push_back(std::move(e.value));
            }
            return a;
        }
        case kBinary:
            return bounded(r, [&] {
                std::int32_t len = r.i32le();
                std::uint8_t subtype = r.u8();
                if (len < 0 || static_cast<std::size_t>(len) > r.remaining()) {
                    throw_malformed(r.absolute(), "bad BSON binary length");
                }
                auto b = r.bytes(static_cast<std::size_t>(len));
                return Binary{subtype, Bytes(b.begin(), b.end())};
            });
        case kBool: {
            std::uint8_t b = bounded(r, [&] { return r.u8(); });
            if (b > 1) {
                throw_malformed(r.absolute(), "bad BSON boolean");
            }
            return b == 1;
        }
        case kNull: return Null{};
        case kInt32: return bounded(r, [&] { return r.i32le(); });
        case kInt64: return bounded(r, [&] { return r.i64le(); });
        // Outside the subset: keep raw bytes so sampling can proceed.
        case kUndefined:
        case kMinKey:
        case kMaxKey: return Unsupported{type, {}};
        case kObjectId: return Unsupported{type, raw(r, 12)};
        case kDateTime:
        case kTimestamp: return Unsupported{type, raw(r, 8)};
        case kDecimal128: return Unsupported{type, raw(r, 16)};
        case kJavaScript:
        case kSymbol: {
            std::size_t start = r.position();
            string_payload(r);
            return Unsupported{type, slice(r, start)};
        }
        case kRegex: {
            std::size_t start = r.position();
            cstring(r);
            cstring(r);
            return Unsupported{type, slice(r, start)};
        }
        case kDbPointer: {
            std::size_t start = r.position();
            string_payload(r);
            raw(r, 12);
            return Unsupported{type, slice(r, start)};
        }
        case kCodeWithScope: {
            std::size_t at = r.absolute();
            std::int32_t len = bounded(r, [&] {
                ByteReader peek(data_.subspan(at, std::min<std::size_t>(4, r.remaining())), at);
                return peek.i32le();
            });
            if (len < 14 || static_cast<std::size_t>(len) > r.remaining()) {
                throw_malformed(at, "bad code-with-scope length");
            }
            return Unsupported{type, raw(r, static_cast<std::size_t>(len))};
        }
        default: throw_malformed(r.absolute(), "unknown BSON element type");
        }
    }

    Bytes slice(const ByteReader &r, std::size_t start_pos) const
    {
        std::size_t base = r.absolute() - r.position();
        return Bytes(data_.begin() + static_cast<std::ptrdiff_t>(base + start_pos),
            data_.begin() + static_cast<std::ptrdiff_t>(r.absolute()));
    }

    ByteView data_;
};

nlohmann::ordered_json to_json_value(const Value &v);

nlohmann::ordered_json to_json_doc(const Document &d)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto &e : d) {
        j[e.key] = to_json_value(e.value);
    }
    return j;
}

nlohmann::ordered_json to_json_value(const Value &v)
{
    struct Visitor {
        nlohmann::ordered_json operator()(const Null &) const { return nullptr; }
        nlohmann::ordered_json operator()(bool b) const { return b; }
        nlohmann::ordered_json operator()(std::int32_t i) const { return i; }
        nlohmann::ordered_json operator()(std::int64_t i) const { return i; }
        nlohmann::ordered_json operator()(double d) const { return d; }
        nlohmann::ordered_json operator()(const std::string &s) const { return s; }
        nlohmann::ordered_json operator()(const Document &d) const { return to_json_doc(d); }
        nlohmann::ordered_json operator()(const Array &a) const
        {
            auto j = nlohmann::ordered_json::array();
            for (const auto &item : a.items) {
                j.push_back(to_json_value(item));
            }
            return j;
        }
        nlohmann::ordered_json operator()(const Binary &b) const
        {
            return {{"$binary", to_hex(b.data)}, {"$subtype", b.subtype}};
        }
        nlohmann::ordered_json operator()(const Unsupported &u) const
        {
            if (u.type == kObjectId) {
                return {{"$oid", to_hex(u.raw)}};
            }
            char tag[8];
            std::snprintf(tag, sizeof(tag), "0x%02x", u.type);
            return {{"$unsupported", tag}};
        }
    };
    return std::visit(Visitor{}, v.v);
}

} // namespace

bool Array::operator==(const Array &o) const { return items == o.items; }
bool Value::operator==(const Value &o) const { return v == o.v; }
bool Element::operator==(const Element &o) const { return key == o.key && value == o.value; }

Bytes encode(const Document &doc)
{
    ByteWriter w;
    encode_document(doc, w);
    return w.take();
}

Decoded<Document> decode(ByteView data)
{
    Decoder d(data);
    std::size_t consumed = 0;
    Document doc = d.document(0, 0, &consumed);
    return {std::move(doc), consumed};
}

const Value *find(const Document &doc, std::string_view key)
{
    for (const auto &e : doc) {
        if (e.key == key) {
            return &e.value;
        }
    }
    return nullptr;
}

std::optional<std::string> get_string(const Document &doc, std::string_view key)
{
    const Value *v = find(doc, key);
    if (v == nullptr || !v->is<std::string>()) {
        return std::nullopt;
    }
    return *v->get_if<std::string>();
}

std::optional<double> get_number(const Document &doc, std::string_view key)
{
    const Value *v = find(doc, key);
    if (v == nullptr) {
        return std::nullopt;
    }
    if (auto *d = v->get_if<double>()) {
        return *d;
    }
    if (auto *i = v->get_if<std::int32_t>()) {
        return *i;
    }
    if (auto *l = v->get_if<std::int64_t>()) {
        return static_cast<double>(*l);
    }
    return std::nullopt;
}

std::optional<bool> get_bool(const Document &doc, std::string_view key)
{
    const Value *v = find(doc, key);
    if (v == nullptr || !v->is<bool>()) {
        return std::nullopt;
    }
    return *v->get_if<bool>();
}

const Document *get_document(const Document &doc, std::string_view key)
{
    const Value *v = find(doc, key);
    return v != nullptr ? v->get_if<Document>() : nullptr;
}

const Array *get_array(const Document &doc, std::string_view key)
{
    const Value *v = find(doc, key);
    return v != nullptr ? v->get_if<Array>() : nullptr;
}

std::string to_json_text(const Document &doc)
{
    return to_json_doc(doc).dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

} // namespace exposcan::bson
