#include "exposcan/codec/resp.hpp"

#include <charconv>

namespace exposcan::resp {

namespace {

void encode_into(const Value &v, std::string &out)
{
    switch (v.type) {
    case Type::SimpleString: out += '+' + v.text + "\r\n"; break;
    case Type::Error: out += '-' + v.text + "\r\n"; break;
    case Type::Integer: out += ':' + std::to_string(v.integer) + "\r\n"; break;
    case Type::BulkString:
        out += '$' + std::to_string(v.text.size()) + "\r\n";
        out += v.text;
        out += "\r\n";
        break;
    case Type::NullBulk: out += "$-1\r\n"; break;
    case Type::NullArray: out += "*-1\r\n"; break;
    case Type::Array:
        out += '*' + std::to_string(v.elements.size()) + "\r\n";
        for (const auto &e : v.elements) {
            encode_into(e, out);
        }
        break;
    }
}

class Parser {
public:
    explicit Parser(ByteView data) : data_(data) {}

    Value value(int depth)
    {
        if (depth > kMaxDepth) {
            throw_malformed(pos_, "RESP nesting too deep");
        }
        std::size_t start = pos_;
        std::string_view line_text = line();
        if (line_text.empty()) {
            throw_malformed(start, "empty RESP line");
        }
        char tag = line_text[0];
        std::string_view body = line_text.substr(1);
        switch (tag) {
        case '+': return Value::simple(std::string(body));
        case '-': return Value::error(std::string(body));
        case ':': return Value::number(integer(body, start));
        case '$': {
            std::int64_t len = integer(body, start);
            if (len == -1) {
                return Value::null();
            }
            if (len < 0 || static_cast<std::uint64_t>(len) > kMaxBulkLength) {
                throw_malformed(start, "bad bulk length");
            }
            auto n = static_cast<std::size_t>(len);
            if (data_.size() - pos_ < n + 2) {
                throw_truncated(pos_, "bulk string incomplete");
            }
            std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
            pos_ += n;
            if (data_[pos_] != '\r' || data_[pos_ + 1] != '\n') {
                throw_malformed(pos_, "bulk string not CRLF-terminated");
            }
            pos_ += 2;
            return Value::bulk(std::move(s));
        }
        case '*': {
            std::int64_t count = integer(body, start);
            if (count == -1) {
                return {Type::NullArray, {}, 0, {}};
            }
            if (count < 0 || static_cast<std::uint64_t>(count) > kMaxArrayLength) {
                throw_malformed(start, "bad array length");
            }
            std::vector<Value> items;
            items.reserve(static_cast<std::size_t>(std::min<std::int64_t>(count, 1024)));
            for (std::int64_t i = 0; i < count; ++i) {
                items.push_back(value(depth + 1));
            }
            return Value::array(std::move(items));
        }
        default: throw_malformed(start, "unknown RESP type byte");
        }
    }

    [[nodiscard]] std::size_t position() const { return pos_; }

private:
    std::string_view line()
    {
        for (std::size_t i = pos_; i + 1 < data_.size(); ++i) {
            if (data_[i] == '\r' && data_[i + 1] == '\n') {
                std::string_view out(reinterpret_cast<const char *>(data_.data()) + pos_, i - pos_);
                pos_ = i + 2;
                return out;
            }
            if (data_[i] == '\n' || (data_[i] == '\r' && data_[i + 1] != '\n')) {
                throw_malformed(i, "bare CR or LF in RESP line");
            }
        }
        if (data_.size() - pos_ > 64 * 1024) {
            throw_malformed(pos_, "RESP line too long");
        }
        throw_truncated(pos_, "RESP line incomplete");
    }

    static std::int64_t integer(std::string_view s, std::size_t at)
    {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || s[0] == '+') {
            throw_malformed(at, "bad RESP integer");
        }
        return v;
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode(const Value &v)
{
    std::string out;
    encode_into(v, out);
    return out;
}

Decoded<Value> decode(ByteView data)
{
    Parser p(data);
    Value v = p.value(0);
    return {std::move(v), p.position()};
}

Value command(std::initializer_list<std::string> parts)
{
    std::vector<Value> items;
    for (const auto &p : parts) {
        items.push_back(Value::bulk(p));
    }
    return Value::array(std::move(items));
}

Value command(const std::vector<std::string> &parts)
{
    std::vector<Value> items;
    for (const auto &p : parts) {
        items.push_back(Value::bulk(p));
    }
    return Value::array(std::move(items));
}

std::string describe_command(const Value &v)
{
    if (v.type != Type::Array || v.elements.empty()) {
        return "unparsed";
    }
    std::string out;
    for (const auto &e : v.elements) {
        if (e.type != Type::BulkString && e.type != Type::SimpleString) {
            return "unparsed";
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += e.text;
    }
    return out;
}

} // namespace exposcan::resp
