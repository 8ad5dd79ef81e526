#include "exposcan/codec/memcached.hpp"

#include <charconv>
#include <vector>

namespace exposcan::memcached {

namespace {

std::vector<std::string_view> split_words(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') {
            ++j;
        }
        if (j > i) {
            out.push_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

template <typename T> T number(std::string_view s, std::size_t at)
{
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw_malformed(at, "bad number in memcached line");
    }
    return v;
}

// Returns the line without CRLF and the consumed length.
std::pair<std::string_view, std::size_t> take_line(ByteView data)
{
    std::size_t limit = std::min(data.size(), kMaxLineLength + 2);
    for (std::size_t i = 0; i + 1 < limit; ++i) {
        if (data[i] == '\r' && data[i + 1] == '\n') {
            return {std::string_view(reinterpret_cast<const char *>(data.data()), i), i + 2};
        }
        if (data[i] == '\n' || data[i] == 0) {
            throw_malformed(i, "bad byte in memcached line");
        }
    }
    if (data.size() >= kMaxLineLength + 2) {
        throw_malformed(0, "memcached line too long");
    }
    throw_truncated(data.size(), "memcached line incomplete");
}

std::string_view after_word(std::string_view line, std::size_t word_len)
{
    return line.size() > word_len + 1 ? line.substr(word_len + 1) : std::string_view{};
}

} // namespace

bool valid_key(std::string_view key)
{
    if (key.empty() || key.size() > 250) {
        return false;
    }
    for (unsigned char c : key) {
        if (c <= 32 || c == 127) {
            return false;
        }
    }
    return true;
}

std::string encode_line(const Line &l)
{
    std::string out;
    switch (l.kind) {
    case Line::Kind::Stat: out = "STAT " + l.key + " " + l.text; break;
    case Line::Kind::Item:
        out = "ITEM " + l.key + " [" + std::to_string(l.bytes) + " b; " + std::to_string(l.expiry) + " s]";
        break;
    case Line::Kind::Value:
        out = "VALUE " + l.key + " " + std::to_string(l.flags) + " " + std::to_string(l.bytes);
        if (l.cas) {
            out += " " + std::to_string(*l.cas);
        }
        break;
    case Line::Kind::End: out = "END"; break;
    case Line::Kind::Error: out = "ERROR"; break;
    case Line::Kind::ClientError: out = "CLIENT_ERROR " + l.text; break;
    case Line::Kind::ServerError: out = "SERVER_ERROR " + l.text; break;
    case Line::Kind::Version: out = "VERSION " + l.text; break;
    }
    return out + "\r\n";
}

Decoded<Line> decode_line(ByteView data)
{
    auto [text, consumed] = take_line(data);
    auto words = split_words(text);
    if (words.empty()) {
        throw_malformed(0, "empty memcached line");
    }
    Line l;
    std::string_view head = words[0];
    if (head == "END" && words.size() == 1) {
        l.kind = Line::Kind::End;
    } else if (head == "ERROR" && words.size() == 1) {
        l.kind = Line::Kind::Error;
    } else if (head == "CLIENT_ERROR") {
        l.kind = Line::Kind::ClientError;
        l.text = std::string(after_word(text, head.size()));
    } else if (head == "SERVER_ERROR") {
        l.kind = Line::Kind::ServerError;
        l.text = std::string(after_word(text, head.size()));
    } else if (head == "VERSION") {
        l.kind = Line::Kind::Version;
        l.text = std::string(after_word(text, head.size()));
    } else if (head == "STAT" && words.size() >= 2) {
        l.kind = Line::Kind::Stat;
        l.key = std::string(words[1]);
        std::size_t value_at = static_cast<std::size_t>(words[1].data() - text.data()) + words[1].size();
        l.text = value_at < text.size() ? std::string(text.substr(value_at + 1)) : std::string{};
    } else if (head == "ITEM" && words.size() == 6) {
        // ITEM <key> [<bytes> b; <exptime> s]
        if (words[2].size() < 2 || words[2][0] != '[' || words[3] != "b;" || words[5] != "s]") {
            throw_malformed(0, "bad ITEM line");
        }
        l.kind = Line::Kind::Item;
        l.key = std::string(words[1]);
        l.bytes = number<std::uint64_t>(words[2].substr(1), 0);
        l.expiry = number<std::int64_t>(words[4], 0);
    } else if (head == "VALUE" && (words.size() == 4 || words.size() == 5)) {
        l.kind = Line::Kind::Value;
        l.key = std::string(words[1]);
        l.flags = number<std::uint32_t>(words[2], 0);
        l.bytes = number<std::uint64_t>(words[3], 0);
        if (words.size() == 5) {
            l.cas = number<std::uint64_t>(words[4], 0);
        }
        if (l.bytes > kMaxValueBytes) {
            throw_malformed(0, "VALUE block too large");
        }
    } else {
        throw_malformed(0, "unrecognized memcached response line");
    }
    return {std::move(l), consumed};
}

Decoded<std::string> decode_data_block(ByteView data, std::uint64_t bytes)
{
    if (bytes > kMaxValueBytes) {
        throw_malformed(0, "data block too large");
    }
    auto n = static_cast<std::size_t>(bytes);
    if (data.size() < n + 2) {
        throw_truncated(data.size(), "data block incomplete");
    }
    if (data[n] != '\r' || data[n + 1] != '\n') {
        throw_malformed(n, "data block not CRLF-terminated");
    }
    return {std::string(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n)), n + 2};
}

Decoded<std::string> decode_request_line(ByteView data)
{
    auto [text, consumed] = take_line(data);
    return {std::string(text), consumed};
}

} // namespace exposcan::memcached
