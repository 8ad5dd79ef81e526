#include "exposcan/codec/http.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace exposcan::http {

namespace {

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size()
        && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x))
                   == std::tolower(static_cast<unsigned char>(y));
           });
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

struct Head {
    std::string start_line;
    Headers headers;
    std::size_t size = 0; // including the blank line
};

Head parse_head(std::string_view text)
{
    auto end = text.find("\r\n\r\n");
    if (end == std::string_view::npos) {
        if (text.size() > kMaxHeaderBytes) {
            throw_malformed(kMaxHeaderBytes, "HTTP header section too large");
        }
        throw_truncated(text.size(), "HTTP header section incomplete");
    }
    if (end > kMaxHeaderBytes) {
        throw_malformed(kMaxHeaderBytes, "HTTP header section too large");
    }
    Head head;
    head.size = end + 4;
    std::string_view block = text.substr(0, end);
    std::size_t pos = 0;
    bool first = true;
    while (pos <= block.size()) {
        auto eol = block.find("\r\n", pos);
        std::string_view line = block.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        if (line.find('\n') != std::string_view::npos || line.find('\r') != std::string_view::npos) {
            throw_malformed(pos, "bare CR or LF in HTTP header");
        }
        if (first) {
            head.start_line = std::string(line);
            first = false;
        } else {
            auto colon = line.find(':');
            if (colon == std::string_view::npos || colon == 0) {
                throw_malformed(pos, "malformed HTTP header line");
            }
            head.headers.emplace_back(std::string(trim(line.substr(0, colon))),
                std::string(trim(line.substr(colon + 1))));
        }
        if (eol == std::string_view::npos) {
            break;
        }
        pos = eol + 2;
    }
    if (head.start_line.empty()) {
        throw_malformed(0, "empty HTTP start line");
    }
    return head;
}

std::optional<std::size_t> content_length(const Headers &h)
{
    auto v = header(h, "Content-Length");
    if (!v) {
        return std::nullopt;
    }
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
    if (ec != std::errc() || p != v->data() + v->size()) {
        throw_malformed(0, "bad Content-Length");
    }
    if (n > kMaxBodyBytes) {
        throw_malformed(0, "HTTP body too large");
    }
    return n;
}

bool is_chunked(const Headers &h)
{
    auto v = header(h, "Transfer-Encoding");
    if (!v) {
        return false;
    }
    std::string lower = *v;
    std::transform(lower.begin(), lower.end(), lower.begin(),
        [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower.find("chunked") != std::string::npos;
}

// Returns body and bytes consumed from `text` (which starts at the body).
std::pair<std::string, std::size_t> read_chunked(std::string_view text, std::size_t base)
{
    std::string body;
    std::size_t pos = 0;
    for (;;) {
        auto eol = text.find("\r\n", pos);
        if (eol == std::string_view::npos) {
            if (text.size() - pos > 1024) {
                throw_malformed(base + pos, "chunk size line too long");
            }
            throw_truncated(base + text.size(), "chunk size incomplete");
        }
        std::string_view size_line = text.substr(pos, eol - pos);
        size_line = size_line.substr(0, size_line.find(';'));
        size_line = trim(size_line);
        std::size_t n = 0;
        auto [p, ec] = std::from_chars(size_line.data(), size_line.data() + size_line.size(), n, 16);
        if (size_line.empty() || ec != std::errc() || p != size_line.data() + size_line.size()) {
            throw_malformed(base + pos, "bad chunk size");
        }
        if (n > kMaxBodyBytes || body.size() + n > kMaxBodyBytes) {
            throw_malformed(base + pos, "chunked body too large");
        }
        pos = eol + 2;
        if (n == 0) {
            // Trailers end with an empty line.
            for (;;) {
                auto tl = text.find("\r\n", pos);
                if (tl == std::string_view::npos) {
                    throw_truncated(base + text.size(), "chunk trailer incomplete");
                }
                bool blank = tl == pos;
                pos = tl + 2;
                if (blank) {
                    return {std::move(body), pos};
                }
            }
        }
        if (text.size() < pos + n + 2) {
            throw_truncated(base + text.size(), "chunk data incomplete");
        }
        body.append(text.substr(pos, n));
        if (text.substr(pos + n, 2) != "\r\n") {
            throw_malformed(base + pos + n, "chunk not followed by CRLF");
        }
        pos += n + 2;
    }
}

std::string encode_headers(const Headers &headers, const std::string &body, bool add_length)
{
    std::string out;
    bool has_length = false;
    for (const auto &[k, v] : headers) {
        if (iequals(k, "Content-Length") || iequals(k, "Transfer-Encoding")) {
            has_length = true;
        }
        out += k + ": " + v + "\r\n";
    }
    if (add_length && !has_length) {
        out += "Content-Length: " + std::to_string(body.size()) + "\r\n";
    }
    out += "\r\n";
    return out;
}

} // namespace

std::optional<std::string> header(const Headers &h, std::string_view name)
{
    for (const auto &[k, v] : h) {
        if (iequals(k, name)) {
            return v;
        }
    }
    return std::nullopt;
}

std::string encode(const Request &r)
{
    std::string out = r.method + " " + r.target + " HTTP/1.1\r\n";
    out += encode_headers(r.headers, r.body, !r.body.empty());
    out += r.body;
    return out;
}

std::string encode(const Response &r)
{
    std::string out = "HTTP/1.1 " + std::to_string(r.status) + " " + r.reason + "\r\n";
    out += encode_headers(r.headers, r.body, true);
    out += r.body;
    return out;
}

Decoded<Request> decode_request(ByteView data)
{
    std::string_view text(reinterpret_cast<const char *>(data.data()), data.size());
    Head head = parse_head(text);
    Request r;
    auto sp1 = head.start_line.find(' ');
    auto sp2 = head.start_line.rfind(' ');
    if (sp1 == std::string::npos || sp2 == sp1) {
        throw_malformed(0, "malformed request line");
    }
    r.method = head.start_line.substr(0, sp1);
    r.target = head.start_line.substr(sp1 + 1, sp2 - sp1 - 1);
    std::string version = head.start_line.substr(sp2 + 1);
    if (version.rfind("HTTP/1.", 0) != 0 || r.method.empty() || r.target.empty()) {
        throw_malformed(0, "malformed request line");
    }
    for (char c : r.method) {
        if (c < 'A' || c > 'Z') {
            throw_malformed(0, "bad request method");
        }
    }
    r.headers = std::move(head.headers);
    std::size_t consumed = head.size;
    if (is_chunked(r.headers)) {
        auto [body, n] = read_chunked(text.substr(head.size), head.size);
        r.body = std::move(body);
        consumed += n;
    } else if (auto len = content_length(r.headers)) {
        if (text.size() < head.size + *len) {
            throw_truncated(text.size(), "request body incomplete");
        }
        r.body = std::string(text.substr(head.size, *len));
        consumed += *len;
    }
    return {std::move(r), consumed};
}

Decoded<Response> decode_response(ByteView data, bool at_eof)
{
    std::string_view text(reinterpret_cast<const char *>(data.data()), data.size());
    Head head = parse_head(text);
    Response r;
    const std::string &line = head.start_line;
    if (line.rfind("HTTP/1.", 0) != 0 || line.size() < 12 || line[8] != ' ') {
        throw_malformed(0, "malformed status line");
    }
    int status = 0;
    auto [p, ec] = std::from_chars(line.data() + 9, line.data() + 12, status);
    if (ec != std::errc() || p != line.data() + 12 || status < 100) {
        throw_malformed(9, "bad status code");
    }
    r.status = status;
    r.reason = line.size() > 13 ? line.substr(13) : std::string();
    r.headers = std::move(head.headers);
    std::size_t consumed = head.size;
    bool no_body = status < 200 || status == 204 || status == 304;
    if (no_body) {
        return {std::move(r), consumed};
    }
    if (is_chunked(r.headers)) {
        auto [body, n] = read_chunked(text.substr(head.size), head.size);
        r.body = std::move(body);
        consumed += n;
    } else if (auto len = content_length(r.headers)) {
        if (text.size() < head.size + *len) {
            throw_truncated(text.size(), "response body incomplete");
        }
        r.body = std::string(text.substr(head.size, *len));
        consumed += *len;
    } else {
        if (!at_eof) {
            throw_truncated(text.size(), "response body runs to connection close");
        }
        if (text.size() - head.size > kMaxBodyBytes) {
            throw_malformed(head.size, "HTTP body too large");
        }
        r.body = std::string(text.substr(head.size));
        consumed = text.size();
    }
    return {std::move(r), consumed};
}

std::string reason_phrase(int status)
{
    switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 401: return "Unauthorized";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 500: return "Internal Server Error";
    default: return "Unknown";
    }
}

std::string url_encode(std::string_view s)
{
    static const char *hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string url_decode(std::string_view s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int v = 0;
            auto [p, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
            if (ec == std::errc() && p == s.data() + i + 3) {
                out += static_cast<char>(v);
                i += 2;
                continue;
            }
        }
        out += s[i] == '+' ? ' ' : s[i];
    }
    return out;
}

} // namespace exposcan::http
