#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::http {

using Headers = std::vector<std::pair<std::string, std::string>>;

inline constexpr std::size_t kMaxHeaderBytes = 64u << 10;
inline constexpr std::size_t kMaxBodyBytes = 64u << 20;

struct Request {
    std::string method = "GET";
    std::string target = "/";
    Headers headers;
    std::string body;
    bool operator==(const Request &) const = default;
};

struct Response {
    int status = 200;
    std::string reason = "OK";
    Headers headers;
    std::string body;
    bool operator==(const Response &) const = default;
};

// Case-insensitive header lookup.
std::optional<std::string> header(const Headers &h, std::string_view name);

std::string encode(const Request &r);
std::string encode(const Response &r);

Decoded<Request> decode_request(ByteView data);

// Bodies are delimited by Content-Length, chunked encoding, or, when
// neither is present, by connection close: pass at_eof once the peer
// has closed so the remaining bytes are taken as the body.
Decoded<Response> decode_response(ByteView data, bool at_eof = false);

std::string reason_phrase(int status);

// Percent-encodes a path segment or query value.
std::string url_encode(std::string_view s);
std::string url_decode(std::string_view s);

} // namespace exposcan::http
