#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::memcached {

// One line of a text-protocol response.
struct Line {
    enum class Kind : std::uint8_t { Stat, Item, Value, End, Error, ClientError, ServerError, Version };

    Kind kind = Kind::End;
    std::string key;  // STAT name, ITEM key or VALUE key
    std::string text; // STAT value, error message or version string
    std::uint64_t bytes = 0;
    std::uint32_t flags = 0;
    std::int64_t expiry = 0; // ITEM only
    std::optional<std::uint64_t> cas;

    bool operator==(const Line &) const = default;
};

inline constexpr std::size_t kMaxLineLength = 8192;
inline constexpr std::size_t kMaxValueBytes = 1u << 20;

std::string encode_line(const Line &line);

// Decodes exactly one CRLF-terminated line.
Decoded<Line> decode_line(ByteView data);

// Reads the `bytes`-long data block following a VALUE line, plus its CRLF.
Decoded<std::string> decode_data_block(ByteView data, std::uint64_t bytes);

// Splits a client request line ("stats items", "get k1 k2") into words.
// Truncated until the CRLF arrives.
Decoded<std::string> decode_request_line(ByteView data);

bool valid_key(std::string_view key);

} // namespace exposcan::memcached
