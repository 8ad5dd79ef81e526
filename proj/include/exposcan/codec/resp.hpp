#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::resp {

enum class Type : std::uint8_t { SimpleString, Error, Integer, BulkString, NullBulk, Array, NullArray };

// RESP2 value. `text` holds simple/error/bulk payloads (binary safe).
struct Value {
    Type type = Type::NullBulk;
    std::string text;
    std::int64_t integer = 0;
    std::vector<Value> elements;

    static Value simple(std::string s) { return {Type::SimpleString, std::move(s), 0, {}}; }
    static Value error(std::string s) { return {Type::Error, std::move(s), 0, {}}; }
    static Value bulk(std::string s) { return {Type::BulkString, std::move(s), 0, {}}; }
    static Value number(std::int64_t n) { return {Type::Integer, {}, n, {}}; }
    static Value null() { return {Type::NullBulk, {}, 0, {}}; }
    static Value array(std::vector<Value> items) { return {Type::Array, {}, 0, std::move(items)}; }

    [[nodiscard]] bool is_error() const { return type == Type::Error; }

    bool operator==(const Value &) const = default;
};

inline constexpr std::size_t kMaxBulkLength = 64u << 20;
inline constexpr std::size_t kMaxArrayLength = 1u << 20;
inline constexpr int kMaxDepth = 32;

std::string encode(const Value &v);
Decoded<Value> decode(ByteView data);

// A client command: an array of bulk strings.
Value command(std::initializer_list<std::string> parts);
Value command(const std::vector<std::string> &parts);

// "GET key" style rendering used in logs.
std::string describe_command(const Value &v);

} // namespace exposcan::resp
