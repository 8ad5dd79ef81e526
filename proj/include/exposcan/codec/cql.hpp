#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::cql {

enum class Opcode : std::uint8_t {
    Error = 0x00,
    Startup = 0x01,
    Ready = 0x02,
    Authenticate = 0x03,
    Options = 0x05,
    Supported = 0x06,
    Query = 0x07,
    Result = 0x08,
};

inline constexpr std::uint8_t kRequestVersion = 0x04;
inline constexpr std::uint8_t kResponseVersion = 0x84;
inline constexpr std::size_t kHeaderSize = 9;
inline constexpr std::size_t kMaxBodySize = 256u << 20;

struct Frame {
    std::uint8_t version = kRequestVersion;
    std::uint8_t flags = 0;
    std::int16_t stream = 0;
    std::uint8_t opcode = 0;
    Bytes body;

    [[nodiscard]] bool is_response() const { return (version & 0x80) != 0; }
    bool operator==(const Frame &) const = default;
};

Bytes encode(const Frame &f);
Decoded<Frame> decode(ByteView data);

using StringMap = std::vector<std::pair<std::string, std::string>>;
using StringMultimap = std::vector<std::pair<std::string, std::vector<std::string>>>;

Bytes encode_string_map(const StringMap &m);
StringMap decode_string_map(ByteView body);
Bytes encode_string_multimap(const StringMultimap &m);
StringMultimap decode_string_multimap(ByteView body);

struct QueryBody {
    std::string query;
    std::uint16_t consistency = 0x0001; // ONE
    std::uint8_t flags = 0;
    bool operator==(const QueryBody &) const = default;
};

Bytes encode_query(const QueryBody &q);
QueryBody decode_query(ByteView body);

Bytes encode_string(const std::string &s);
std::string decode_string(ByteView body);

struct ErrorBody {
    std::int32_t code = 0;
    std::string message;
    bool operator==(const ErrorBody &) const = default;
};

Bytes encode_error(const ErrorBody &e);
ErrorBody decode_error(ByteView body);

enum class ColumnType : std::uint16_t {
    Ascii = 0x0001,
    Bigint = 0x0002,
    Blob = 0x0003,
    Boolean = 0x0004,
    Double = 0x0007,
    Int = 0x0009,
    Varchar = 0x000D,
};

struct Column {
    std::string name;
    std::uint16_t type = static_cast<std::uint16_t>(ColumnType::Varchar);
    bool operator==(const Column &) const = default;
};

using Cell = std::optional<Bytes>;

// A Rows result with global table spec.
struct Rows {
    std::string keyspace;
    std::string table;
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
    bool operator==(const Rows &) const = default;
};

enum class ResultKind : std::int32_t { Void = 1, Rows = 2, SetKeyspace = 3 };

struct Result {
    ResultKind kind = ResultKind::Void;
    Rows rows;
    bool operator==(const Result &) const = default;
};

Bytes encode_result(const Result &r);
Result decode_result(ByteView body);

// Renders a cell for samples; unknown types become hex.
std::string cell_text(std::uint16_t type, const Cell &cell);
Cell text_cell(const std::string &s);

} // namespace exposcan::cql
