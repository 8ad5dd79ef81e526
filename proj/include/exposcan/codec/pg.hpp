#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::pg {

inline constexpr std::int32_t kProtocol30 = 196608; // 3 << 16
inline constexpr std::size_t kMaxMessageSize = 64u << 20;

// A typed protocol message: one type byte, int32 length, body.
struct Message {
    char type = 0;
    Bytes body;
    bool operator==(const Message &) const = default;
};

Bytes encode(const Message &m);
Decoded<Message> decode(ByteView data);

// The untyped first message of a session.
struct Startup {
    std::int32_t protocol = kProtocol30;
    std::vector<std::pair<std::string, std::string>> params;
    bool operator==(const Startup &) const = default;
};

Bytes encode_startup(const Startup &s);
Decoded<Startup> decode_startup(ByteView data);

enum class AuthCode : std::int32_t {
    Ok = 0,
    CleartextPassword = 3,
    Md5Password = 5,
    Sasl = 10,
};

struct Authentication {
    std::int32_t code = 0;
    Bytes extra; // salt or SASL mechanism list
    bool operator==(const Authentication &) const = default;
};

Message make_authentication(const Authentication &a);
Authentication parse_authentication(const Message &m);

// ErrorResponse / NoticeResponse fields keyed by their one-byte code.
using Fields = std::vector<std::pair<char, std::string>>;

Message make_error(const Fields &fields);
Fields parse_error(const Message &m);

Message make_parameter_status(const std::string &name, const std::string &value);
std::pair<std::string, std::string> parse_parameter_status(const Message &m);

Message make_query(const std::string &sql);
std::string parse_query(const Message &m);

Message make_ready_for_query(char status = 'I');
Message make_command_complete(const std::string &tag);

struct Column {
    std::string name;
    std::int32_t type_oid = 25; // text
    bool operator==(const Column &) const = default;
};

Message make_row_description(const std::vector<Column> &columns);
std::vector<Column> parse_row_description(const Message &m);

using Row = std::vector<std::optional<std::string>>;

Message make_data_row(const Row &row);
Row parse_data_row(const Message &m);

} // namespace exposcan::pg
