#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::mysql {

namespace cap {
inline constexpr std::uint32_t kLongPassword = 0x00000001;
inline constexpr std::uint32_t kConnectWithDb = 0x00000008;
inline constexpr std::uint32_t kProtocol41 = 0x00000200;
inline constexpr std::uint32_t kSecureConnection = 0x00008000;
inline constexpr std::uint32_t kPluginAuth = 0x00080000;
inline constexpr std::uint32_t kPluginAuthLenencData = 0x00200000;
inline constexpr std::uint32_t kDeprecateEof = 0x01000000;
} // namespace cap

inline constexpr std::size_t kMaxPayload = 0xFFFFFF;

struct Packet {
    std::uint8_t sequence_id = 0;
    Bytes payload;
    bool operator==(const Packet &) const = default;
};

Bytes encode_packet(const Packet &p);
Decoded<Packet> decode_packet(ByteView data);

// Initial handshake, protocol version 10.
struct Handshake {
    std::uint8_t protocol_version = 10;
    std::string server_version;
    std::uint32_t connection_id = 0;
    Bytes auth_plugin_data; // 20 bytes with secure connection, else 8
    std::uint32_t capability_flags = 0;
    std::uint8_t character_set = 0;
    std::uint16_t status_flags = 0;
    std::string auth_plugin_name;
    bool operator==(const Handshake &) const = default;
};

Bytes encode_handshake(const Handshake &h);
Handshake decode_handshake(ByteView payload);

struct HandshakeResponse {
    std::uint32_t capability_flags = 0;
    std::uint32_t max_packet_size = 0;
    std::uint8_t character_set = 0;
    std::string username;
    Bytes auth_response;
    std::optional<std::string> database;
    std::string auth_plugin_name;
    bool operator==(const HandshakeResponse &) const = default;
};

Bytes encode_handshake_response(const HandshakeResponse &r);
HandshakeResponse decode_handshake_response(ByteView payload);

struct ErrPacket {
    std::uint16_t code = 0;
    std::string sql_state = "HY000";
    std::string message;
    bool operator==(const ErrPacket &) const = default;
};

inline bool is_ok(ByteView p) { return !p.empty() && p[0] == 0x00 && p.size() >= 7; }
inline bool is_err(ByteView p) { return !p.empty() && p[0] == 0xFF; }
inline bool is_eof(ByteView p) { return !p.empty() && p[0] == 0xFE && p.size() < 9; }

Bytes encode_ok();
Bytes encode_eof();
Bytes encode_err(const ErrPacket &e);
ErrPacket decode_err(ByteView payload);

inline constexpr std::uint8_t kComQuit = 0x01;
inline constexpr std::uint8_t kComQuery = 0x03;

Bytes encode_com_query(const std::string &sql);
// Returns the SQL text if the payload is a COM_QUERY.
std::optional<std::string> decode_com_query(ByteView payload);

void put_lenenc_int(ByteWriter &w, std::uint64_t v);
std::uint64_t get_lenenc_int(ByteReader &r);

using Row = std::vector<std::optional<std::string>>;

struct ResultSet {
    std::vector<std::string> columns;
    std::vector<Row> rows;
    bool operator==(const ResultSet &) const = default;
};

// Payloads of a text-protocol result set, EOF-delimited.
std::vector<Bytes> encode_text_resultset(const ResultSet &rs);
Bytes encode_column_definition(const std::string &name);
std::string decode_column_name(ByteView payload);
Row decode_text_row(ByteView payload, std::size_t columns);

} // namespace exposcan::mysql
