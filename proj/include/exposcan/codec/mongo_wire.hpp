#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "exposcan/codec/bson.hpp"

namespace exposcan::mongo {

enum class OpCode : std::int32_t { Reply = 1, Query = 2004, Msg = 2013 };

// OP_MSG with a body section (kind 0) and optional document sequences (kind 1).
struct OpMsg {
    struct Sequence {
        std::string identifier;
        std::vector<bson::Document> documents;
        bool operator==(const Sequence &) const = default;
    };

    std::uint32_t flags = 0;
    bson::Document body;
    std::vector<Sequence> sequences;

    bool operator==(const OpMsg &) const = default;
};

// Legacy OP_QUERY, used only as a fallback for isMaster.
struct OpQuery {
    std::int32_t flags = 0;
    std::string full_collection_name;
    std::int32_t number_to_skip = 0;
    std::int32_t number_to_return = 0;
    bson::Document query;

    bool operator==(const OpQuery &) const = default;
};

struct OpReply {
    std::int32_t response_flags = 0;
    std::int64_t cursor_id = 0;
    std::int32_t starting_from = 0;
    std::vector<bson::Document> documents;

    bool operator==(const OpReply &) const = default;
};

struct Message {
    std::int32_t request_id = 0;
    std::int32_t response_to = 0;
    std::variant<OpMsg, OpQuery, OpReply> body;

    bool operator==(const Message &) const = default;
};

inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kMaxMessageSize = 48u << 20;

Bytes encode(const Message &m);
Decoded<Message> decode(ByteView data);

// The command document carried by a request, whatever its framing.
const bson::Document *command_document(const Message &m);

} // namespace exposcan::mongo
