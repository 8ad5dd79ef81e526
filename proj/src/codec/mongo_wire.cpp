#include "exposcan/codec/mongo_wire.hpp"

namespace exposcan::mongo {

namespace {

constexpr std::uint32_t kChecksumPresent = 1u << 0;

// Reads consecutive BSON documents from a bounded region.
std::vector<bson::Document> read_documents(ByteView region, std::size_t base)
{
    std::vector<bson::Document> out;
    std::size_t pos = 0;
    while (pos < region.size()) {
        try {
            auto d = bson::decode(region.subspan(pos));
            out.push_back(std::move(d.value));
            pos += d.consumed;
        } catch (const DecodeError &e) {
            throw_malformed(base + pos + e.offset(), std::string("bad document in message: ") + e.what());
        }
    }
    return out;
}

bson::Document single_document(ByteView region, std::size_t base, std::size_t *consumed)
{
    try {
        auto d = bson::decode(region);
        *consumed = d.consumed;
        return std::move(d.value);
    } catch (const DecodeError &e) {
        throw_malformed(base + e.offset(), std::string("bad document in message: ") + e.what());
    }
}

} // namespace

Bytes encode(const Message &m)
{
    ByteWriter w;
    w.i32le(0);
    w.i32le(m.request_id);
    w.i32le(m.response_to);
    if (const auto *msg = std::get_if<OpMsg>(&m.body)) {
        w.i32le(static_cast<std::int32_t>(OpCode::Msg));
        w.u32le(msg->flags & ~kChecksumPresent);
        w.u8(0);
        w.bytes(bson::encode(msg->body));
        for (const auto &seq : msg->sequences) {
            w.u8(1);
            std::size_t size_at = w.size();
            w.i32le(0);
            w.cstring(seq.identifier);
            for (const auto &d : seq.documents) {
                w.bytes(bson::encode(d));
            }
            w.patch_u32le(size_at, static_cast<std::uint32_t>(w.size() - size_at));
        }
    } else if (const auto *q = std::get_if<OpQuery>(&m.body)) {
        w.i32le(static_cast<std::int32_t>(OpCode::Query));
        w.i32le(q->flags);
        w.cstring(q->full_collection_name);
        w.i32le(q->number_to_skip);
        w.i32le(q->number_to_return);
        w.bytes(bson::encode(q->query));
    } else {
        const auto &rep = std::get<OpReply>(m.body);
        w.i32le(static_cast<std::int32_t>(OpCode::Reply));
        w.i32le(rep.response_flags);
        w.i64le(rep.cursor_id);
        w.i32le(rep.starting_from);
        w.i32le(static_cast<std::int32_t>(rep.documents.size()));
        for (const auto &d : rep.documents) {
            w.bytes(bson::encode(d));
        }
    }
    w.patch_u32le(0, static_cast<std::uint32_t>(w.size()));
    return w.take();
}

Decoded<Message> decode(ByteView data)
{
    ByteReader head(data);
    std::int32_t length = head.i32le();
    if (length < static_cast<std::int32_t>(kHeaderSize) ||
        static_cast<std::size_t>(length) > kMaxMessageSize) {
        throw_malformed(0, "bad message length");
    }
    auto size = static_cast<std::size_t>(length);
    Message m;
    m.request_id = head.i32le();
    m.response_to = head.i32le();
    std::int32_t opcode = head.i32le();
    if (opcode != 1 && opcode != 2004 && opcode != 2013) {
        throw_malformed(12, "unsupported opcode " + std::to_string(opcode));
    }
    if (data.size() < size) {
        throw_truncated(data.size(), "message incomplete");
    }

    ByteView body = data.subspan(kHeaderSize, size - kHeaderSize);
    ByteReader r(body, kHeaderSize);
    try {
        if (opcode == static_cast<std::int32_t>(OpCode::Msg)) {
            OpMsg msg;
            msg.flags = r.u32le();
            std::size_t end = body.size();
            if ((msg.flags & kChecksumPresent) != 0) {
                if (end < 4) {
                    throw_malformed(kHeaderSize, "checksum flag without room for it");
                }
                end -= 4;
                msg.flags &= ~kChecksumPresent;
            }
            bool have_body = false;
            while (r.position() < end) {
                std::uint8_t kind = r.u8();
                if (kind == 0) {
                    if (have_body) {
                        throw_malformed(r.absolute(), "two body sections");
                    }
                    std::size_t consumed = 0;
                    msg.body = single_document(body.subspan(r.position(), end - r.position()),
                        r.absolute(), &consumed);
                    r.skip(consumed);
                    have_body = true;
                } else if (kind == 1) {
                    std::size_t at = r.position();
                    std::int32_t seq_size = r.i32le();
                    if (seq_size < 5 || static_cast<std::size_t>(seq_size) > end - at) {
                        throw_malformed(r.absolute(), "bad document sequence size");
                    }
                    ByteReader seq(body.subspan(at + 4, static_cast<std::size_t>(seq_size) - 4),
                        kHeaderSize + at + 4);
                    OpMsg::Sequence s;
                    try {
                        s.identifier = seq.cstring();
                    } catch (const DecodeError &) {
                        throw_malformed(seq.absolute(), "bad sequence identifier");
                    }
                    s.documents = read_documents(seq.rest(), seq.absolute());
                    msg.sequences.push_back(std::move(s));
                    r.skip(static_cast<std::size_t>(seq_size) - 4);
                } else {
                    throw_malformed(r.absolute(), "unknown OP_MSG section kind");
                }
            }
            if (!have_body) {
                throw_malformed(kHeaderSize, "OP_MSG without a body section");
            }
            m.body = std::move(msg);
        } else if (opcode == static_cast<std::int32_t>(OpCode::Query)) {
            OpQuery q;
            q.flags = r.i32le();
            q.full_collection_name = r.cstring();
            q.number_to_skip = r.i32le();
            q.number_to_return = r.i32le();
            std::size_t consumed = 0;
            q.query = single_document(body.subspan(r.position()), r.absolute(), &consumed);
            m.body = std::move(q);
        } else {
            OpReply rep;
            rep.response_flags = r.i32le();
            rep.cursor_id = r.i64le();
            rep.starting_from = r.i32le();
            std::int32_t n = r.i32le();
            rep.documents = read_documents(body.subspan(r.position()), r.absolute());
            if (n < 0 || static_cast<std::size_t>(n) != rep.documents.size()) {
                throw_malformed(kHeaderSize + 16, "numberReturned does not match documents");
            }
            m.body = std::move(rep);
        }
    } catch (const DecodeError &e) {
        if (e.truncated()) {
            // The frame is complete, so running short inside it is malformed.
            throw_malformed(e.offset(), e.what());
        }
        throw;
    }
    return {std::move(m), size};
}

const bson::Document *command_document(const Message &m)
{
    if (const auto *msg = std::get_if<OpMsg>(&m.body)) {
        return &msg->body;
    }
    if (const auto *q = std::get_if<OpQuery>(&m.body)) {
        return &q->query;
    }
    return nullptr;
}

} // namespace exposcan::mongo
