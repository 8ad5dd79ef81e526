#include <charconv>

#include "emulator.hpp"
#include "exposcan/allowlist.hpp"
#include "exposcan/codec/mongo_wire.hpp"

namespace exposcan::fleet::detail {

namespace {

using bson::Document;

bson::Value field_value(const std::string &v)
{
    std::int32_t n = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec == std::errc() && p == v.data() + v.size() && v.size() < 9 && (v.size() == 1 || v[0] != '0')) {
        return n;
    }
    return v;
}

Document to_document(const DataRecord &r)
{
    Document d;
    for (const auto &[k, v] : r) {
        d.push_back({k, field_value(v)});
    }
    return d;
}

Document error_doc(double code, const std::string &name, const std::string &msg)
{
    return {{"ok", 0.0}, {"errmsg", msg}, {"code", static_cast<std::int32_t>(code)}, {"codeName", name}};
}

Document cursor_doc(const std::string &ns, std::vector<Document> batch)
{
    bson::Array arr;
    for (auto &d : batch) {
        arr.items.emplace_back(std::move(d));
    }
    Document cursor = {{"id", std::int64_t(0)}, {"ns", ns}, {"firstBatch", std::move(arr)}};
    return {{"cursor", std::move(cursor)}, {"ok", 1.0}};
}

Document hello_reply(const Context &ctx)
{
    bool legacy = ctx.behavior == Behavior::LegacyOnly;
    return {{"ismaster", true}, {"isWritablePrimary", true}, {"maxBsonObjectSize", std::int32_t(16777216)},
        {"maxMessageSizeBytes", std::int32_t(48000000)}, {"localTime", std::int64_t(0)},
        {"maxWireVersion", std::int32_t(legacy ? 5 : 17)}, {"minWireVersion", std::int32_t(0)},
        {"readOnly", false}, {"ok", 1.0}};
}

Document run_command(const Context &ctx, const Document &cmd, const std::string &db)
{
    const std::string &name = cmd.front().key;
    if (name == "hello" || name == "isMaster" || name == "ismaster") {
        return hello_reply(ctx);
    }
    if (ctx.data.requires_auth) {
        return error_doc(13, "Unauthorized", "command " + name + " requires authentication");
    }
    if (name == "listDatabases") {
        bson::Array dbs;
        for (const auto *ns : ctx.visible()) {
            dbs.items.emplace_back(Document{{"name", ns->name}, {"sizeOnDisk", std::int64_t(8192)}, {"empty", false}});
        }
        return {{"databases", std::move(dbs)}, {"totalSize", std::int64_t(8192)}, {"ok", 1.0}};
    }
    const DataNamespace *ns = ctx.find(db);
    if (name == "listCollections") {
        std::vector<Document> batch;
        if (ns != nullptr) {
            for (const auto &t : ns->tables) {
                batch.push_back({{"name", t.name}, {"type", "collection"}});
            }
        }
        return cursor_doc(db + ".$cmd.listCollections", std::move(batch));
    }
    if (name == "find") {
        auto coll = bson::get_string(cmd, "find");
        auto limit = bson::get_number(cmd, "limit");
        std::vector<Document> batch;
        if (ns != nullptr && coll) {
            for (const auto &t : ns->tables) {
                if (t.name != *coll) {
                    continue;
                }
                for (const auto &r : t.rows) {
                    if (limit && *limit > 0 && batch.size() >= static_cast<std::size_t>(*limit)) {
                        break;
                    }
                    batch.push_back(to_document(r));
                }
            }
        }
        return cursor_doc(db + "." + coll.value_or(""), std::move(batch));
    }
    return error_doc(59, "CommandNotFound", "no such command: '" + name + "'");
}

} // namespace

void serve_mongodb(Context &ctx, Peer &peer)
{
    std::int32_t next_id = 1;
    for (;;) {
        auto m = peer.next([](ByteView b) { return mongo::decode(b); },
            [](const mongo::Message &msg) { return describe_mongo(msg); });
        if (!m) {
            return;
        }
        const Document *cmd = mongo::command_document(*m);
        mongo::Message reply;
        reply.request_id = next_id++;
        reply.response_to = m->request_id;
        if (const auto *q = std::get_if<mongo::OpQuery>(&m->body)) {
            std::string db = q->full_collection_name.substr(0, q->full_collection_name.find('.'));
            Document body = cmd == nullptr || cmd->empty()
                ? error_doc(2, "BadValue", "empty command")
                : run_command(ctx, *cmd, db);
            reply.body = mongo::OpReply{8, 0, 0, {std::move(body)}};
        } else if (std::holds_alternative<mongo::OpMsg>(m->body)) {
            if (ctx.behavior == Behavior::LegacyOnly) {
                return; // servers predating OP_MSG drop the connection
            }
            Document body;
            if (cmd == nullptr || cmd->empty()) {
                body = error_doc(2, "BadValue", "empty command");
            } else {
                body = run_command(ctx, *cmd, bson::get_string(*cmd, "$db").value_or("admin"));
            }
            reply.body = mongo::OpMsg{0, std::move(body), {}};
        } else {
            return;
        }
        peer.send(mongo::encode(reply));
    }
}

} // namespace exposcan::fleet::detail
