#include "common.hpp"
#include "exposcan/codec/mongo_wire.hpp"

namespace exposcan {

namespace {

using bson::Document;

bool is_ok(const Document &d)
{
    auto ok = bson::get_number(d, "ok");
    return ok && *ok == 1.0;
}

bool is_auth_failure(const Document &d)
{
    auto code = bson::get_number(d, "code");
    if (code && (*code == 13 || *code == 18)) {
        return true;
    }
    auto name = bson::get_string(d, "codeName");
    auto msg = bson::get_string(d, "errmsg");
    return (name && *name == "Unauthorized") || (msg && detail::contains_ci(*msg, "auth"));
}

class MongoClient {
public:
    MongoClient(ProbeSession &session, net::Stream stream, bool legacy)
        : session_(session), stream_(std::move(stream)), legacy_(legacy)
    {}

    Document run(Document cmd, const std::string &db)
    {
        mongo::Message m;
        m.request_id = next_id_++;
        if (legacy_) {
            mongo::OpQuery q;
            q.full_collection_name = db + ".$cmd";
            q.number_to_return = -1;
            q.query = std::move(cmd);
            m.body = std::move(q);
        } else {
            cmd.push_back({"$db", db});
            m.body = mongo::OpMsg{0, std::move(cmd), {}};
        }
        session_.send(stream_, mongo::encode(m));
        auto reply = stream_.read_frame([](ByteView b) { return mongo::decode(b); });
        if (const auto *msg = std::get_if<mongo::OpMsg>(&reply.body)) {
            return msg->body;
        }
        if (const auto *rep = std::get_if<mongo::OpReply>(&reply.body)) {
            if (!rep->documents.empty()) {
                return rep->documents.front();
            }
        }
        throw_malformed(0, "reply carries no document");
    }

    [[nodiscard]] bool legacy() const { return legacy_; }

private:
    ProbeSession &session_;
    net::Stream stream_;
    bool legacy_;
    std::int32_t next_id_ = 1;
};

Document hello_command(bool legacy)
{
    return {{legacy ? "isMaster" : "hello", std::int32_t(1)}};
}

// hello over OP_MSG, falling back to a fresh connection speaking OP_QUERY.
std::pair<MongoClient, Document> handshake(ProbeSession &session, net::Stream first)
{
    try {
        MongoClient client(session, std::move(first), false);
        Document reply = client.run(hello_command(false), "admin");
        if (is_ok(reply) || is_auth_failure(reply)) {
            return {std::move(client), std::move(reply)};
        }
    } catch (const net::NetError &e) {
        if (e.kind() == net::NetError::Kind::BudgetExhausted) {
            throw;
        }
    } catch (const DecodeError &) {
    }
    MongoClient client(session, session.open(), true);
    Document reply = client.run(hello_command(true), "admin");
    return {std::move(client), std::move(reply)};
}

void record_hello(Harvest &h, const Document &reply, bool legacy)
{
    h.server_info["wire"] = legacy ? "op_query" : "op_msg";
    for (const char *key : {"maxWireVersion", "minWireVersion"}) {
        if (auto n = bson::get_number(reply, key)) {
            h.server_info[key] = std::to_string(static_cast<long long>(*n));
        }
    }
    for (const char *key : {"isWritablePrimary", "ismaster"}) {
        if (auto b = bson::get_bool(reply, key)) {
            h.server_info[key] = *b ? "true" : "false";
        }
    }
    for (const char *key : {"msg", "setName", "version"}) {
        if (auto s = bson::get_string(reply, key)) {
            h.server_info[key] = *s;
        }
    }
}

std::vector<Document> first_batch(const Document &reply)
{
    std::vector<Document> out;
    const Document *cursor = bson::get_document(reply, "cursor");
    const bson::Array *batch = cursor != nullptr ? bson::get_array(*cursor, "firstBatch") : nullptr;
    if (batch != nullptr) {
        for (const auto &v : batch->items) {
            if (const auto *d = v.get_if<Document>()) {
                out.push_back(*d);
            }
        }
    }
    return out;
}

bool cursor_exhausted(const Document &reply)
{
    const Document *cursor = bson::get_document(reply, "cursor");
    auto id = cursor != nullptr ? bson::get_number(*cursor, "id") : std::nullopt;
    return !id || *id == 0;
}

} // namespace

ConnStatus check_mongodb(ProbeSession &session, net::Stream &stream)
{
    auto [client, reply] = handshake(session, std::move(stream));
    if (is_auth_failure(reply) && !is_ok(reply)) {
        return ConnStatus::AuthRequired;
    }
    return bson::find(reply, "ok") != nullptr ? ConnStatus::ProtocolOk : ConnStatus::TcpOnly;
}

Harvest probe_mongodb(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "mongodb";
        auto [client, hello] = handshake(session, session.open());
        record_hello(h, hello, client.legacy());
        if (!is_ok(hello)) {
            if (is_auth_failure(hello)) {
                h.auth_blocked = true;
            } else {
                h.notes.push_back("hello failed");
            }
            return;
        }
        Document dbs = client.run({{"listDatabases", std::int32_t(1)}, {"nameOnly", true}}, "admin");
        if (!is_ok(dbs)) {
            if (is_auth_failure(dbs)) {
                h.auth_blocked = true;
                if (auto msg = bson::get_string(dbs, "errmsg")) {
                    h.server_info["auth_error"] = *msg;
                }
            } else {
                h.notes.push_back("listDatabases failed");
            }
            return;
        }
        std::vector<std::string> names;
        if (const bson::Array *list = bson::get_array(dbs, "databases")) {
            for (const auto &v : list->items) {
                if (const auto *d = v.get_if<Document>()) {
                    if (auto name = bson::get_string(*d, "name")) {
                        names.push_back(*name);
                    }
                }
            }
        }
        const auto &budget = session.budget();
        auto user = detail::user_namespaces(h, ServiceKind::MongoDB, names, budget.max_namespaces);
        const auto limit = static_cast<std::int32_t>(budget.max_samples_per_namespace);
        bool complete = true;
        for (const auto &db : user) {
            if (h.namespaces.size() >= budget.max_namespaces) {
                h.server_info["namespaces_truncated"] = "true";
                break;
            }
            Document colls = client.run({{"listCollections", std::int32_t(1)}, {"nameOnly", true}}, db);
            if (!is_ok(colls)) {
                h.notes.push_back("listCollections failed on " + db);
                complete = false;
                continue;
            }
            for (const auto &c : first_batch(colls)) {
                auto coll = bson::get_string(c, "name");
                if (!coll || coll->rfind("system.", 0) == 0) {
                    continue;
                }
                if (h.namespaces.size() >= budget.max_namespaces) {
                    h.server_info["namespaces_truncated"] = "true";
                    break;
                }
                Document found = client.run(
                    {{"find", *coll}, {"limit", limit}, {"singleBatch", true}}, db);
                NamespaceSample ns{db + "." + *coll, std::nullopt, {}};
                if (!is_ok(found)) {
                    h.notes.push_back("find failed on " + ns.name);
                    complete = false;
                } else {
                    auto docs = first_batch(found);
                    if (docs.size() < budget.max_samples_per_namespace && cursor_exhausted(found)) {
                        ns.record_count = docs.size();
                    }
                    for (const auto &d : docs) {
                        if (ns.samples.size() < budget.max_samples_per_namespace) {
                            ns.samples.push_back(sample_text(bson::to_json_text(d)));
                        }
                    }
                }
                h.namespaces.push_back(std::move(ns));
            }
        }
        if (complete) {
            detail::settle_empty(h);
        }
    });
}

} // namespace exposcan
