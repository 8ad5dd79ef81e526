#include <sstream>

#include "common.hpp"
#include "exposcan/codec/resp.hpp"

namespace exposcan {

namespace {

resp::Value call(ProbeSession &session, net::Stream &stream, const std::vector<std::string> &parts)
{
    session.send(stream, resp::encode(resp::command(parts)));
    return stream.read_frame([](ByteView b) { return resp::decode(b); });
}

bool is_auth_error(const resp::Value &v)
{
    return v.is_error()
        && (v.text.rfind("NOAUTH", 0) == 0 || detail::contains_ci(v.text, "auth")
            || v.text.rfind("WRONGPASS", 0) == 0);
}

nlohmann::json to_json_value(const resp::Value &v)
{
    switch (v.type) {
    case resp::Type::SimpleString:
    case resp::Type::BulkString:
    case resp::Type::Error: return v.text;
    case resp::Type::Integer: return v.integer;
    case resp::Type::NullBulk:
    case resp::Type::NullArray: return nullptr;
    case resp::Type::Array: {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto &e : v.elements) {
            arr.push_back(to_json_value(e));
        }
        return arr;
    }
    }
    return nullptr;
}

// HGETALL replies are flat field/value arrays.
nlohmann::json hash_object(const resp::Value &v)
{
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i + 1 < v.elements.size(); i += 2) {
        obj[v.elements[i].text] = to_json_value(v.elements[i + 1]);
    }
    return obj;
}

void parse_info(Harvest &h, const std::string &info)
{
    static const std::vector<std::string> keep = {
        "redis_version", "redis_mode", "os", "arch_bits", "role", "tcp_port"};
    std::istringstream in(info);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        auto colon = line.find(':');
        if (colon == std::string::npos || line[0] == '#') {
            continue;
        }
        std::string key = line.substr(0, colon);
        if (std::find(keep.begin(), keep.end(), key) != keep.end()) {
            h.server_info[key] = line.substr(colon + 1);
        }
    }
}

} // namespace

ConnStatus check_redis(ProbeSession &session, net::Stream &stream)
{
    auto reply = call(session, stream, {"PING"});
    if (is_auth_error(reply)) {
        return ConnStatus::AuthRequired;
    }
    if (reply.type == resp::Type::SimpleString || reply.type == resp::Type::BulkString) {
        return ConnStatus::ProtocolOk;
    }
    return reply.is_error() ? ConnStatus::ProtocolOk : ConnStatus::TcpOnly;
}

Harvest probe_redis(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "redis";
        auto stream = session.open();
        auto pong = call(session, stream, {"PING"});
        if (is_auth_error(pong)) {
            h.auth_blocked = true;
            h.server_info["auth_error"] = pong.text;
            return;
        }
        auto info = call(session, stream, {"INFO"});
        if (is_auth_error(info)) {
            h.auth_blocked = true;
            h.server_info["auth_error"] = info.text;
            return;
        }
        if (info.type == resp::Type::BulkString) {
            parse_info(h, info.text);
        }
        auto dbsize = call(session, stream, {"DBSIZE"});
        if (dbsize.type != resp::Type::Integer) {
            h.notes.push_back("DBSIZE did not return an integer");
            return;
        }
        NamespaceSample ns{"db0", static_cast<std::uint64_t>(std::max<std::int64_t>(dbsize.integer, 0)), {}};
        if (dbsize.integer <= 0) {
            h.namespaces.push_back(std::move(ns));
            detail::settle_empty(h);
            return;
        }
        h.namespaces.push_back(ns);
        const std::size_t want = session.budget().max_samples_per_namespace;
        std::vector<std::string> keys;
        std::string cursor = "0";
        const std::string count = std::to_string(std::min<std::size_t>(std::max<std::size_t>(want, 10), 1000));
        for (int page = 0; page < 4 && keys.size() < want; ++page) {
            auto reply = call(session, stream, {"SCAN", cursor, "COUNT", count});
            if (reply.type != resp::Type::Array || reply.elements.size() != 2
                || reply.elements[1].type != resp::Type::Array) {
                h.notes.push_back("unexpected SCAN reply");
                break;
            }
            for (const auto &k : reply.elements[1].elements) {
                if (keys.size() < want) {
                    keys.push_back(k.text);
                }
            }
            cursor = reply.elements[0].text;
            if (cursor == "0") {
                break;
            }
        }
        const std::string stop = std::to_string(want - 1);
        for (const auto &key : keys) {
            auto type = call(session, stream, {"TYPE", key});
            resp::Value value;
            nlohmann::json rendered;
            if (type.text == "string") {
                value = call(session, stream, {"GET", key});
                rendered = to_json_value(value);
            } else if (type.text == "list") {
                value = call(session, stream, {"LRANGE", key, "0", stop});
                rendered = to_json_value(value);
            } else if (type.text == "set") {
                value = call(session, stream, {"SMEMBERS", key});
                rendered = to_json_value(value);
            } else if (type.text == "hash") {
                value = call(session, stream, {"HGETALL", key});
                rendered = hash_object(value);
            } else if (type.text == "zset") {
                value = call(session, stream, {"ZRANGE", key, "0", stop});
                rendered = to_json_value(value);
            } else {
                h.notes.push_back("skipped key of type " + type.text);
                continue;
            }
            std::string text = rendered.is_string() ? rendered.get<std::string>() : detail::dump_json(rendered);
            h.namespaces.back().samples.push_back(sample_text(key + " = " + text));
        }
        detail::settle_empty(h);
    });
}

} // namespace exposcan
