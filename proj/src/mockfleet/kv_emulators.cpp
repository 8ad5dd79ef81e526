#include <charconv>

#include "emulator.hpp"
#include "exposcan/codec/memcached.hpp"
#include "exposcan/codec/resp.hpp"

namespace exposcan::fleet::detail {

namespace {

std::vector<const DataRecord *> all_records(const Context &ctx)
{
    std::vector<const DataRecord *> out;
    for (const auto &ns : ctx.data.namespaces) {
        for (const auto &t : ns.tables) {
            for (const auto &r : t.rows) {
                if (!r.empty() && r.front().first == "_key") {
                    out.push_back(&r);
                }
            }
        }
    }
    return out;
}

const DataRecord *lookup(const std::vector<const DataRecord *> &records, std::string_view key)
{
    for (const auto *r : records) {
        if (r->front().second == key) {
            return r;
        }
    }
    return nullptr;
}

std::optional<long long> number(std::string_view s)
{
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::string redis_info(const Context &ctx, std::size_t keys)
{
    std::string info = "# Server\r\nredis_version:" + ctx.data.version
        + "\r\nredis_mode:standalone\r\nos:Linux 5.15.0 x86_64\r\narch_bits:64\r\ntcp_port:6379\r\n"
          "\r\n# Replication\r\nrole:master\r\nconnected_slaves:0\r\n\r\n# Keyspace\r\n";
    if (keys > 0) {
        info += "db0:keys=" + std::to_string(keys) + ",expires=0,avg_ttl=0\r\n";
    }
    return info;
}

resp::Value wrong_type()
{
    return resp::Value::error("WRONGTYPE Operation against a key holding the wrong kind of value");
}

resp::Value redis_reply(const Context &ctx, const std::vector<const DataRecord *> &records,
    const std::vector<std::string> &args)
{
    std::string verb = upper(args[0]);
    if (ctx.data.requires_auth) {
        return resp::Value::error("NOAUTH Authentication required.");
    }
    if (verb == "PING") {
        return resp::Value::simple("PONG");
    }
    if (verb == "INFO") {
        return resp::Value::bulk(redis_info(ctx, records.size()));
    }
    if (verb == "DBSIZE") {
        return resp::Value::number(static_cast<std::int64_t>(records.size()));
    }
    if (verb == "SCAN" && args.size() >= 2) {
        auto cursor = number(args[1]);
        std::size_t count = 10;
        if (args.size() == 4 && upper(args[2]) == "COUNT") {
            if (auto n = number(args[3]); n && *n > 0) {
                count = static_cast<std::size_t>(*n);
            }
        }
        if (!cursor || *cursor < 0) {
            return resp::Value::error("ERR invalid cursor");
        }
        std::vector<resp::Value> keys;
        std::size_t at = static_cast<std::size_t>(*cursor);
        for (; at < records.size() && keys.size() < count; ++at) {
            keys.push_back(resp::Value::bulk(records[at]->front().second));
        }
        std::string next = at >= records.size() ? "0" : std::to_string(at);
        return resp::Value::array({resp::Value::bulk(next), resp::Value::array(std::move(keys))});
    }
    if (args.size() < 2) {
        return resp::Value::error("ERR wrong number of arguments for '" + args[0] + "' command");
    }
    const DataRecord *r = lookup(records, args[1]);
    if (verb == "TYPE") {
        return resp::Value::simple(r == nullptr ? "none" : is_plain(*r) ? "string" : "hash");
    }
    if (verb == "GET") {
        if (r == nullptr) {
            return resp::Value::null();
        }
        return is_plain(*r) ? resp::Value::bulk((*r)[1].second) : wrong_type();
    }
    if (verb == "HGETALL") {
        if (r == nullptr) {
            return resp::Value::array({});
        }
        if (is_plain(*r)) {
            return wrong_type();
        }
        std::vector<resp::Value> flat;
        for (std::size_t i = 1; i < r->size(); ++i) {
            flat.push_back(resp::Value::bulk((*r)[i].first));
            flat.push_back(resp::Value::bulk((*r)[i].second));
        }
        return resp::Value::array(std::move(flat));
    }
    if (verb == "SMEMBERS" || verb == "LRANGE" || verb == "ZRANGE") {
        return r == nullptr ? resp::Value::array({}) : wrong_type();
    }
    return resp::Value::error("ERR unknown command '" + args[0] + "'");
}

} // namespace

void serve_redis(Context &ctx, Peer &peer)
{
    auto records = all_records(ctx);
    for (;;) {
        auto cmd = peer.next([](ByteView b) { return resp::decode(b); },
            [](const resp::Value &v) { return resp::describe_command(v); });
        if (!cmd) {
            return;
        }
        std::vector<std::string> args;
        bool ok = cmd->type == resp::Type::Array && !cmd->elements.empty();
        for (const auto &e : cmd->elements) {
            ok = ok && e.type == resp::Type::BulkString;
            args.push_back(e.text);
        }
        if (!ok) {
            peer.send(resp::encode(resp::Value::error("ERR Protocol error: expected a command array")));
            continue;
        }
        peer.send(resp::encode(redis_reply(ctx, records, args)));
    }
}

namespace {

struct Slab {
    int id = 0;
    std::vector<const DataRecord *> items;
};

std::vector<Slab> slabs(const Context &ctx)
{
    std::vector<Slab> out;
    for (const auto &ns : ctx.data.namespaces) {
        Slab s;
        s.id = static_cast<int>(out.size()) + 1;
        if (ns.name.rfind("slab:", 0) == 0) {
            if (auto n = number(std::string_view(ns.name).substr(5)); n && *n > 0) {
                s.id = static_cast<int>(*n);
            }
        }
        for (const auto &t : ns.tables) {
            for (const auto &r : t.rows) {
                if (!r.empty() && r.front().first == "_key") {
                    s.items.push_back(&r);
                }
            }
        }
        if (!s.items.empty()) {
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') {
            ++i;
        }
        std::size_t j = line.find(' ', i);
        if (j == std::string::npos) {
            j = line.size();
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

using memcached::Line;

Line make_line(Line::Kind kind, std::string key, std::string text = {})
{
    Line l;
    l.kind = kind;
    l.key = std::move(key);
    l.text = std::move(text);
    return l;
}

std::string stat(const std::string &k, const std::string &v) { return memcached::encode_line(make_line(Line::Kind::Stat, k, v)); }

} // namespace

void serve_memcached(Context &ctx, Peer &peer)
{
    auto all = slabs(ctx);
    std::size_t items = 0;
    for (const auto &s : all) {
        items += s.items.size();
    }
    const std::string end = "END\r\n";
    for (;;) {
        auto line = peer.next([](ByteView b) { return memcached::decode_request_line(b); },
            [](const std::string &l) { return l; });
        if (!line) {
            return;
        }
        auto w = split(*line);
        if (ctx.data.requires_auth) {
            peer.send(std::string_view("CLIENT_ERROR unauthenticated: authentication required\r\n"));
            continue;
        }
        if (w.size() == 1 && w[0] == "stats") {
            std::string out = stat("pid", "4242") + stat("version", ctx.data.version) + stat("pointer_size", "64")
                + stat("curr_connections", "2") + stat("curr_items", std::to_string(items))
                + stat("total_items", std::to_string(items)) + end;
            peer.send(out);
        } else if (w.size() == 2 && w[0] == "stats" && w[1] == "items") {
            std::string out;
            for (const auto &s : all) {
                std::string prefix = "items:" + std::to_string(s.id) + ":";
                out += stat(prefix + "number", std::to_string(s.items.size())) + stat(prefix + "age", "120")
                    + stat(prefix + "evicted", "0");
            }
            peer.send(out + end);
        } else if (w.size() == 4 && w[0] == "stats" && w[1] == "cachedump") {
            if (ctx.behavior == Behavior::CachedumpError) {
                peer.send(std::string_view("ERROR\r\n"));
                continue;
            }
            auto id = number(w[2]);
            auto limit = number(w[3]);
            std::string out;
            for (const auto &s : all) {
                if (!id || s.id != *id) {
                    continue;
                }
                for (std::size_t i = 0; i < s.items.size() && (!limit || *limit <= 0 || i < static_cast<std::size_t>(*limit)); ++i) {
                    Line l = make_line(Line::Kind::Item, s.items[i]->front().second);
                    l.bytes = record_value(*s.items[i]).size();
                    out += memcached::encode_line(l);
                }
            }
            peer.send(out + end);
        } else if (w.size() >= 2 && (w[0] == "get" || w[0] == "gets")) {
            std::string out;
            for (std::size_t i = 1; i < w.size(); ++i) {
                for (const auto &s : all) {
                    if (const DataRecord *r = lookup(s.items, w[i])) {
                        std::string value = record_value(*r);
                        Line l = make_line(Line::Kind::Value, w[i]);
                        l.bytes = value.size();
                        out += memcached::encode_line(l) + value + "\r\n";
                        break;
                    }
                }
            }
            peer.send(out + end);
        } else {
            peer.send(std::string_view("ERROR\r\n"));
        }
    }
}

} // namespace exposcan::fleet::detail
