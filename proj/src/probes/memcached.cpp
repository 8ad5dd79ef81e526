#include <map>

#include "common.hpp"
#include "exposcan/codec/memcached.hpp"

namespace exposcan {

namespace {

using memcached::Line;

Line read_line(net::Stream &stream)
{
    return stream.read_frame([](ByteView b) { return memcached::decode_line(b); });
}

bool is_auth_refusal(const Line &l)
{
    return (l.kind == Line::Kind::ClientError || l.kind == Line::Kind::ServerError)
        && detail::contains_ci(l.text, "auth");
}

struct StatsReply {
    std::vector<std::pair<std::string, std::string>> stats;
    std::optional<Line> error;
};

// Reads STAT lines up to END, or a single error line.
StatsReply read_stats(net::Stream &stream)
{
    StatsReply out;
    for (;;) {
        Line l = read_line(stream);
        if (l.kind == Line::Kind::End) {
            return out;
        }
        if (l.kind == Line::Kind::Stat) {
            out.stats.emplace_back(l.key, l.text);
            continue;
        }
        out.error = l;
        return out;
    }
}

} // namespace

ConnStatus check_memcached(ProbeSession &session, net::Stream &stream)
{
    session.send(stream, std::string_view("stats\r\n"));
    Line first = read_line(stream);
    if (is_auth_refusal(first)) {
        return ConnStatus::AuthRequired;
    }
    return first.kind == Line::Kind::Stat || first.kind == Line::Kind::End ? ConnStatus::ProtocolOk
                                                                          : ConnStatus::TcpOnly;
}

Harvest probe_memcached(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "memcached";
        auto stream = session.open();
        session.send(stream, std::string_view("stats\r\n"));
        auto stats = read_stats(stream);
        if (stats.error) {
            if (is_auth_refusal(*stats.error)) {
                h.auth_blocked = true;
                h.server_info["auth_error"] = stats.error->text;
            } else {
                h.notes.push_back("stats refused");
            }
            return;
        }
        std::optional<std::uint64_t> curr_items;
        for (const auto &[k, v] : stats.stats) {
            if (k == "version" || k == "curr_items" || k == "total_items" || k == "pointer_size"
                || k == "curr_connections") {
                h.server_info[k] = v;
            }
            if (k == "curr_items") {
                try {
                    curr_items = std::stoull(v);
                } catch (const std::exception &) {
                }
            }
        }
        if (curr_items && *curr_items == 0) {
            h.empty = true;
            return;
        }

        session.send(stream, std::string_view("stats items\r\n"));
        auto items = read_stats(stream);
        if (items.error) {
            h.notes.push_back("stats items refused");
            return;
        }
        // items:<slab>:number <count>
        std::map<int, std::uint64_t> slabs;
        for (const auto &[k, v] : items.stats) {
            auto first = k.find(':');
            auto last = k.rfind(':');
            if (k.rfind("items:", 0) != 0 || first == last || k.substr(last + 1) != "number") {
                continue;
            }
            try {
                slabs[std::stoi(k.substr(first + 1, last - first - 1))] = std::stoull(v);
            } catch (const std::exception &) {
            }
        }
        const auto &budget = session.budget();
        std::vector<std::string> names;
        for (const auto &[id, count] : slabs) {
            names.push_back("slab:" + std::to_string(id));
        }
        if (names.empty()) {
            h.notes.push_back("no slabs reported");
            return;
        }
        auto keep = detail::user_namespaces(h, ServiceKind::Memcached, names, budget.max_namespaces);
        const std::string per_slab = std::to_string(budget.max_samples_per_namespace);
        std::vector<NamespaceSample> found;
        for (const auto &name : keep) {
            int id = std::stoi(name.substr(5));
            session.send(stream, "stats cachedump " + std::to_string(id) + " " + per_slab + "\r\n");
            std::vector<std::string> keys;
            for (;;) {
                Line l = read_line(stream);
                if (l.kind == Line::Kind::End) {
                    break;
                }
                if (l.kind != Line::Kind::Item) {
                    h.notes.push_back("stats cachedump refused");
                    return;
                }
                if (keys.size() < budget.max_samples_per_namespace && memcached::valid_key(l.key)) {
                    keys.push_back(l.key);
                }
            }
            NamespaceSample ns{name, slabs[id], {}};
            if (!keys.empty()) {
                std::string request = "get";
                for (const auto &k : keys) {
                    request += " " + k;
                }
                session.send(stream, request + "\r\n");
                for (;;) {
                    Line l = read_line(stream);
                    if (l.kind == Line::Kind::End) {
                        break;
                    }
                    if (l.kind != Line::Kind::Value) {
                        h.notes.push_back("get failed");
                        break;
                    }
                    auto data = stream.read_frame(
                        [&](ByteView b) { return memcached::decode_data_block(b, l.bytes); });
                    ns.samples.push_back(sample_text(l.key + " = " + data));
                }
            }
            found.push_back(std::move(ns));
            h.namespaces = found;
        }
        h.namespaces = std::move(found);
        detail::settle_empty(h);
    });
}

} // namespace exposcan
