#include <charconv>

#include "emulator.hpp"
#include "exposcan/allowlist.hpp"
#include "exposcan/codec/http.hpp"

namespace exposcan::fleet::detail {

namespace {

using oj = nlohmann::ordered_json;

struct Route {
    std::vector<std::string> segments;
    std::map<std::string, std::string> query;
};

Route parse_target(const std::string &target)
{
    Route r;
    auto q = target.find('?');
    std::string path = target.substr(0, q);
    std::size_t i = 1;
    while (i <= path.size()) {
        auto j = path.find('/', i);
        if (j == std::string::npos) {
            j = path.size();
        }
        if (j > i) {
            r.segments.push_back(http::url_decode(path.substr(i, j - i)));
        }
        i = j + 1;
    }
    if (q != std::string::npos) {
        std::string rest = target.substr(q + 1);
        std::size_t k = 0;
        while (k < rest.size()) {
            auto amp = rest.find('&', k);
            if (amp == std::string::npos) {
                amp = rest.size();
            }
            std::string pair = rest.substr(k, amp - k);
            auto eq = pair.find('=');
            r.query[http::url_decode(pair.substr(0, eq))] =
                eq == std::string::npos ? "" : http::url_decode(pair.substr(eq + 1));
            k = amp + 1;
        }
    }
    return r;
}

std::size_t size_param(const Route &r, const std::string &name, std::size_t fallback)
{
    auto it = r.query.find(name);
    if (it == r.query.end()) {
        return fallback;
    }
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    return ec == std::errc() && p == it->second.data() + it->second.size() ? v : fallback;
}

http::Response json_response(int status, const oj &body, http::Headers extra = {})
{
    http::Response r;
    r.status = status;
    r.reason = http::reason_phrase(status);
    r.headers = {{"Content-Type", "application/json"}};
    r.headers.insert(r.headers.end(), extra.begin(), extra.end());
    r.body = body.dump();
    return r;
}

std::size_t rows_in(const DataNamespace &ns)
{
    std::size_t n = 0;
    for (const auto &t : ns.tables) {
        n += t.rows.size();
    }
    return n;
}

oj record_object(const DataRecord &r)
{
    oj o = oj::object();
    for (const auto &[k, v] : r) {
        o[k] = v;
    }
    return o;
}

template <typename Handle> void serve_http(Context &ctx, Peer &peer, Handle &&handle)
{
    for (;;) {
        auto req = peer.next([](ByteView b) { return http::decode_request(b); },
            [](const http::Request &r) { return describe_http(r); });
        if (!req) {
            return;
        }
        http::Response resp;
        if (req->method != "GET") {
            resp = json_response(405, {{"error", "method not allowed"}});
        } else {
            resp = handle(ctx, parse_target(req->target));
        }
        auto conn = http::header(req->headers, "Connection");
        bool close = conn && upper(*conn) == "CLOSE";
        if (close) {
            resp.headers.emplace_back("Connection", "close");
        }
        peer.send(http::encode(resp));
        if (close) {
            return;
        }
    }
}

http::Response elasticsearch(const Context &ctx, const Route &route)
{
    if (ctx.data.requires_auth) {
        oj err = {{"error", {{"type", "security_exception"}, {"reason", "missing authentication credentials"}}},
            {"status", 401}};
        return json_response(401, err, {{"WWW-Authenticate", "Basic realm=\"security\" charset=\"UTF-8\""}});
    }
    const auto &seg = route.segments;
    if (seg.empty()) {
        oj body = {{"name", "mock-node"}, {"cluster_name", "mock-cluster"}, {"cluster_uuid", "mock-cluster-uuid"},
            {"version", {{"number", ctx.data.version}, {"build_flavor", "default"}, {"lucene_version", "8.11.1"}}},
            {"tagline", "You Know, for Search"}};
        return json_response(200, body);
    }
    if (seg.size() == 2 && seg[0] == "_cat" && seg[1] == "indices") {
        oj list = oj::array();
        for (const auto *ns : ctx.visible()) {
            list.push_back({{"health", "green"}, {"status", "open"}, {"index", ns->name}, {"pri", "1"}, {"rep", "0"},
                {"docs.count", std::to_string(rows_in(*ns))}});
        }
        return json_response(200, list);
    }
    if (seg.size() == 2 && seg[1] == "_search") {
        const DataNamespace *ns = ctx.find(seg[0]);
        if (ns == nullptr) {
            oj err = {{"error", {{"type", "index_not_found_exception"}, {"reason", "no such index [" + seg[0] + "]"}}},
                {"status", 404}};
            return json_response(404, err);
        }
        std::size_t size = size_param(route, "size", 10);
        oj hits = oj::array();
        std::size_t id = 0;
        for (const auto &t : ns->tables) {
            for (const auto &r : t.rows) {
                ++id;
                if (hits.size() < size) {
                    hits.push_back({{"_index", ns->name}, {"_id", std::to_string(id)}, {"_score", 1.0},
                        {"_source", record_object(r)}});
                }
            }
        }
        oj body = {{"took", 1}, {"timed_out", false},
            {"hits", {{"total", {{"value", rows_in(*ns)}, {"relation", "eq"}}}, {"hits", std::move(hits)}}}};
        return json_response(200, body);
    }
    oj err = {{"error", {{"type", "illegal_argument_exception"}, {"reason", "unsupported request"}}}, {"status", 400}};
    return json_response(400, err);
}

http::Response couchdb(const Context &ctx, const Route &route)
{
    if (ctx.data.requires_auth) {
        return json_response(401, {{"error", "unauthorized"}, {"reason", "Authentication required."}},
            {{"WWW-Authenticate", "Basic realm=\"server\""}});
    }
    const auto &seg = route.segments;
    if (seg.empty()) {
        oj body = {{"couchdb", "Welcome"}, {"version", ctx.data.version},
            {"vendor", {{"name", "The Apache Software Foundation"}}}};
        return json_response(200, body);
    }
    if (seg.size() == 1 && seg[0] == "_all_dbs") {
        oj list = oj::array();
        for (const auto *ns : ctx.visible()) {
            list.push_back(ns->name);
        }
        return json_response(200, list);
    }
    if (seg.size() == 2 && seg[1] == "_all_docs") {
        const DataNamespace *ns = ctx.find(seg[0]);
        if (ns == nullptr) {
            return json_response(404, {{"error", "not_found"}, {"reason", "Database does not exist."}});
        }
        std::size_t limit = size_param(route, "limit", static_cast<std::size_t>(-1));
        bool docs = route.query.count("include_docs") && route.query.at("include_docs") == "true";
        oj rows = oj::array();
        std::size_t id = 0;
        for (const auto &t : ns->tables) {
            for (const auto &r : t.rows) {
                ++id;
                if (rows.size() >= limit) {
                    continue;
                }
                std::string doc_id = "doc-" + std::to_string(id);
                std::string rev = "1-" + std::to_string(1000 + id);
                oj row = {{"id", doc_id}, {"key", doc_id}, {"value", {{"rev", rev}}}};
                if (docs) {
                    oj doc = {{"_id", doc_id}, {"_rev", rev}};
                    for (const auto &[k, v] : r) {
                        doc[k] = v;
                    }
                    row["doc"] = std::move(doc);
                }
                rows.push_back(std::move(row));
            }
        }
        return json_response(200, {{"total_rows", rows_in(*ns)}, {"offset", 0}, {"rows", std::move(rows)}});
    }
    return json_response(400, {{"error", "bad_request"}, {"reason", "Unsupported request."}});
}

} // namespace

void serve_elasticsearch(Context &ctx, Peer &peer) { serve_http(ctx, peer, elasticsearch); }

void serve_couchdb(Context &ctx, Peer &peer) { serve_http(ctx, peer, couchdb); }

} // namespace exposcan::fleet::detail
