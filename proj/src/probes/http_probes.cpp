#include <optional>

#include "common.hpp"
#include "exposcan/codec/http.hpp"

namespace exposcan {

namespace {

// Sequential GETs over one keep-alive connection, reconnecting when the
// server closes it.
class HttpClient {
public:
    explicit HttpClient(ProbeSession &session) : session_(session) {}
    HttpClient(ProbeSession &session, net::Stream stream) : session_(session), stream_(std::move(stream)) {}

    http::Response get(const std::string &path)
    {
        if (!stream_) {
            stream_.emplace(session_.open());
        }
        const auto &t = session_.target();
        http::Request req;
        req.target = path;
        req.headers = {{"Host", t.address + ":" + std::to_string(t.port)},
            {"Accept", "application/json"}, {"User-Agent", "exposcan"}};
        session_.send(*stream_, http::encode(req));
        http::Response resp = read_response(*stream_);
        auto conn = http::header(resp.headers, "Connection");
        if (conn && detail::lower(*conn) == "close") {
            stream_.reset();
        }
        return resp;
    }

private:
    static http::Response read_response(net::Stream &s)
    {
        auto &buf = s.buffer();
        bool eof = false;
        for (;;) {
            if (!buf.empty()) {
                try {
                    auto d = http::decode_response(ByteView(buf), eof);
                    buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(d.consumed));
                    return std::move(d.value);
                } catch (const DecodeError &e) {
                    if (!e.truncated() || eof) {
                        throw;
                    }
                }
            }
            if (eof) {
                throw net::NetError(net::NetError::Kind::Closed, "peer closed before responding");
            }
            eof = s.fill() == 0;
        }
    }

    ProbeSession &session_;
    std::optional<net::Stream> stream_;
};

bool is_auth_status(int status) { return status == 401 || status == 403; }

nlohmann::json parse_body(const http::Response &r)
{
    return nlohmann::json::parse(r.body, nullptr, false);
}

std::string json_string(const nlohmann::json &j, const nlohmann::json::json_pointer &ptr)
{
    if (!j.is_object() || !j.contains(ptr)) {
        return {};
    }
    const auto &v = j.at(ptr);
    if (v.is_string()) {
        return v.get<std::string>();
    }
    return v.is_null() ? std::string() : detail::dump_json(v);
}

std::optional<std::uint64_t> json_count(const nlohmann::json &v)
{
    if (v.is_number_unsigned() || v.is_number_integer()) {
        auto n = v.get<long long>();
        return n >= 0 ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(n)) : std::nullopt;
    }
    if (v.is_string()) {
        try {
            return std::stoull(v.get<std::string>());
        } catch (const std::exception &) {
        }
    }
    return std::nullopt;
}

void mark_auth(Harvest &h, const http::Response &r)
{
    h.auth_blocked = true;
    h.server_info["http_status"] = std::to_string(r.status);
    if (auto www = http::header(r.headers, "WWW-Authenticate")) {
        h.server_info["www_authenticate"] = *www;
    }
}

} // namespace

ConnStatus check_http(ProbeSession &session, net::Stream &stream)
{
    HttpClient client(session, std::move(stream));
    auto r = client.get("/");
    return is_auth_status(r.status) ? ConnStatus::AuthRequired : ConnStatus::ProtocolOk;
}

Harvest probe_elasticsearch(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "elasticsearch";
        HttpClient client(session);
        auto root = client.get("/");
        if (is_auth_status(root.status)) {
            mark_auth(h, root);
            return;
        }
        auto info = parse_body(root);
        using ptr = nlohmann::json::json_pointer;
        for (const auto &[key, p] : {std::pair{"version", "/version/number"},
                 std::pair{"cluster_name", "/cluster_name"}, std::pair{"tagline", "/tagline"},
                 std::pair{"build_flavor", "/version/build_flavor"}}) {
            if (auto v = json_string(info, ptr(p)); !v.empty()) {
                h.server_info[key] = v;
            }
        }
        auto cat = client.get("/_cat/indices?format=json");
        if (is_auth_status(cat.status)) {
            mark_auth(h, cat);
            return;
        }
        auto indices = parse_body(cat);
        if (cat.status != 200 || !indices.is_array()) {
            h.notes.push_back("index listing failed with HTTP " + std::to_string(cat.status));
            return;
        }
        std::vector<std::string> names;
        std::map<std::string, std::optional<std::uint64_t>> counts;
        for (const auto &idx : indices) {
            if (idx.is_object() && idx.contains("index") && idx["index"].is_string()) {
                auto name = idx["index"].get<std::string>();
                names.push_back(name);
                counts[name] = idx.contains("docs.count") ? json_count(idx["docs.count"]) : std::nullopt;
            }
        }
        const auto &budget = session.budget();
        bool complete = true;
        for (const auto &name : detail::user_namespaces(h, ServiceKind::Elasticsearch, names, budget.max_namespaces)) {
            NamespaceSample ns{name, counts[name], {}};
            auto r = client.get("/" + http::url_encode(name) + "/_search?size="
                + std::to_string(budget.max_samples_per_namespace));
            auto body = parse_body(r);
            if (r.status != 200 || !body.is_object()) {
                h.notes.push_back("search failed on " + name);
                complete = false;
            } else if (body.contains(ptr("/hits/hits")) && body.at(ptr("/hits/hits")).is_array()) {
                for (const auto &hit : body.at(ptr("/hits/hits"))) {
                    if (ns.samples.size() >= budget.max_samples_per_namespace) {
                        break;
                    }
                    const auto &src = hit.contains("_source") ? hit["_source"] : hit;
                    ns.samples.push_back(sample_text(detail::dump_json(src)));
                }
            }
            h.namespaces.push_back(std::move(ns));
        }
        if (complete) {
            detail::settle_empty(h);
        }
    });
}

Harvest probe_couchdb(ProbeSession &session)
{
    return detail::guarded(session, [&](Harvest &h) {
        h.server_info["product"] = "couchdb";
        HttpClient client(session);
        auto root = client.get("/");
        if (is_auth_status(root.status)) {
            mark_auth(h, root);
            return;
        }
        auto info = parse_body(root);
        using ptr = nlohmann::json::json_pointer;
        for (const auto &[key, p] : {std::pair{"version", "/version"}, std::pair{"couchdb", "/couchdb"},
                 std::pair{"vendor", "/vendor/name"}}) {
            if (auto v = json_string(info, ptr(p)); !v.empty()) {
                h.server_info[key] = v;
            }
        }
        auto all = client.get("/_all_dbs");
        if (is_auth_status(all.status)) {
            mark_auth(h, all);
            return;
        }
        auto dbs = parse_body(all);
        if (all.status != 200 || !dbs.is_array()) {
            h.notes.push_back("database listing failed with HTTP " + std::to_string(all.status));
            return;
        }
        std::vector<std::string> names;
        for (const auto &d : dbs) {
            if (d.is_string()) {
                names.push_back(d.get<std::string>());
            }
        }
        const auto &budget = session.budget();
        bool complete = true;
        for (const auto &name : detail::user_namespaces(h, ServiceKind::CouchDB, names, budget.max_namespaces)) {
            NamespaceSample ns{name, std::nullopt, {}};
            auto r = client.get("/" + http::url_encode(name) + "/_all_docs?limit="
                + std::to_string(budget.max_samples_per_namespace) + "&include_docs=true");
            if (is_auth_status(r.status)) {
                h.notes.push_back("database " + name + " requires credentials");
                complete = false;
                continue;
            }
            auto body = parse_body(r);
            if (r.status != 200 || !body.is_object()) {
                h.notes.push_back("document listing failed on " + name);
                complete = false;
            } else {
                if (body.contains("total_rows")) {
                    ns.record_count = json_count(body["total_rows"]);
                }
                if (body.contains("rows") && body["rows"].is_array()) {
                    for (const auto &row : body["rows"]) {
                        if (ns.samples.size() >= budget.max_samples_per_namespace) {
                            break;
                        }
                        const auto &doc = row.contains("doc") ? row["doc"] : row;
                        ns.samples.push_back(sample_text(detail::dump_json(doc)));
                    }
                }
            }
            h.namespaces.push_back(std::move(ns));
        }
        if (complete) {
            detail::settle_empty(h);
        }
    });
}

} // namespace exposcan
