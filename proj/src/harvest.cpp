#include "exposcan/harvest.hpp"

#include <array>

#include "exposcan/errors.hpp"

namespace exposcan {

namespace {

constexpr std::array<std::pair<ConnStatus, std::string_view>, 5> kStatusNames = {{
    {ConnStatus::Refused, "refused"},
    {ConnStatus::TimedOut, "timed_out"},
    {ConnStatus::TcpOnly, "tcp_only"},
    {ConnStatus::ProtocolOk, "protocol_ok"},
    {ConnStatus::AuthRequired, "auth_required"},
}};

// Length of the valid UTF-8 sequence at s[i], or 0.
std::size_t utf8_sequence(std::string_view s, std::size_t i)
{
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    unsigned min = 0;
    unsigned cp = 0;
    if (c < 0x80) {
        return 1;
    } else if ((c & 0xE0) == 0xC0) {
        len = 2;
        cp = c & 0x1F;
        min = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
        len = 3;
        cp = c & 0x0F;
        min = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
        len = 4;
        cp = c & 0x07;
        min = 0x10000;
    } else {
        return 0;
    }
    if (i + len > s.size()) {
        return 0;
    }
    for (std::size_t k = 1; k < len; ++k) {
        auto cc = static_cast<unsigned char>(s[i + k]);
        if ((cc & 0xC0) != 0x80) {
            return 0;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        return 0;
    }
    return len;
}

} // namespace

std::string_view status_name(ConnStatus s)
{
    for (const auto &[k, name] : kStatusNames) {
        if (k == s) {
            return name;
        }
    }
    return "unknown";
}

std::optional<ConnStatus> parse_status(std::string_view name)
{
    for (const auto &[k, n] : kStatusNames) {
        if (n == name) {
            return k;
        }
    }
    return std::nullopt;
}

void ProbeBudget::validate() const
{
    if (connect_timeout.count() <= 0 || io_timeout.count() <= 0 || max_namespaces == 0
        || max_samples_per_namespace == 0 || max_bytes_total == 0) {
        throw PreconditionError("probe budget fields must all be positive");
    }
}

nlohmann::ordered_json to_json(const ProbeBudget &b)
{
    nlohmann::ordered_json j;
    j["connect_timeout_ms"] = b.connect_timeout.count();
    j["io_timeout_ms"] = b.io_timeout.count();
    j["max_namespaces"] = b.max_namespaces;
    j["max_samples_per_namespace"] = b.max_samples_per_namespace;
    j["max_bytes_total"] = b.max_bytes_total;
    return j;
}

nlohmann::ordered_json to_json(const Harvest &h)
{
    nlohmann::ordered_json j;
    j["server_info"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : h.server_info) {
        j["server_info"][k] = v;
    }
    j["namespaces"] = nlohmann::ordered_json::array();
    for (const auto &ns : h.namespaces) {
        nlohmann::ordered_json n;
        n["name"] = ns.name;
        n["record_count"] = ns.record_count ? nlohmann::ordered_json(*ns.record_count)
                                            : nlohmann::ordered_json(nullptr);
        n["samples"] = ns.samples;
        j["namespaces"].push_back(std::move(n));
    }
    j["empty"] = h.empty;
    j["auth_blocked"] = h.auth_blocked;
    j["total_bytes"] = h.total_bytes;
    j["notes"] = h.notes;
    return j;
}

Harvest harvest_from_json(const nlohmann::json &j)
{
    try {
        Harvest h;
        for (const auto &[k, v] : j.at("server_info").items()) {
            h.server_info[k] = v.get<std::string>();
        }
        for (const auto &n : j.at("namespaces")) {
            NamespaceSample ns;
            ns.name = n.at("name").get<std::string>();
            if (!n.at("record_count").is_null()) {
                ns.record_count = n.at("record_count").get<std::uint64_t>();
            }
            ns.samples = n.at("samples").get<std::vector<std::string>>();
            h.namespaces.push_back(std::move(ns));
        }
        h.empty = j.at("empty").get<bool>();
        h.auth_blocked = j.at("auth_blocked").get<bool>();
        h.total_bytes = j.at("total_bytes").get<std::uint64_t>();
        h.notes = j.value("notes", std::vector<std::string>{});
        return h;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("bad harvest: ") + e.what());
    }
}

std::string sample_text(std::string_view raw)
{
    static const char *hex = "0123456789abcdef";
    const std::size_t cap = kMaxSampleBytes - kTruncationMarker.size();
    std::string out;
    std::size_t cut = 0; // largest piece boundary that leaves room for the marker
    std::size_t i = 0;
    while (i < raw.size()) {
        std::size_t len = utf8_sequence(raw, i);
        auto c = static_cast<unsigned char>(raw[i]);
        bool escape = len == 0 || (len == 1 && ((c < 0x20 && c != '\n' && c != '\t') || c == 0x7F));
        if (escape) {
            out += "\\x";
            out += hex[c >> 4];
            out += hex[c & 15];
            i += 1;
        } else {
            out.append(raw.substr(i, len));
            i += len;
        }
        if (out.size() <= cap) {
            cut = out.size();
        }
        if (out.size() > kMaxSampleBytes) {
            break;
        }
    }
    if (out.size() > kMaxSampleBytes) {
        out.resize(cut);
        out += kTruncationMarker;
    }
    return out;
}

} // namespace exposcan
