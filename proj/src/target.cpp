#include "exposcan/target.hpp"

#include <cctype>

#include "exposcan/errors.hpp"

namespace exposcan {

std::string_view source_name(TargetSource s)
{
    switch (s) {
    case TargetSource::Shodan: return "shodan";
    case TargetSource::BinaryEdge: return "binaryedge";
    case TargetSource::File: return "file";
    }
    return "file";
}

std::optional<TargetSource> parse_source(std::string_view name)
{
    for (auto s : {TargetSource::Shodan, TargetSource::BinaryEdge, TargetSource::File}) {
        if (source_name(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

bool layout_less(const TargetRecord &a, const TargetRecord &b)
{
    return std::tie(a.country, a.service, a.address, a.port) <
        std::tie(b.country, b.service, b.address, b.port);
}

bool is_valid_country(std::string_view country)
{
    if (country == kUnknownCountry) {
        return true;
    }
    return country.size() == 2 && country[0] >= 'A' && country[0] <= 'Z' && country[1] >= 'A' &&
        country[1] <= 'Z';
}

std::string normalize_country(std::string_view raw)
{
    if (raw.size() != 2) {
        return std::string(kUnknownCountry);
    }
    std::string out;
    for (char c : raw) {
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            return std::string(kUnknownCountry);
        }
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

void validate(const TargetRecord &r)
{
    if (r.address.empty()) {
        throw PreconditionError("target address is empty");
    }
    if (r.port == 0) {
        throw PreconditionError("target port must be within 1-65535");
    }
    if (!is_valid_country(r.country)) {
        throw PreconditionError("invalid country code '" + r.country + "'");
    }
}

nlohmann::ordered_json to_json(const TargetRecord &r)
{
    nlohmann::ordered_json j;
    j["address"] = r.address;
    j["port"] = r.port;
    j["service"] = service_name(r.service);
    j["country"] = r.country;
    j["source"] = source_name(r.source);
    j["discovered_at"] = format_iso8601(r.discovered_at);
    return j;
}

TargetRecord target_from_json(const nlohmann::json &j)
{
    if (!j.is_object()) {
        throw ParseError("target record is not a JSON object");
    }
    auto field = [&](const char *key) -> const nlohmann::json & {
        auto it = j.find(key);
        if (it == j.end()) {
            throw ParseError(std::string("missing key '") + key + "'");
        }
        return *it;
    };
    TargetRecord r;
    const auto &address = field("address");
    const auto &port = field("port");
    const auto &service = field("service");
    const auto &country = field("country");
    const auto &source = field("source");
    const auto &discovered = field("discovered_at");
    if (!address.is_string() || !port.is_number_integer() || !service.is_string() ||
        !country.is_string() || !source.is_string() || !discovered.is_string()) {
        throw ParseError("target record has a field of the wrong type");
    }
    r.address = address.get<std::string>();
    auto p = port.get<std::int64_t>();
    if (p < 1 || p > 65535) {
        throw ParseError("port out of range: " + std::to_string(p));
    }
    r.port = static_cast<std::uint16_t>(p);
    auto svc = parse_service(service.get<std::string>());
    if (!svc) {
        throw ParseError("unknown service '" + service.get<std::string>() + "'");
    }
    r.service = *svc;
    r.country = country.get<std::string>();
    if (!is_valid_country(r.country)) {
        throw ParseError("invalid country '" + r.country + "'");
    }
    auto src = parse_source(source.get<std::string>());
    if (!src) {
        throw ParseError("unknown source '" + source.get<std::string>() + "'");
    }
    r.source = *src;
    auto ts = parse_iso8601(discovered.get<std::string>());
    if (!ts) {
        throw ParseError("bad discovered_at '" + discovered.get<std::string>() + "'");
    }
    r.discovered_at = *ts;
    if (r.address.empty()) {
        throw ParseError("empty address");
    }
    return r;
}

std::string to_jsonl_line(const TargetRecord &r) { return to_json(r).dump(); }

bool TargetFilter::accepts(const TargetRecord &r) const
{
    return (!service || r.service == *service) && (!country || r.country == *country);
}

} // namespace exposcan
