#include "exposcan/classification.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/regex.hpp>

#include "exposcan/errors.hpp"
#include "rules_embed.hpp"

namespace exposcan {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "failed_to_connect", "connected_no_data", "connected_empty", "system_or_nonsensitive",
    "sensitive_data", "compromised"};

constexpr std::array<std::string_view, 6> kSensitiveNames = {
    "email", "phone", "payment_card", "password_field", "credential_token", "national_id"};

constexpr std::array<std::string_view, 5> kEvidenceNames = {
    "ransom_note", "sensitive_hit", "system_only", "empty_proof", "auth_refusal"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N> &names, std::string_view name)
{
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == name) {
            return static_cast<E>(i);
        }
    }
    return std::nullopt;
}

std::optional<RuleWhere> parse_where(std::string_view s)
{
    if (s == "namespace") {
        return RuleWhere::Namespace;
    }
    if (s == "sample") {
        return RuleWhere::Sample;
    }
    if (s == "field_name") {
        return RuleWhere::FieldName;
    }
    return std::nullopt;
}

// Splits UTF-8 text into whole characters.
std::vector<std::string_view> utf8_chars(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : (c & 0xF8) == 0xF0 ? 4 : 1;
        len = std::min(len, s.size() - i);
        out.push_back(s.substr(i, len));
        i += len;
    }
    return out;
}

std::string digits_of(std::string_view s)
{
    std::string out;
    for (char c : s) {
        if (c >= '0' && c <= '9') {
            out += c;
        }
    }
    return out;
}

} // namespace

std::string_view category_name(ExposureCategory c) { return kCategoryNames.at(static_cast<std::size_t>(c)); }

std::optional<ExposureCategory> parse_category(std::string_view name)
{
    return lookup<ExposureCategory>(kCategoryNames, name);
}

std::string_view sensitive_kind_name(SensitiveKind k) { return kSensitiveNames.at(static_cast<std::size_t>(k)); }

std::optional<SensitiveKind> parse_sensitive_kind(std::string_view name)
{
    return lookup<SensitiveKind>(kSensitiveNames, name);
}

std::string_view evidence_kind_name(EvidenceKind k) { return kEvidenceNames.at(static_cast<std::size_t>(k)); }

std::optional<EvidenceKind> parse_evidence_kind(std::string_view name)
{
    return lookup<EvidenceKind>(kEvidenceNames, name);
}

nlohmann::ordered_json to_json(const Evidence &e)
{
    nlohmann::ordered_json j;
    j["kind"] = evidence_kind_name(e.kind);
    j["detail"] = e.detail;
    j["namespace"] = e.namespace_name ? nlohmann::ordered_json(*e.namespace_name) : nlohmann::ordered_json();
    return j;
}

Evidence evidence_from_json(const nlohmann::json &j)
{
    try {
        Evidence e;
        auto kind = parse_evidence_kind(j.at("kind").get<std::string>());
        if (!kind) {
            throw ParseError("unknown evidence kind");
        }
        e.kind = *kind;
        e.detail = j.at("detail").get<std::string>();
        if (j.contains("namespace") && !j["namespace"].is_null()) {
            e.namespace_name = j["namespace"].get<std::string>();
        }
        return e;
    } catch (const nlohmann::json::exception &ex) {
        throw ParseError(std::string("bad evidence: ") + ex.what());
    }
}

struct RuleSet::Compiled {
    std::vector<boost::regex> regexes;
};

RuleSet::RuleSet() : compiled_(std::make_unique<Compiled>()) {}
RuleSet::RuleSet(RuleSet &&) noexcept = default;
RuleSet &RuleSet::operator=(RuleSet &&) noexcept = default;
RuleSet::~RuleSet() = default;

RuleSet RuleSet::parse(std::string_view json_text, Family family)
{
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw RuleError("rule file must be a JSON array");
    }
    RuleSet set;
    set.family_ = family;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto &r = doc[i];
        const std::string where_at = "rule " + std::to_string(i);
        if (!r.is_object()) {
            throw RuleError(where_at + ": not an object");
        }
        for (const char *key : {"id", "kind", "pattern", "where"}) {
            if (!r.contains(key) || !r[key].is_string()) {
                throw RuleError(where_at + ": missing string field '" + key + "'");
            }
        }
        Rule rule;
        rule.id = r["id"].get<std::string>();
        rule.kind = r["kind"].get<std::string>();
        rule.pattern = r["pattern"].get<std::string>();
        auto where = parse_where(r["where"].get<std::string>());
        if (!where) {
            throw RuleError(where_at + ": 'where' must be namespace, sample or field_name");
        }
        rule.where = *where;
        if (rule.id.empty() || !ids.insert(rule.id).second) {
            throw RuleError(where_at + ": empty or duplicate id '" + rule.id + "'");
        }
        if (family == Family::Sensitive && !parse_sensitive_kind(rule.kind)) {
            throw RuleError(where_at + ": unknown sensitive kind '" + rule.kind + "'");
        }
        if (family == Family::Ransom && rule.kind != "ransom_note") {
            throw RuleError(where_at + ": ransom rules must have kind ransom_note");
        }
        try {
            set.compiled_->regexes.emplace_back(rule.pattern, boost::regex::perl);
        } catch (const boost::regex_error &e) {
            throw RuleError(where_at + " (" + rule.id + "): bad pattern: " + e.what());
        }
        set.rules_.push_back(std::move(rule));
    }
    return set;
}

RuleSet RuleSet::load(const std::string &path, Family family)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw RuleError("cannot read rule file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str(), family);
    } catch (const RuleError &e) {
        throw RuleError(path + ": " + e.what());
    }
}

const RuleSet &RuleSet::default_sensitive()
{
    static const RuleSet set = parse(embedded::kSensitiveRules, Family::Sensitive);
    return set;
}

const RuleSet &RuleSet::default_ransom()
{
    static const RuleSet set = parse(embedded::kRansomRules, Family::Ransom);
    return set;
}

std::vector<std::string> RuleSet::matches(std::size_t index, std::string_view text) const
{
    std::vector<std::string> out;
    const auto &re = compiled_->regexes.at(index);
    try {
        boost::cregex_iterator it(text.data(), text.data() + text.size(), re);
        for (; it != boost::cregex_iterator(); ++it) {
            if ((*it)[0].length() > 0) {
                out.push_back((*it)[0].str());
            }
        }
    } catch (const std::runtime_error &) {
        // Pattern too complex for this input; treat as no match.
    }
    return out;
}

bool RuleSet::matches_any(std::size_t index, std::string_view text) const
{
    try {
        return boost::regex_search(text.data(), text.data() + text.size(), compiled_->regexes.at(index));
    } catch (const std::runtime_error &) {
        return false;
    }
}

std::vector<std::string> extract_field_names(std::string_view sample)
{
    static const boost::regex json_key(R"re("((?:[^"\\]|\\.){1,128})"\s*:)re");
    static const boost::regex assign(R"re((?:^|\n)[ \t]*([^\s=]{1,256})[ \t]*=)re");
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto *re : {&json_key, &assign}) {
        boost::cregex_iterator it(sample.data(), sample.data() + sample.size(), *re);
        for (; it != boost::cregex_iterator(); ++it) {
            std::string name = (*it)[1].str();
            if (seen.insert(name).second) {
                out.push_back(std::move(name));
            }
        }
    }
    return out;
}

std::vector<std::string> field_segments(std::string_view name)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : name) {
        if (c == ':' || c == '.' || c == '_' || c == '-' || c == '/') {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

bool luhn_valid(std::string_view digits)
{
    if (digits.size() < 2) {
        return false;
    }
    int sum = 0;
    bool twice = false;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (*it < '0' || *it > '9') {
            return false;
        }
        int d = *it - '0';
        if (twice) {
            d *= 2;
            if (d > 9) {
                d -= 9;
            }
        }
        sum += d;
        twice = !twice;
    }
    return sum % 10 == 0;
}

std::string redact(std::string_view match)
{
    auto chars = utf8_chars(match);
    std::string out;
    if (chars.size() <= 4) {
        out.assign(chars.size(), '*');
    } else {
        out.append(chars[0]).append(chars[1]);
        out.append(chars.size() - 4, '*');
        out.append(chars[chars.size() - 2]).append(chars[chars.size() - 1]);
    }
    if (out == match) {
        out = "[redacted:" + std::to_string(chars.size()) + "]";
    }
    return out;
}

std::vector<SensitiveHit> detect_sensitive(const Harvest &h, const RuleSet &rules)
{
    std::vector<SensitiveHit> hits;
    std::set<std::tuple<std::string, std::string, std::string>> seen; // detector, namespace, match
    auto add = [&](const RuleSet::Rule &rule, const std::string &ns, const std::string &match) {
        if (!seen.emplace(rule.id, ns, match).second) {
            return;
        }
        hits.push_back({*parse_sensitive_kind(rule.kind), ns, redact(match), rule.id});
    };
    const auto &list = rules.rules();
    for (const auto &ns : h.namespaces) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto &rule = list[i];
            bool card = rule.kind == "payment_card";
            auto accept = [&](const std::string &m) {
                if (!card) {
                    return true;
                }
                auto d = digits_of(m);
                return d.size() >= 13 && d.size() <= 19 && luhn_valid(d);
            };
            switch (rule.where) {
            case RuleWhere::Namespace:
                for (const auto &m : rules.matches(i, ns.name)) {
                    if (accept(m)) {
                        add(rule, ns.name, m);
                    }
                }
                break;
            case RuleWhere::Sample:
                for (const auto &sample : ns.samples) {
                    for (const auto &m : rules.matches(i, sample)) {
                        if (accept(m)) {
                            add(rule, ns.name, m);
                        }
                    }
                }
                break;
            case RuleWhere::FieldName:
                for (const auto &sample : ns.samples) {
                    for (const auto &field : extract_field_names(sample)) {
                        auto candidates = field_segments(field);
                        candidates.insert(candidates.begin(), field);
                        for (const auto &c : candidates) {
                            if (rules.matches_any(i, c)) {
                                add(rule, ns.name, c);
                                break;
                            }
                        }
                    }
                }
                break;
            }
        }
    }
    return hits;
}

std::vector<Evidence> detect_compromise(const Harvest &h, const RuleSet &rules)
{
    std::vector<Evidence> out;
    const auto &list = rules.rules();
    for (const auto &ns : h.namespaces) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].where == RuleWhere::Namespace && rules.matches_any(i, ns.name)) {
                out.push_back({EvidenceKind::RansomNote,
                    "namespace name matches ransom rule " + list[i].id, ns.name});
                break;
            }
        }
        for (std::size_t s = 0; s < ns.samples.size(); ++s) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (list[i].where == RuleWhere::Sample && rules.matches_any(i, ns.samples[s])) {
                    out.push_back({EvidenceKind::RansomNote,
                        "sample " + std::to_string(s) + " matches ransom rule " + list[i].id, ns.name});
                    break;
                }
            }
        }
    }
    return out;
}

Classification classify(ConnStatus status, const Harvest &h, const std::vector<SensitiveHit> &sensitive,
    const std::vector<Evidence> &ransom)
{
    Classification c;
    if (!is_connected(status)) {
        c.category = ExposureCategory::FailedToConnect;
        return c;
    }
    if (!ransom.empty()) {
        c.category = ExposureCategory::Compromised;
        c.evidence = ransom;
        return c;
    }
    if (!sensitive.empty()) {
        c.category = ExposureCategory::SensitiveData;
        for (const auto &hit : sensitive) {
            c.evidence.push_back({EvidenceKind::SensitiveHit,
                std::string(sensitive_kind_name(hit.kind)) + " via " + hit.detector + ": " + hit.excerpt,
                hit.namespace_name});
        }
        return c;
    }
    if (h.auth_blocked || (h.namespaces.empty() && !h.empty)) {
        c.category = ExposureCategory::ConnectedNoData;
        if (h.auth_blocked) {
            c.evidence.push_back({EvidenceKind::AuthRefusal, "service refused access without credentials", std::nullopt});
        }
        return c;
    }
    if (h.empty) {
        c.category = ExposureCategory::ConnectedEmpty;
        c.evidence.push_back({EvidenceKind::EmptyProof,
            h.namespaces.empty() ? std::string("no user namespaces")
                                 : std::to_string(h.namespaces.size()) + " user namespaces hold no records",
            std::nullopt});
        return c;
    }
    c.category = ExposureCategory::SystemOrNonSensitive;
    c.evidence.push_back({EvidenceKind::SystemOnly,
        std::to_string(h.namespaces.size()) + " user namespaces, no sensitive matches", std::nullopt});
    return c;
}

} // namespace exposcan
