#pragma once

#include <array>
#include <optional>
#include <string>

#include "generators.hpp"

namespace gen {

// Independent restatement of the category rules, one predicate per
// category. Exactly one must hold for any input.
inline std::array<bool, 6> category_predicates(ConnStatus status, const Harvest &h, bool any_sensitive,
    bool any_ransom)
{
    bool connected = status == ConnStatus::ProtocolOk || status == ConnStatus::AuthRequired;
    bool no_data = h.auth_blocked || (h.namespaces.empty() && !h.empty);
    return {
        !connected,
        connected && !any_ransom && !any_sensitive && no_data,
        connected && !any_ransom && !any_sensitive && !no_data && h.empty,
        connected && !any_ransom && !any_sensitive && !no_data && !h.empty,
        connected && !any_ransom && any_sensitive,
        connected && any_ransom,
    };
}

// Returns a description of the first property the case breaks.
inline std::optional<std::string> check_classifier_case(const ClassifierCase &c, Rng &rng)
{
    auto sensitive = detect_sensitive(c.harvest);
    auto ransom = detect_compromise(c.harvest);
    auto result = classify(c.status, c.harvest, sensitive, ransom);
    int got = ordinal(result.category);
    if (got < 0 || got > 5) {
        return "category out of range";
    }

    auto preds = category_predicates(c.status, c.harvest, !sensitive.empty(), !ransom.empty());
    int holding = 0;
    for (bool p : preds) {
        holding += p ? 1 : 0;
    }
    if (holding != 1) {
        return "oracle predicates not exclusive";
    }
    if (!preds[static_cast<std::size_t>(got)]) {
        return "category " + std::string(category_name(result.category)) + " disagrees with oracle";
    }
    if (got >= 2 && result.evidence.empty()) {
        return "category without evidence";
    }

    bool connected = got > 0;
    if (connected) {
        for (const auto &p : c.planted) {
            bool caught = false;
            for (const auto &hit : sensitive) {
                caught = caught || hit.kind == p.kind;
            }
            if (!caught) {
                return "planted " + std::string(sensitive_kind_name(p.kind)) + " not detected";
            }
        }
    }

    for (const auto &hit : sensitive) {
        for (const auto &p : c.planted) {
            if (hit.excerpt.find(p.value) != std::string::npos) {
                return "excerpt leaks " + p.value;
            }
        }
        for (const auto &e : result.evidence) {
            for (const auto &p : c.planted) {
                if (e.detail.find(p.value) != std::string::npos) {
                    return "evidence leaks " + p.value;
                }
            }
        }
    }

    if (connected) {
        Evidence note{EvidenceKind::RansomNote, "synthetic note", std::string("readme")};
        auto with_ransom = ransom;
        with_ransom.push_back(note);
        if (classify(c.status, c.harvest, sensitive, with_ransom).category != ExposureCategory::Compromised) {
            return "ransom evidence did not dominate";
        }
    }

    if (got >= 1 && got <= 3) {
        auto more = sensitive;
        Planted p = planted_value(rng);
        more.push_back({p.kind, "extra", redact(p.value), "synthetic"});
        if (ordinal(classify(c.status, c.harvest, more, ransom).category) < got) {
            return "adding a sensitive hit lowered the category";
        }
    }
    return std::nullopt;
}

} // namespace gen
