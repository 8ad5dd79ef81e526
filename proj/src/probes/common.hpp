#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exposcan/codec/bytes.hpp"
#include "exposcan/probes.hpp"

namespace exposcan::detail {

std::string lower(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);

// Compact JSON that tolerates invalid UTF-8 in strings.
std::string dump_json(const nlohmann::json &j);
std::string dump_json(const nlohmann::ordered_json &j);

// Records the failure that ended a probe early.
void note_failure(Harvest &h, const std::exception &e);

// Clamps the harvest to the budget and restores the auth invariant.
void finish(Harvest &h, ProbeSession &session);

// Runs `body` and folds any network or decode failure into the harvest.
template <typename Fn> Harvest guarded(ProbeSession &session, Fn &&body)
{
    Harvest h;
    try {
        body(h);
    } catch (const std::exception &e) {
        note_failure(h, e);
    }
    finish(h, session);
    return h;
}

// Splits enumerated names into user namespaces (kept, at most
// max_namespaces) and system ones (listed in server_info).
std::vector<std::string> user_namespaces(Harvest &h, ServiceKind service,
    const std::vector<std::string> &names, std::size_t limit);

// Sets `empty` once enumeration finished: no user namespaces, or every
// user namespace is known to hold zero records.
void settle_empty(Harvest &h);

// Quotes an SQL identifier; returns empty when the name cannot be quoted
// safely inside a single statement.
std::string quote_ident(std::string_view name, char quote);

} // namespace exposcan::detail
