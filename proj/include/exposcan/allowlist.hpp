#pragma once

#include <string>
#include <string_view>

#include "exposcan/codec/bytes.hpp"
#include "exposcan/codec/cql.hpp"
#include "exposcan/codec/http.hpp"
#include "exposcan/codec/mongo_wire.hpp"
#include "exposcan/codec/pg.hpp"
#include "exposcan/codec/resp.hpp"
#include "exposcan/service.hpp"

namespace exposcan {

// Canonical one-line renderings of client messages. The mock fleet logs
// these and the allow-list is expressed over them.
inline constexpr std::string_view kUnparsed = "unparsed";

std::string describe_mongo(const mongo::Message &m);
std::string describe_http(const http::Request &r);
std::string describe_cql(const cql::Frame &f);
std::string describe_mysql_login(std::string_view user);
std::string describe_mysql_command(ByteView payload);
std::string describe_pg_startup(const pg::Startup &s);
std::string describe_pg(const pg::Message &m);

// True when `command` is one of the read-only commands permitted for the
// service. Anything else, including "unparsed", is a violation.
bool is_allowed(ServiceKind service, std::string_view command);

// A MySQL login attempt as rendered by describe_mysql_login.
bool is_credential_attempt(ServiceKind service, std::string_view command);

// A read-only SELECT: single statement ending in LIMIT <n>.
bool is_limited_select(std::string_view sql);

} // namespace exposcan
