#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace exposcan {

using UtcTime = std::chrono::sys_seconds;

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(UtcTime t);
std::optional<UtcTime> parse_iso8601(std::string_view text);

UtcTime utc_now();

} // namespace exposcan
