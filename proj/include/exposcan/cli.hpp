#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exposcan/time.hpp"

namespace exposcan {

// What the CLI takes from the process; tests substitute both.
struct CliEnvironment {
    std::function<std::optional<std::string>(std::string_view)> getenv;
    std::function<UtcTime()> clock;
};

CliEnvironment process_environment();

// args excludes the program name. Returns 0 on success, 1 on failure and
// 2 when a gather kept results from some sources but not all.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err,
    const CliEnvironment &env = process_environment());

} // namespace exposcan
