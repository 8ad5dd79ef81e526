#pragma once

#include <chrono>
#include <cstdint>

#include "exposcan/engine.hpp"
#include "exposcan/mockfleet.hpp"

namespace gen {

using namespace exposcan;
using namespace exposcan::fleet;

inline ScanConfig fast_config(bool creds, std::chrono::milliseconds timeout = std::chrono::milliseconds(1000))
{
    ScanConfig c;
    c.budget.connect_timeout = timeout;
    c.budget.io_timeout = timeout;
    c.options.try_default_credentials = creds;
    return c;
}

inline InstanceConfig instance(ServiceKind s, Scenario sc, std::uint64_t seed,
    nlohmann::json overrides = nlohmann::json::object(), std::string country = "EE")
{
    return {s, sc, std::nullopt, seed, std::move(country), std::move(overrides)};
}

inline InstanceConfig misbehaving(ServiceKind s, Scenario sc, std::string_view behavior, std::uint64_t seed = 1)
{
    return instance(s, sc, seed, {{"behavior", std::string(behavior)}});
}

// One instance for every service and scenario.
inline FleetConfig every_pair()
{
    FleetConfig cfg;
    std::uint64_t seed = 1;
    for (ServiceKind s : kAllServices) {
        for (Scenario sc : kAllScenarios) {
            cfg.instances.push_back(instance(s, sc, seed++));
        }
    }
    return cfg;
}

inline void add(FleetConfig &cfg, ServiceKind s, Scenario sc, std::size_t n, std::uint64_t &seed)
{
    for (std::size_t i = 0; i < n; ++i) {
        cfg.instances.push_back(instance(s, sc, seed++));
    }
}

} // namespace gen
