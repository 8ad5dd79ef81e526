#include <gtest/gtest.h>

#include "../support/fleets.hpp"
#include "exposcan/engine.hpp"
#include "exposcan/errors.hpp"
#include "exposcan/mockfleet.hpp"

using namespace exposcan;
using namespace exposcan::fleet;

using gen::every_pair;
using gen::fast_config;

TEST(Scenario, BijectionWithCategories)
{
    for (Scenario s : kAllScenarios) {
        EXPECT_EQ(scenario_for(expected_category(s)), s);
        EXPECT_EQ(parse_scenario(scenario_name(s)), s);
    }
    EXPECT_EQ(expected_category(Scenario::Closed), ExposureCategory::FailedToConnect);
    EXPECT_EQ(expected_category(Scenario::Compromised), ExposureCategory::Compromised);
}

TEST(Scenario, GenerationIsDeterministic)
{
    for (ServiceKind s : kAllServices) {
        for (Scenario sc : kAllScenarios) {
            EXPECT_EQ(generate_scenario_data(s, sc, 1), generate_scenario_data(s, sc, 1));
        }
    }
    EXPECT_EQ(to_json(generate_scenario_data(ServiceKind::Redis, Scenario::Sensitive, 1)).dump(),
        to_json(generate_scenario_data(ServiceKind::Redis, Scenario::Sensitive, 1)).dump());
}

TEST(Fleet, ClosedLoopAllPairs)
{
    auto fleet = spawn_fleet(every_pair());
    auto truth = ground_truth(fleet);
    ASSERT_EQ(truth.size(), 48u);
    auto config = fast_config(true);
    for (const auto &t : truth) {
        auto r = run_probe(t.target, config);
        EXPECT_EQ(r.category, t.expected) << service_name(t.target.service) << " " << scenario_name(t.scenario)
                                          << " status=" << status_name(r.status) << " harvest="
                                          << to_json(r.harvest).dump();
    }
    auto violations = audit_log(command_log(fleet), true);
    for (const auto &v : violations) {
        ADD_FAILURE() << v.reason << ": " << v.entry.parsed_command;
    }
}

TEST(Fleet, DuplicateFixedPortIsRejected)
{
    auto first = spawn_fleet({{gen::instance(ServiceKind::Redis, Scenario::Empty, 1)}});
    auto port = first.instances()[0].port;
    FleetConfig clash{{gen::instance(ServiceKind::Redis, Scenario::Empty, 2)}};
    clash.instances[0].port = port;
    EXPECT_THROW(spawn_fleet(clash), PortInUse);
}

TEST(Fleet, EmptyConfigStartsNothing)
{
    auto fleet = spawn_fleet(FleetConfig{});
    EXPECT_TRUE(fleet.instances().empty());
    EXPECT_TRUE(ground_truth(fleet).empty());
    EXPECT_THROW(parse_fleet_config("{"), ParseError);
    EXPECT_THROW(parse_fleet_config(R"({"instances": [{"service": "oracle", "scenario": "empty"}]})"),
        UnsupportedService);
}

TEST(Fleet, GroundTruthFollowsConfigOrder)
{
    auto cfg = every_pair();
    auto fleet = spawn_fleet(cfg);
    auto truth = ground_truth(fleet);
    ASSERT_EQ(truth.size(), cfg.instances.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        EXPECT_EQ(truth[i].instance_id, i);
        EXPECT_EQ(truth[i].target.service, cfg.instances[i].service);
        EXPECT_EQ(truth[i].scenario, cfg.instances[i].scenario);
        EXPECT_EQ(truth[i].expected, expected_category(cfg.instances[i].scenario));
        EXPECT_EQ(labeled_target_from_json(nlohmann::json::parse(to_json(truth[i]).dump())).target, truth[i].target);
    }
}
