#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "flexcap/dispatch.hpp"
#include "support.hpp"

namespace flexcap {
namespace {

using namespace testing;

void expect_alloc(const DispatchResult& r, std::vector<double> expected_kw) {
    ASSERT_EQ(r.allocation.size(), expected_kw.size());
    for (std::size_t i = 0; i < expected_kw.size(); ++i) {
        EXPECT_NEAR(r.allocation[i], expected_kw[i] * kW, 1e-9) << "device " << i;
    }
}

TEST(OptimalDispatch, FullGroupThenFractional) {
    const FleetState f = make_fleet({{"a", 2 * kW, 10 * kWh}, {"b", 1 * kW, 5 * kWh}, {"c", 4 * kW, 12 * kWh}});
    const DispatchResult r = optimal_dispatch(f, 4 * kW);
    expect_alloc(r, {2, 1, 1});
    EXPECT_DOUBLE_EQ(r.total, 4 * kW);
    EXPECT_EQ(r.deficit, 0.0);
}

TEST(OptimalDispatch, ZeroRequest) {
    const DispatchResult r = optimal_dispatch(config_a(), 0.0);
    expect_alloc(r, {0, 0});
    EXPECT_EQ(r.deficit, 0.0);
}

TEST(OptimalDispatch, Saturation) {
    const DispatchResult r = optimal_dispatch(make_fleet({{"a", 2 * kW, 2 * kWh}}), 5 * kW);
    expect_alloc(r, {2});
    EXPECT_DOUBLE_EQ(r.deficit, 3 * kW);
}

TEST(OptimalDispatch, SkipsEmptyDevices) {
    const FleetState f = make_fleet({{"a", 2 * kW, 0.0}, {"b", 1 * kW, 1 * kWh}});
    const DispatchResult r = optimal_dispatch(f, 2 * kW);
    expect_alloc(r, {0, 1});
    EXPECT_DOUBLE_EQ(r.deficit, 1 * kW);
}

TEST(LpfDispatch, AscendingPower) {
    const FleetState f = make_fleet({{"a", 1 * kW, 1 * kWh}, {"b", 2 * kW, 1 * kWh}, {"c", 4 * kW, 1 * kWh}});
    expect_alloc(lpf_dispatch(f, 4 * kW), {1, 2, 1});
    expect_alloc(lpf_dispatch(f, 0.0), {0, 0, 0});
}

TEST(LpfDispatch, EmptyDeviceIsSkipped) {
    const FleetState f = make_fleet({{"a", 1 * kW, 0.0}, {"b", 2 * kW, 1 * kWh}, {"c", 4 * kW, 1 * kWh}});
    expect_alloc(lpf_dispatch(f, 4 * kW), {0, 2, 2});
}

TEST(LpfDispatch, TiesBrokenById) {
    const FleetState f = make_fleet({{"z", 1 * kW, 1 * kWh}, {"a", 1 * kW, 2 * kWh}});
    expect_alloc(lpf_dispatch(f, 1 * kW), {0, 1});
}

TEST(PopDispatch, ProRata) {
    const FleetState f = make_fleet({{"a", 2 * kW, 1 * kWh}, {"b", 1 * kW, 1 * kWh}, {"c", 4 * kW, 1 * kWh}});
    expect_alloc(pop_dispatch(f, 3.5 * kW), {1, 0.5, 2});
    expect_alloc(pop_dispatch(f, 0.0), {0, 0, 0});
}

TEST(PopDispatch, ExactSaturation) {
    const FleetState f = make_fleet({{"a", 1 * kW, 1 * kWh}, {"b", 1 * kW, 1 * kWh}});
    const DispatchResult r = pop_dispatch(f, 2 * kW);
    expect_alloc(r, {1, 1});
    EXPECT_EQ(r.deficit, 0.0);
}

TEST(PopDispatch, AllEmptyIsFullDeficit) {
    const DispatchResult r = pop_dispatch(make_fleet({{"a", 1 * kW, 0.0}}), 3 * kW);
    EXPECT_DOUBLE_EQ(r.deficit, 3 * kW);
}

TEST(Dispatch, NegativeRequestRejected) {
    for (Policy p : {Policy::Optimal, Policy::LowestPowerFirst, Policy::ProportionOfPower}) {
        try {
            dispatch(p, config_a(), -1.0);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidRequest);
        }
    }
}

TEST(Dispatch, PolicyNames) {
    EXPECT_EQ(parse_policy("op"), Policy::Optimal);
    EXPECT_EQ(parse_policy("lpf"), Policy::LowestPowerFirst);
    EXPECT_EQ(parse_policy("pop"), Policy::ProportionOfPower);
    EXPECT_EQ(to_string(Policy::ProportionOfPower), "pop");
    EXPECT_THROW(parse_policy("fifo"), Error);
}

TEST(MaxAvailablePower, Examples) {
    EXPECT_EQ(max_available_power(make_fleet({{"a", 1 * kW, 0.0}, {"b", 3 * kW, 0.0}})), 0.0);
    EXPECT_DOUBLE_EQ(max_available_power(config_a()), 22 * kW);
    const Trajectory t = simulate(config_a(), StepSignal::constant(22 * kW, 2 * hour), Policy::Optimal);
    EXPECT_DOUBLE_EQ(max_available_power(t.states.back()), 4 * kW);
}

TEST(Simulate, SingleDeviceExhaustion) {
    const FleetState f = make_fleet({{"a", 5 * kW, 10 * kWh}});
    for (Policy p : {Policy::Optimal, Policy::LowestPowerFirst, Policy::ProportionOfPower}) {
        const Trajectory t = simulate(f, StepSignal::constant(4 * kW, 3 * hour), p);
        EXPECT_DOUBLE_EQ(t.time_to_failure, 2.5 * hour) << to_string(p);
        EXPECT_DOUBLE_EQ(t.delivered_energy, 10 * kWh);
    }
}

TEST(Simulate, ZeroSignal) {
    const StepSignal zero({0.0, hour}, {0.0, 0.0}, 2 * hour);
    const Trajectory t = simulate(config_a(), zero, Policy::Optimal);
    EXPECT_FALSE(t.failed());
    EXPECT_EQ(t.event_times, (std::vector<double>{0.0, hour, 2 * hour}));
    for (const auto& s : t.states) EXPECT_EQ(s.devices(), config_a().devices());
}

TEST(Simulate, GroupsMergeThenDepleteTogether) {
    const FleetState f = make_fleet({{"a", 1 * kW, 5 * kWh}, {"b", 1 * kW, 3 * kWh}});
    const Trajectory t = simulate(f, StepSignal::constant(1 * kW, 10 * hour), Policy::Optimal);
    ASSERT_GE(t.event_times.size(), 3u);
    EXPECT_NEAR(t.event_times[1], 2 * hour, 1e-9);
    EXPECT_EQ(t.states[1].group_count(), 1u);
    EXPECT_NEAR(t.states[1].group_ttg()[0], 3 * hour, 1e-9);
    EXPECT_NEAR(t.time_to_failure, 8 * hour, 1e-9);
    EXPECT_NEAR(t.delivered_energy, 8 * kWh, 1e-6);
}

TEST(Simulate, ConfigADepletionAtTwoHours) {
    const Trajectory t = simulate(config_a(), StepSignal::constant(22 * kW, 3 * hour), Policy::Optimal);
    EXPECT_EQ(t.time_to_failure, 2 * hour);
    EXPECT_NE(std::find(t.event_times.begin(), t.event_times.end(), 2 * hour), t.event_times.end());
}

TEST(Simulate, HaltAtFailureStopsDelivery) {
    const FleetState f = make_fleet({{"a", 5 * kW, 10 * kWh}, {"b", 1 * kW, 10 * kWh}});
    SimulationOptions opt;
    opt.halt_at_failure = true;
    const Trajectory halted = simulate(f, StepSignal::constant(5.5 * kW, 4 * hour), Policy::LowestPowerFirst, opt);
    const Trajectory best = simulate(f, StepSignal::constant(5.5 * kW, 4 * hour), Policy::LowestPowerFirst);
    EXPECT_EQ(halted.time_to_failure, best.time_to_failure);
    EXPECT_LT(halted.delivered_energy, best.delivered_energy);
    EXPECT_EQ(halted.segments.back().end, halted.time_to_failure);
}

// Checks per-trajectory invariants shared by every policy.
void check_trajectory(const FleetState& f, const StepSignal& s, const Trajectory& t, const std::string& label) {
    ASSERT_EQ(t.states.size(), t.event_times.size()) << label;
    ASSERT_EQ(t.allocations.size(), t.segments.size()) << label;
    for (std::size_t k = 1; k < t.event_times.size(); ++k) ASSERT_GT(t.event_times[k], t.event_times[k - 1]) << label;

    double extracted_from_alloc = 0.0;
    for (std::size_t k = 0; k < t.segments.size(); ++k) {
        const auto& seg = t.segments[k];
        const auto& a = t.allocations[k];
        const FleetState& before = t.states[k];
        double sum = 0.0;
        for (std::size_t i = 0; i < a.allocation.size(); ++i) {
            ASSERT_GE(a.allocation[i], 0.0) << label;
            ASSERT_LE(a.allocation[i], f.devices()[i].p_max * (1 + 1e-12)) << label;
            if (before.devices()[i].empty()) ASSERT_EQ(a.allocation[i], 0.0) << label;
            sum += a.allocation[i];
        }
        ASSERT_TRUE(rel_close(sum, seg.delivered, 1e-12, 1.0)) << label;
        ASSERT_NEAR(seg.deficit, std::max(seg.request - seg.delivered, 0.0), 1e-9 * std::max(1.0, seg.request));
        ASSERT_EQ(seg.request, s.at(seg.start)) << label;
        if (seg.start < t.time_to_failure) {
            ASSERT_TRUE(rel_close(seg.delivered, seg.request, 1e-9, 1.0)) << label;
        }
        extracted_from_alloc += seg.delivered * (seg.end - seg.start);
    }
    for (std::size_t k = 1; k < t.states.size(); ++k) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            ASSERT_LE(t.states[k].devices()[i].energy, t.states[k - 1].devices()[i].energy) << label;
            ASSERT_GE(t.states[k].devices()[i].energy, 0.0) << label;
        }
    }
    double drop = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) drop += f.devices()[i].energy - t.final_energy[i];
    ASSERT_TRUE(rel_close(drop, t.delivered_energy, 1e-9, f.total_energy())) << label;
    ASSERT_TRUE(rel_close(extracted_from_alloc, t.delivered_energy, 1e-9, f.total_energy())) << label;
}

TEST(SimulateProperty, TrajectoryInvariantsAllPolicies) {
    for (std::uint64_t i = 0; i < 300; ++i) {
        auto rng = rng_for(31, i);
        const FleetState f = random_fleet(rng, 8);
        const StepSignal s = random_signal(rng, f.total_power() * 1.1, 8);
        for (Policy p : {Policy::Optimal, Policy::LowestPowerFirst, Policy::ProportionOfPower}) {
            check_trajectory(f, s, simulate(f, s, p), "case " + std::to_string(i) + " " + std::string(to_string(p)));
        }
    }
}

TEST(SimulateProperty, OptimalPreservesTimeToGoOrder) {
    for (std::uint64_t i = 0; i < 300; ++i) {
        auto rng = rng_for(32, i);
        const FleetState f = random_fleet(rng, 8);
        const StepSignal s = random_signal(rng, f.total_power(), 8);
        const Trajectory t = simulate(f, s, Policy::Optimal);
        for (std::size_t a = 0; a < f.size(); ++a) {
            for (std::size_t b = 0; b < f.size(); ++b) {
                if (f.devices()[a].time_to_go() <= f.devices()[b].time_to_go()) continue;
                for (const auto& st : t.states) {
                    const double xa = st.devices()[a].time_to_go(), xb = st.devices()[b].time_to_go();
                    ASSERT_GE(xa, xb - 1e-6 * std::max(1.0, xb)) << "case " << i;
                }
            }
        }
    }
}

TEST(SimulateProperty, OptimalOutlastsHeuristics) {
    for (std::uint64_t i = 0; i < 1000; ++i) {
        auto rng = rng_for(33, i);
        const FleetState f = random_fleet(rng, 10);
        const StepSignal s = random_signal(rng, f.total_power(), 10);
        SimulationOptions opt;
        opt.record_states = false;
        const double op = simulate(f, s, Policy::Optimal, opt).time_to_failure;
        const double lpf = simulate(f, s, Policy::LowestPowerFirst, opt).time_to_failure;
        const double pop = simulate(f, s, Policy::ProportionOfPower, opt).time_to_failure;
        ASSERT_GE(op, lpf * (1 - 1e-12)) << "case " << i;
        ASSERT_GE(op, pop * (1 - 1e-12)) << "case " << i;
    }
}

}  // namespace
}  // namespace flexcap
