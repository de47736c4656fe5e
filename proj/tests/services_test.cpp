#include <gtest/gtest.h>

#include <cmath>

#include "flexcap/oracle.hpp"
#include "flexcap/services.hpp"
#include "support.hpp"

namespace flexcap {
namespace {

using namespace testing;

// Staircase with n steps that lies above (upper) or below the ramp g*t on [0, T).
StepSignal ramp_staircase(double g, double T, std::size_t n, bool upper) {
    std::vector<double> values, durations;
    for (std::size_t k = 0; k < n; ++k) {
        values.push_back(g * T * static_cast<double>(upper ? k + 1 : k) / static_cast<double>(n));
        durations.push_back(T / static_cast<double>(n));
    }
    return StepSignal::from_durations(values, durations);
}

bool op_meets(const FleetState& f, const StepSignal& s) {
    return !std::isfinite(time_to_failure(f, s, Policy::Optimal));
}

TEST(MaxPulse, ConfigA) {
    EXPECT_DOUBLE_EQ(max_pulse(config_a(), 2 * hour), 22 * kW);
    EXPECT_DOUBLE_EQ(max_pulse(config_a(), 5 * hour), 11.2 * kW);
}

TEST(MaxPulse, EmptyFleetAndErrors) {
    EXPECT_EQ(max_pulse(make_fleet({{"a", 1 * kW, 0.0}}), hour), 0.0);
    for (double d : {0.0, -1.0, std::nan("")}) {
        try {
            max_pulse(config_a(), d);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidDuration);
        }
    }
}

TEST(MaxPulseProperty, Sandwich) {
    for (std::uint64_t i = 0; i < 200; ++i) {
        auto rng = rng_for(51, i);
        const FleetState f = random_fleet(rng, 10);
        if (!(f.total_energy() > 0.0)) continue;
        const double d = std::uniform_real_distribution<double>(60.0, 15 * hour)(rng);
        const double m = max_pulse(f, d);
        ASSERT_TRUE(is_feasible(StepSignal::constant(m, d), f)) << "case " << i;
        ASSERT_FALSE(is_feasible(StepSignal::constant(m * (1 + 1e-6), d), f)) << "case " << i;
    }
}

TEST(MaxPulseProperty, OracleMarginShrinksTowardBound) {
    const FleetState f = config_a();
    const double d = 5 * hour;
    const double m = max_pulse(f, d);
    double prev = INFINITY;
    for (double frac : {0.5, 0.8, 0.95, 0.99, 1.0}) {
        const auto v = oracle::brute_force_feasible(StepSignal::constant(m * frac, d), f, 60.0);
        EXPECT_TRUE(v.feasible) << frac;
        EXPECT_LT(v.margin, prev) << frac;
        prev = v.margin;
    }
    // At the bound itself only the stepping error remains: O(step * total power).
    for (double step : {60.0, 10.0, 1.0}) {
        const auto v = oracle::brute_force_feasible(StepSignal::constant(m, d), f, step);
        EXPECT_LE(v.margin, prev) << step;
        EXPECT_LE(v.margin, step * f.total_power()) << step;
        prev = v.margin;
    }
}

TEST(MaxRamp, SingleDevicePowerLimited) {
    const double T = max_ramp(config_b(), 13 * kW / hour);
    EXPECT_TRUE(rel_close(T, hour, 1e-8));
}

TEST(MaxRamp, ConfigABindsAtFourKilowatts) {
    const double g = 2 * kW / hour;
    const double T = max_ramp(config_a(), g);
    EXPECT_TRUE(rel_close(T, 8 * hour, 1e-8));
    EXPECT_TRUE(op_meets(config_a(), ramp_staircase(g, T * (1 - 1e-3), 2000, true)));
    EXPECT_FALSE(op_meets(config_a(), ramp_staircase(g, T * (1 + 1e-3), 2000, false)));
    EXPECT_FALSE(op_meets(config_a(), ramp_staircase(g, 11 * hour, 2000, false)));
}

TEST(MaxRamp, SteepGradientGivesShortRamp) {
    double prev = INFINITY;
    for (double g : {1.0, 1e2, 1e4, 1e6, 1e8}) {
        const double T = max_ramp(config_a(), g);
        EXPECT_LT(T, prev);
        prev = T;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(MaxRamp, InvalidGradient) {
    try {
        max_ramp(config_a(), 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGradient);
    }
}

TEST(MaxRampProperty, StaircaseOracle) {
    for (std::uint64_t i = 0; i < 40; ++i) {
        auto rng = rng_for(52, i);
        const FleetState f = random_fleet(rng, 6);
        if (!(f.total_energy() > 0.0)) continue;
        const double g = std::uniform_real_distribution<double>(0.5, 20.0)(rng) * kW / hour;
        const double T = max_ramp(f, g);
        ASSERT_TRUE(op_meets(f, ramp_staircase(g, T * (1 - 1e-3), 1000, true))) << "case " << i;
        // The lower staircase lags the ramp by one step, so it needs n > 1e3 steps
        // to reach past g * T when the ramp is limited by the p-intercept.
        ASSERT_FALSE(op_meets(f, ramp_staircase(g, T * (1 + 1e-3), 4000, false))) << "case " << i;
    }
}

TEST(TimeToFailure, Examples) {
    const FleetState one = make_fleet({{"a", 5 * kW, 10 * kWh}});
    EXPECT_DOUBLE_EQ(time_to_failure(one, StepSignal::constant(4 * kW, 3 * hour), Policy::Optimal), 2.5 * hour);
    EXPECT_EQ(time_to_failure(config_a(), StepSignal::constant(22 * kW, 2 * hour), Policy::Optimal), INFINITY);
    EXPECT_EQ(time_to_failure(config_a(), StepSignal::constant(23 * kW, hour), Policy::Optimal), 0.0);
}

TEST(MaxFeasibleTruncation, Examples) {
    const FleetState one = make_fleet({{"a", 5 * kW, 10 * kWh}});
    EXPECT_DOUBLE_EQ(max_feasible_truncation(StepSignal::constant(4 * kW, 3 * hour), one), 2.5 * hour);
    EXPECT_EQ(max_feasible_truncation(StepSignal::constant(22 * kW, 2 * hour), config_a()), 2 * hour);
    EXPECT_EQ(max_feasible_truncation(StepSignal::constant(23 * kW, hour), config_a()), 0.0);
}

TEST(MaxFeasibleTruncation, EnergyBindingTouchesAtZero) {
    const FleetState one = make_fleet({{"a", 5 * kW, 10 * kWh}});
    const StepSignal s = StepSignal::constant(4 * kW, 3 * hour);
    const double t = max_feasible_truncation(s, one);
    const DominanceCheck c = check_dominance(capacity_curve(one), ep_transform(truncate(s, 0.0, t)));
    EXPECT_TRUE(c.dominates);
    EXPECT_NEAR(capacity_curve(one)(0.0) - ep_transform(truncate(s, 0.0, t))(0.0), 0.0, 1e-6);
}

TEST(TimeToFailureProperty, OptimalEqualsMaxFeasibleTruncation) {
    for (std::uint64_t i = 0; i < 1000; ++i) {
        auto rng = rng_for(53, i);
        const FleetState f = random_fleet(rng, 8);
        const StepSignal s = random_signal(rng, f.total_power(), 8);
        const double ttf = time_to_failure(f, s, Policy::Optimal);
        const double mft = max_feasible_truncation(s, f);
        if (std::isinf(ttf)) {
            ASSERT_EQ(mft, s.horizon()) << "case " << i;
        } else {
            ASSERT_TRUE(rel_close(ttf, mft, 1e-9, hour)) << "case " << i << " ttf=" << ttf << " mft=" << mft;
        }
    }
}

TEST(CompareFleets, Examples) {
    const ComparisonVerdict ca = compare_fleets(config_c(), config_a());
    EXPECT_EQ(ca.relation, Relation::ADominates);
    EXPECT_FALSE(ca.witness_p);

    const ComparisonVerdict ac = compare_fleets(config_a(), config_c());
    EXPECT_EQ(ac.relation, Relation::BDominates);
    EXPECT_TRUE(ac.witness_p);

    const ComparisonVerdict ab = compare_fleets(config_a(), config_b());
    EXPECT_EQ(ab.relation, Relation::Incomparable);
    ASSERT_TRUE(ab.witness_p);
    EXPECT_GE(*ab.witness_p, 4 * kW);
    EXPECT_LE(*ab.witness_p, 13 * kW);

    EXPECT_EQ(compare_fleets(config_a(), config_a()).relation, Relation::Equivalent);
    EXPECT_EQ(to_string(Relation::Incomparable), "INCOMPARABLE");
}

TEST(CompareFleetsProperty, PartialOrder) {
    auto dom = [](Relation r) { return r == Relation::ADominates || r == Relation::Equivalent; };
    for (std::uint64_t i = 0; i < 300; ++i) {
        auto rng = rng_for(54, i);
        const FleetState a = random_fleet(rng, 3), b = random_fleet(rng, 3), c = random_fleet(rng, 3);
        const Relation ab = compare_fleets(a, b).relation, ba = compare_fleets(b, a).relation;
        const Relation bc = compare_fleets(b, c).relation, ac = compare_fleets(a, c).relation;
        if (ab == Relation::ADominates) ASSERT_EQ(ba, Relation::BDominates);
        if (ab == Relation::Equivalent) ASSERT_EQ(ba, Relation::Equivalent);
        if (ab == Relation::Incomparable) ASSERT_EQ(ba, Relation::Incomparable);
        if (dom(ab) && dom(bc)) ASSERT_TRUE(dom(ac)) << "case " << i;
    }
}

TEST(Scenario, ValidationErrors) {
    auto bad = [](auto mutate) {
        ScenarioConfig c;
        mutate(c);
        try {
            validate(c);
        } catch (const Error& e) {
            return e.code() == ErrorCode::InvalidConfig;
        }
        return false;
    };
    EXPECT_TRUE(bad([](ScenarioConfig& c) { c.device_count = 0; }));
    EXPECT_TRUE(bad([](ScenarioConfig& c) { c.ttg_hours = {5, 1}; }));
    EXPECT_TRUE(bad([](ScenarioConfig& c) { c.power_kw = {0, 0}; }));
    EXPECT_TRUE(bad([](ScenarioConfig& c) { c.request_sd_mw = -1; }));
    EXPECT_TRUE(bad([](ScenarioConfig& c) { c.request_interval_hours = 0; }));
    EXPECT_TRUE(bad([](ScenarioConfig& c) { c.horizon_hours = -2; }));
    EXPECT_NO_THROW(validate(ScenarioConfig{}));
}

TEST(Scenario, DeterministicAndShaped) {
    ScenarioConfig c;
    c.seed = 77;
    const Scenario a = generate_scenario(c), b = generate_scenario(c);
    EXPECT_EQ(a.fleet.devices(), b.fleet.devices());
    EXPECT_EQ(a.request, b.request);
    EXPECT_EQ(a.request.size(), 24u);
    EXPECT_EQ(a.request.horizon(), 24 * hour);
    EXPECT_NEAR(a.fleet.total_power(), 7.5e6, 0.02 * 7.5e6);
    for (double v : a.request.values()) EXPECT_GE(v, 0.0);
    c.seed = 78;
    EXPECT_NE(generate_scenario(c).request, a.request);
}

TEST(Scenario, PartialFinalInterval) {
    ScenarioConfig c;
    c.device_count = 3;
    c.request_interval_hours = 0.7;
    c.horizon_hours = 2.0;
    const StepSignal s = sample_request(c, 0);
    EXPECT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(s.horizon(), 2 * hour);
}

TEST(FeasibilityProbability, DegenerateDistributions) {
    ScenarioConfig c;
    c.device_count = 50;
    c.request_sd_mw = 0.0;
    const FleetState f = sample_fleet(c);
    c.request_mean_mw = 0.0;
    EXPECT_EQ(feasibility_probability(f, c, 50).probability, 1.0);
    c.request_mean_mw = f.total_power() * 1.01 / 1e6;
    const ProbabilityEstimate none = feasibility_probability(f, c, 50);
    EXPECT_EQ(none.probability, 0.0);
    EXPECT_GT(none.half_width, 0.0);
}

ScenarioConfig desk_config() {
    ScenarioConfig c;
    c.device_count = 200;
    c.request_mean_mw = 0.07;
    c.request_sd_mw = 0.02;
    c.horizon_hours = 10;
    c.seed = 5;
    return c;
}

TEST(FeasibilityProbability, WorkerCountInvariant) {
    const ScenarioConfig c = desk_config();
    const FleetState f = sample_fleet(c);
    const ProbabilityEstimate one = feasibility_probability(f, c, 300, 1);
    for (unsigned w : {2u, 3u, 8u}) {
        const ProbabilityEstimate many = feasibility_probability(f, c, 300, w);
        EXPECT_EQ(many.feasible, one.feasible);
        EXPECT_EQ(many.half_width, one.half_width);
    }
    EXPECT_GT(one.feasible, 0u);
    EXPECT_LT(one.feasible, 300u);
}

TEST(FeasibilityProbability, MonotoneInMean) {
    ScenarioConfig c = desk_config();
    const FleetState f = sample_fleet(c);
    double prev = 2.0;
    for (double mean : {0.06, 0.07, 0.08}) {
        c.request_mean_mw = mean;
        const double p = feasibility_probability(f, c, 300, 4).probability;
        EXPECT_LE(p, prev) << mean;
        prev = p;
    }
}

TEST(FeasibilityProbability, AgreesWithOracleOnSubsample) {
    const ScenarioConfig c = desk_config();
    const FleetState f = sample_fleet(c);
    const EPCurve cap = capacity_curve(f);
    for (std::uint64_t i = 0; i < 1000; i += 20) {
        const StepSignal s = sample_request(c, i);
        const DominanceCheck d = check_dominance(cap, ep_transform(s));
        const auto v = oracle::brute_force_feasible(s, f, 60.0);
        if (std::fabs(d.margin) < 1e-6 * f.total_energy()) continue;
        EXPECT_EQ(d.dominates, v.feasible) << "trace " << i;
    }
}

TEST(Wilson, KnownValues) {
    EXPECT_EQ(wilson_half_width(0, 0), 0.0);
    EXPECT_NEAR(wilson_half_width(50, 100), 0.0962, 5e-4);
    EXPECT_NEAR(wilson_half_width(0, 100), 0.0185, 5e-4);
}

}  // namespace
}  // namespace flexcap
