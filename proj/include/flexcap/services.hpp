#pragma once

// Service sizing, failure analysis, fleet comparison and Monte Carlo
// feasibility estimates built on the capacity curve.

#include <cstdint>
#include <optional>
#include <string_view>

#include "flexcap/core.hpp"
#include "flexcap/dispatch.hpp"
#include "flexcap/epcurve.hpp"

namespace flexcap {

/// Largest pulse magnitude sustainable for `duration` seconds:
/// min over capacity breakpoints of p_k + E_k / duration. Throws InvalidDuration.
double max_pulse(const FleetState& fleet, double duration);

/// Longest ramp P(t) = gradient * t that the fleet can follow, in seconds.
/// Bisection on the duration with the ramp dominance test. Throws InvalidGradient.
double max_ramp(const FleetState& fleet, double gradient, double tolerance = kDefaultTolerance);

/// First instant the policy cannot meet the request, or +inf.
double time_to_failure(const FleetState& fleet, const StepSignal& signal, Policy policy,
                       double tolerance = kDefaultTolerance);

/// Largest t such that the signal truncated to [0, t) is feasible; the
/// horizon when the whole signal is. Computed from the capacity curve alone:
/// a binary search over segment ends followed by a closed-form cut inside the
/// first infeasible segment.
double max_feasible_truncation(const StepSignal& signal, const FleetState& fleet,
                               double tolerance = kDefaultTolerance);

enum class Relation { ADominates, BDominates, Equivalent, Incomparable };

std::string_view to_string(Relation relation) noexcept;

struct ComparisonVerdict {
    Relation relation = Relation::Equivalent;
    /// Where a's capacity fails to dominate b's (for BDominates/Incomparable).
    std::optional<double> witness_p;
};

ComparisonVerdict compare_fleets(const FleetState& a, const FleetState& b,
                                 double tolerance = kDefaultTolerance);

struct UniformRange {
    double low = 0.0;
    double high = 0.0;
};

/// Random fleet and request model. Units follow the usual way of quoting
/// such studies: hours, kW for devices and MW for the request.
struct ScenarioConfig {
    std::size_t device_count = 10000;
    UniformRange ttg_hours{0.0, 10.0};
    UniformRange power_kw{0.0, 1.5};
    double request_mean_mw = 2.0;
    double request_sd_mw = 0.8;
    double request_interval_hours = 1.0;
    double horizon_hours = 24.0;
    std::uint64_t seed = 0;
};

/// Throws InvalidConfig on bad bounds or nonpositive interval/horizon.
void validate(const ScenarioConfig& config);

struct Scenario {
    FleetState fleet;
    StepSignal request;
};

/// Seeded draws: fleet from its own substream, request trace from substream 0.
Scenario generate_scenario(const ScenarioConfig& config);

/// Devices only, reproducible for a given seed.
FleetState sample_fleet(const ScenarioConfig& config);

/// Request trace number `index`; every index has an independent substream.
/// Normal draws are clamped at zero.
StepSignal sample_request(const ScenarioConfig& config, std::uint64_t index);

struct ProbabilityEstimate {
    double probability = 0.0;
    double half_width = 0.0;  // Wilson 95 %
    std::size_t samples = 0;
    std::size_t feasible = 0;
};

/// Wilson score interval half-width at 95 % confidence.
double wilson_half_width(std::size_t successes, std::size_t trials);

/// Fraction of sampled request traces the fleet can meet. Independent of
/// `workers`: trace i always comes from substream i.
ProbabilityEstimate feasibility_probability(const FleetState& fleet, const ScenarioConfig& config,
                                            std::size_t samples, unsigned workers = 1,
                                            double tolerance = kDefaultTolerance);

}  // namespace flexcap
