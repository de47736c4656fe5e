#pragma once

// Brute-force feasibility checkers for validating the capacity-curve test on
// small instances. Slow by construction; never used on the production path.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flexcap/core.hpp"

namespace flexcap::oracle {

struct OracleVerdict {
    bool feasible = true;
    /// Smallest energy the fleet could still deliver above the current
    /// request level, over all steps (J). Zero signal: the fleet energy.
    double margin = 0.0;
    /// Largest step used (s).
    double step = 0.0;
    /// Energy delivered over the horizon, best effort after a deficit (J).
    double delivered = 0.0;
};

/// Time-stepped greedy simulation with the optimal dispatch rule. Each step
/// is cut at segment ends and at the first device depletion, the fleet is
/// regrouped from scratch every step, and energies decrease by u * step.
/// Feasible iff no step has a deficit. Throws InvalidStep for step <= 0.
OracleVerdict brute_force_feasible(const StepSignal& signal, const FleetState& fleet, double step,
                                   double tolerance = kDefaultTolerance);

struct FlowVerdict {
    bool feasible = true;
    double demand = 0.0;     // J requested
    double shortfall = 0.0;  // J that no allocation can deliver
};

/// Dispatch-rule-free check: the signal is feasible iff a transportation
/// network (segment k -> device i with capacity p_max_i * d_k, device i ->
/// sink with capacity e_i) carries the full requested energy. Solved with
/// Edmonds-Karp.
FlowVerdict flow_feasible(const StepSignal& signal, const FleetState& fleet,
                          double tolerance = kDefaultTolerance);

using FleetSampler = std::function<FleetState(std::mt19937_64&)>;
using SignalSampler = std::function<StepSignal(std::mt19937_64&, const FleetState&)>;

/// Up to `max_devices` devices, whole-minute time-to-go, 0.1 kW ratings.
FleetSampler small_fleet_sampler(std::size_t max_devices = 6);
/// Up to `max_segments` whole-minute segments whose energy is scaled to
/// 0.3..1.5 times the fleet energy, values up to 1.1 times the fleet power.
SignalSampler small_signal_sampler(std::size_t max_segments = 8);

/// Per-case generator; case i draws from its own substream of `seed`.
std::mt19937_64 case_stream(std::uint64_t seed, std::uint64_t index);

struct CrossValidationOptions {
    /// Upper bound on the brute-force step (s); the step is the gcd of the
    /// signal breakpoints in whole seconds, capped here.
    double max_step = 10.0;
    double tolerance = kDefaultTolerance;
    /// Also check permutation invariance and equal OP terminal states.
    bool check_permutations = true;
    /// Cases are split across this many threads; the samplers must be safe
    /// to call concurrently. The report does not depend on the value.
    unsigned workers = 1;
};

struct CrossValidationReport {
    std::size_t cases = 0;
    std::size_t feasible_cases = 0;
    std::size_t agreements = 0;      // transform, flow and brute force agree
    std::size_t boundary_cases = 0;  // disagreements excused by the bands
    std::size_t banded_cases = 0;    // cases inside a band, agreeing or not
    std::size_t permutation_checks = 0;
    std::size_t terminal_state_checks = 0;
    double max_terminal_state_error = 0.0;  // relative to fleet energy
    std::vector<std::uint64_t> boundary_indices;
};

/// Compares is_feasible with both brute-force checkers on sampled cases.
/// Throws OracleMismatch naming the seed and case index on any disagreement
/// outside the boundary bands.
CrossValidationReport cross_validate(const FleetSampler& fleets, const SignalSampler& signals,
                                     std::size_t cases, std::uint64_t seed,
                                     const CrossValidationOptions& options = {});

}  // namespace flexcap::oracle
