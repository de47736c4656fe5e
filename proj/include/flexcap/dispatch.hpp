#pragma once

// Feedback dispatch policies and an exact event-driven closed-loop simulator.

#include <limits>
#include <string_view>
#include <vector>

#include "flexcap/core.hpp"

namespace flexcap {

enum class Policy {
    Optimal,            // descending time-to-go, one fractional group
    LowestPowerFirst,   // LPF
    ProportionOfPower,  // PoP
};

std::string_view to_string(Policy policy) noexcept;
/// Accepts "op", "lpf", "pop" (case-sensitive). Throws InvalidConfig.
Policy parse_policy(std::string_view name);

/// Serves groups in descending time-to-go at full power until the request is
/// met; the marginal group runs at a uniform fraction of each member's p_max.
/// Empty groups are never allocated. Throws InvalidRequest on request < 0.
DispatchResult optimal_dispatch(const FleetState& state, double request);

/// Fills nonempty devices in ascending p_max order (ties by id, then index).
DispatchResult lpf_dispatch(const FleetState& state, double request);

/// Every nonempty device runs at p_max * request / (sum of nonempty p_max),
/// capped at p_max.
DispatchResult pop_dispatch(const FleetState& state, double request);

DispatchResult dispatch(Policy policy, const FleetState& state, double request);

/// Sum of p_max over devices with energy left.
double max_available_power(const FleetState& state);

struct SimulationOptions {
    /// Keep a FleetState snapshot per event and the per-device allocation per
    /// segment. Costs O(devices) memory per event.
    bool record_states = true;
    /// Stop at the first deficit instead of continuing best-effort delivery.
    bool halt_at_failure = false;
    double tolerance = kDefaultTolerance;
};

/// Aggregate view of one inter-event segment.
struct SegmentSummary {
    double start = 0.0;
    double end = 0.0;
    double request = 0.0;    // W
    double delivered = 0.0;  // W
    double deficit = 0.0;    // W
    double available = 0.0;  // W, max available power during the segment
};

struct Trajectory {
    std::vector<double> event_times;
    std::vector<FleetState> states;             // per event, when recorded
    std::vector<DispatchResult> allocations;    // per segment, when recorded
    std::vector<SegmentSummary> segments;       // per segment, always
    std::vector<double> final_energy;           // per device, J
    double delivered_energy = 0.0;              // J
    double time_to_failure = std::numeric_limits<double>::infinity();

    bool failed() const noexcept { return time_to_failure != std::numeric_limits<double>::infinity(); }
};

/// Integrates the closed loop exactly. Between events every allocation is
/// constant, so the states at events follow from linear decay. Events are
/// signal breakpoints, depletions, and (for the optimal policy) group merges.
Trajectory simulate(const FleetState& fleet, const StepSignal& signal, Policy policy,
                    const SimulationOptions& options = {});

}  // namespace flexcap
