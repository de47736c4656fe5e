#pragma once

// Domain types shared by every flexcap module.
//
// Units are SI throughout: watts, joules, seconds. Conversion from kW, kWh,
// hours etc. happens only at the file/CLI boundary (see io.hpp).

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexcap {

inline constexpr double kDefaultTolerance = 1e-9;

enum class ErrorCode {
    EmptyFleet,
    InvalidDevice,
    InvalidSignal,
    InvalidWindow,
    InvalidPartition,
    InvalidRequest,
    InvalidDuration,
    InvalidGradient,
    InvalidClusterCount,
    InvalidConfig,
    InvalidStep,
    OracleMismatch,
    ParseError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// One discharge-only storage unit.
struct Device {
    std::string id;
    double p_max = 0.0;   // W
    double energy = 0.0;  // J, extractable

    /// Remaining time the device can sustain full power, in seconds.
    double time_to_go() const noexcept { return energy / p_max; }
    bool empty() const noexcept { return energy <= 0.0; }

    friend bool operator==(const Device&, const Device&) = default;
};

/// A fleet snapshot with devices partitioned into groups of equal
/// time-to-go, ordered by strictly descending time-to-go.
///
/// Within a group all members share the group's time-to-go, which is
/// sum(energy) / sum(p_max) over the members so that grouping never
/// creates or destroys energy.
class FleetState {
public:
    FleetState() = default;

    const std::vector<Device>& devices() const noexcept { return devices_; }
    const std::vector<std::vector<std::size_t>>& groups() const noexcept { return groups_; }
    std::span<const double> group_powers() const noexcept { return group_powers_; }
    std::span<const double> group_ttg() const noexcept { return group_ttg_; }
    std::size_t group_count() const noexcept { return groups_.size(); }
    std::size_t size() const noexcept { return devices_.size(); }

    /// Sum of p_max over all devices, empty ones included.
    double total_power() const noexcept { return total_power_; }
    /// Sum of extractable energy.
    double total_energy() const noexcept { return total_energy_; }

    /// Contiguous copies of the per-device ratings, in device order.
    std::span<const double> p_max() const noexcept { return p_max_; }
    std::span<const double> energy() const noexcept { return energy_; }

    friend FleetState make_fleet(std::vector<Device> devices, double tolerance);

private:
    std::vector<Device> devices_;
    std::vector<std::vector<std::size_t>> groups_;
    std::vector<double> group_powers_;
    std::vector<double> group_ttg_;
    std::vector<double> p_max_;
    std::vector<double> energy_;
    double total_power_ = 0.0;
    double total_energy_ = 0.0;
};

/// Groups devices by time-to-go. Devices whose time-to-go differs from the
/// group leader by at most tolerance * max(1 s, ttg) share a group.
/// Throws EmptyFleet / InvalidDevice.
FleetState make_fleet(std::vector<Device> devices, double tolerance = kDefaultTolerance);

/// Piecewise-constant, nonnegative, finite-horizon power reference.
/// Segment k covers [starts[k], starts[k+1]) with the last one ending at the
/// horizon; the signal is zero after the horizon. The default-constructed
/// signal is the empty zero signal with horizon 0.
class StepSignal {
public:
    StepSignal() = default;
    StepSignal(std::vector<double> starts, std::vector<double> values, double horizon);

    static StepSignal constant(double value, double duration);
    static StepSignal from_durations(std::span<const double> values, std::span<const double> durations);

    std::span<const double> starts() const noexcept { return starts_; }
    std::span<const double> values() const noexcept { return values_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double start(std::size_t k) const { return starts_[k]; }
    double end(std::size_t k) const { return k + 1 < starts_.size() ? starts_[k + 1] : horizon_; }
    double duration(std::size_t k) const { return end(k) - start(k); }
    double value(std::size_t k) const { return values_[k]; }

    /// Value at time t (right-continuous); zero outside [0, horizon).
    double at(double t) const noexcept;
    /// Integral of the signal over [0, horizon).
    double energy() const noexcept;
    /// Supremum of the signal (0 for the empty signal).
    double peak() const noexcept;

    /// Adjacent segments with identical values merged.
    StepSignal normalized() const;

    friend bool operator==(const StepSignal&, const StepSignal&) = default;

private:
    std::vector<double> starts_;
    std::vector<double> values_;
    double horizon_ = 0.0;
};

/// Restriction of the signal to [t0, t1), shifted so the window starts at 0.
/// The result's horizon is min(t1, horizon) - t0, clipped at 0.
StepSignal truncate(const StepSignal& signal, double t0, double t1);

/// Splits the signal at the given cut times and concatenates the parts in
/// the given order (0-based indices). Cuts at 0 and at the horizon are
/// implied. Throws InvalidPartition.
StepSignal permute_segments(const StepSignal& signal, std::span<const double> cuts,
                            std::span<const std::size_t> order);

/// Per-device allocation for one instant.
struct DispatchResult {
    std::vector<double> allocation;  // W per device, device order
    double total = 0.0;
    double deficit = 0.0;
};

}  // namespace flexcap
