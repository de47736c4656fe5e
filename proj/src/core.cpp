#include "flexcap/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace flexcap {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::EmptyFleet: return "EmptyFleet";
    case ErrorCode::InvalidDevice: return "InvalidDevice";
    case ErrorCode::InvalidSignal: return "InvalidSignal";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::InvalidDuration: return "InvalidDuration";
    case ErrorCode::InvalidGradient: return "InvalidGradient";
    case ErrorCode::InvalidClusterCount: return "InvalidClusterCount";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::OracleMismatch: return "OracleMismatch";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

FleetState make_fleet(std::vector<Device> devices, double tolerance) {
    if (devices.empty()) {
        throw Error(ErrorCode::EmptyFleet, "fleet has no devices");
    }
    for (const auto& d : devices) {
        if (!(d.p_max > 0.0) || !std::isfinite(d.p_max)) {
            throw Error(ErrorCode::InvalidDevice, "device '" + d.id + "' has nonpositive p_max");
        }
        if (!(d.energy >= 0.0) || !std::isfinite(d.energy)) {
            throw Error(ErrorCode::InvalidDevice, "device '" + d.id + "' has negative energy");
        }
    }

    FleetState fleet;
    fleet.devices_ = std::move(devices);
    const auto& devs = fleet.devices_;
    const std::size_t n = devs.size();

    fleet.p_max_.resize(n);
    fleet.energy_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        fleet.p_max_[i] = devs[i].p_max;
        fleet.energy_[i] = devs[i].energy;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return devs[a].time_to_go() > devs[b].time_to_go();
    });

    double leader_ttg = 0.0;
    for (std::size_t idx : order) {
        const double ttg = devs[idx].time_to_go();
        if (fleet.groups_.empty() || leader_ttg - ttg > tolerance * std::max(1.0, leader_ttg)) {
            fleet.groups_.emplace_back();
            leader_ttg = ttg;
        }
        fleet.groups_.back().push_back(idx);
    }

    fleet.group_powers_.reserve(fleet.groups_.size());
    fleet.group_ttg_.reserve(fleet.groups_.size());
    for (const auto& g : fleet.groups_) {
        double power = 0.0;
        double energy = 0.0;
        for (std::size_t idx : g) {
            power += devs[idx].p_max;
            energy += devs[idx].energy;
        }
        fleet.group_powers_.push_back(power);
        fleet.group_ttg_.push_back(energy / power);
    }
    // Averaging inside a group can in principle tie two neighbouring groups
    // that were split by the tolerance; keep the ordering strict.
    for (std::size_t g = 1; g < fleet.group_ttg_.size(); ++g) {
        if (!(fleet.group_ttg_[g] < fleet.group_ttg_[g - 1])) {
            fleet.group_ttg_[g] = std::nextafter(fleet.group_ttg_[g - 1], 0.0);
        }
    }

    for (double p : fleet.p_max_) fleet.total_power_ += p;
    for (double e : fleet.energy_) fleet.total_energy_ += e;
    return fleet;
}

StepSignal::StepSignal(std::vector<double> starts, std::vector<double> values, double horizon)
    : starts_(std::move(starts)), values_(std::move(values)), horizon_(horizon) {
    if (starts_.size() != values_.size()) {
        throw Error(ErrorCode::InvalidSignal, "signal needs one value per segment");
    }
    if (!std::isfinite(horizon_) || horizon_ < 0.0) {
        throw Error(ErrorCode::InvalidSignal, "signal horizon must be finite and nonnegative");
    }
    if (starts_.empty()) {
        if (horizon_ != 0.0) {
            // A horizon without segments is just zero power; keep one segment so
            // the horizon stays meaningful.
            starts_.push_back(0.0);
            values_.push_back(0.0);
        }
        return;
    }
    if (starts_.front() != 0.0) {
        throw Error(ErrorCode::InvalidSignal, "signal must start at t = 0");
    }
    for (std::size_t k = 0; k < starts_.size(); ++k) {
        if (k > 0 && !(starts_[k] > starts_[k - 1])) {
            throw Error(ErrorCode::InvalidSignal, "segment starts must be strictly increasing");
        }
        if (!(values_[k] >= 0.0) || !std::isfinite(values_[k])) {
            throw Error(ErrorCode::InvalidSignal, "signal values must be finite and nonnegative");
        }
    }
    if (!(horizon_ > starts_.back())) {
        throw Error(ErrorCode::InvalidSignal, "horizon must lie after the last segment start");
    }
}

StepSignal StepSignal::constant(double value, double duration) {
    if (duration <= 0.0) return {};
    return StepSignal({0.0}, {value}, duration);
}

StepSignal StepSignal::from_durations(std::span<const double> values, std::span<const double> durations) {
    if (values.size() != durations.size()) {
        throw Error(ErrorCode::InvalidSignal, "need one duration per value");
    }
    std::vector<double> starts;
    std::vector<double> vals;
    double t = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(durations[k] >= 0.0)) {
            throw Error(ErrorCode::InvalidSignal, "segment durations must be nonnegative");
        }
        const double next = t + durations[k];
        if (!(next > t)) continue;
        starts.push_back(t);
        vals.push_back(values[k]);
        t = next;
    }
    return StepSignal(std::move(starts), std::move(vals), t);
}

double StepSignal::at(double t) const noexcept {
    if (values_.empty() || t < 0.0 || t >= horizon_) return 0.0;
    auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return values_[static_cast<std::size_t>(it - starts_.begin()) - 1];
}

double StepSignal::energy() const noexcept {
    double e = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) e += values_[k] * duration(k);
    return e;
}

double StepSignal::peak() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, v);
    return m;
}

StepSignal StepSignal::normalized() const {
    std::vector<double> starts;
    std::vector<double> vals;
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!vals.empty() && vals.back() == values_[k]) continue;
        starts.push_back(starts_[k]);
        vals.push_back(values_[k]);
    }
    return StepSignal(std::move(starts), std::move(vals), horizon_);
}

StepSignal truncate(const StepSignal& signal, double t0, double t1) {
    if (!(t0 >= 0.0) || !(t1 >= t0)) {
        throw Error(ErrorCode::InvalidWindow, "truncation window must satisfy 0 <= t0 <= t1");
    }
    const double stop = std::min(t1, signal.horizon());
    if (!(stop > t0)) return {};

    std::vector<double> starts;
    std::vector<double> values;
    for (std::size_t k = 0; k < signal.size(); ++k) {
        const double a = std::max(signal.start(k), t0);
        const double b = std::min(signal.end(k), stop);
        if (!(b > a)) continue;
        starts.push_back(a - t0);
        values.push_back(signal.value(k));
    }
    if (starts.empty()) return {};
    // Shifting can round a start to the same value as its neighbour.
    std::vector<double> s2;
    std::vector<double> v2;
    const double horizon = stop - t0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        if (!s2.empty() && !(starts[k] > s2.back())) {
            v2.back() = values[k];
            continue;
        }
        if (!(starts[k] < horizon)) break;
        s2.push_back(starts[k]);
        v2.push_back(values[k]);
    }
    s2.front() = 0.0;
    return StepSignal(std::move(s2), std::move(v2), horizon);
}

StepSignal permute_segments(const StepSignal& signal, std::span<const double> cuts,
                            std::span<const std::size_t> order) {
    const double horizon = signal.horizon();
    std::vector<double> bounds;
    bounds.reserve(cuts.size() + 2);
    bounds.push_back(0.0);
    for (double c : cuts) {
        if (!(c >= 0.0) || !(c <= horizon)) {
            throw Error(ErrorCode::InvalidPartition, "cut time outside [0, horizon]");
        }
        if (c == 0.0 || c == horizon) continue;
        if (!(c > bounds.back())) {
            throw Error(ErrorCode::InvalidPartition, "cut times must be strictly increasing");
        }
        bounds.push_back(c);
    }
    if (horizon > 0.0) bounds.push_back(horizon);
    const std::size_t parts = bounds.size() - 1;

    if (order.size() != parts) {
        throw Error(ErrorCode::InvalidPartition, "permutation length does not match part count");
    }
    std::vector<bool> seen(parts, false);
    for (std::size_t idx : order) {
        if (idx >= parts || seen[idx]) {
            throw Error(ErrorCode::InvalidPartition, "order is not a permutation");
        }
        seen[idx] = true;
    }

    std::vector<double> values;
    std::vector<double> durations;
    for (std::size_t part : order) {
        const double a = bounds[part];
        const double b = bounds[part + 1];
        for (std::size_t k = 0; k < signal.size(); ++k) {
            const double lo = std::max(signal.start(k), a);
            const double hi = std::min(signal.end(k), b);
            if (hi > lo) {
                values.push_back(signal.value(k));
                durations.push_back(hi - lo);
            }
        }
    }
    return StepSignal::from_durations(values, durations);
}

}  // namespace flexcap
