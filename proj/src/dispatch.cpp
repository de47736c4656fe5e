#include "flexcap/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "flexcap/kernels.hpp"

namespace flexcap {

std::string_view to_string(Policy policy) noexcept {
    switch (policy) {
    case Policy::Optimal: return "op";
    case Policy::LowestPowerFirst: return "lpf";
    case Policy::ProportionOfPower: return "pop";
    }
    return "unknown";
}

Policy parse_policy(std::string_view name) {
    if (name == "op") return Policy::Optimal;
    if (name == "lpf") return Policy::LowestPowerFirst;
    if (name == "pop") return Policy::ProportionOfPower;
    throw Error(ErrorCode::InvalidConfig, "unknown policy '" + std::string(name) + "'");
}

namespace {

void check_request(double request) {
    if (!(request >= 0.0) || !std::isfinite(request)) {
        throw Error(ErrorCode::InvalidRequest, "request must be finite and nonnegative");
    }
}

// Fraction of full power for each group under the optimal rule. Groups with
// no time-to-go left are skipped. Returns the available power.
double group_fractions(std::span<const double> powers, std::span<const double> ttg, double request,
                       std::span<double> fractions) {
    double cumulative = 0.0;
    for (std::size_t g = 0; g < powers.size(); ++g) {
        if (!(ttg[g] > 0.0)) {
            fractions[g] = 0.0;
            continue;
        }
        const double next = cumulative + powers[g];
        if (next <= request) {
            fractions[g] = 1.0;
        } else if (cumulative >= request) {
            fractions[g] = 0.0;
        } else {
            fractions[g] = (request - cumulative) / powers[g];
        }
        cumulative = next;
    }
    return cumulative;
}

std::vector<std::size_t> lpf_order(const std::vector<Device>& devices) {
    std::vector<std::size_t> order(devices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (devices[a].p_max != devices[b].p_max) return devices[a].p_max < devices[b].p_max;
        return devices[a].id < devices[b].id;
    });
    return order;
}

// Returns the unserved part of the request.
double lpf_fill(std::span<const std::size_t> order, std::span<const double> p_max,
                std::span<const double> energy, double request, std::span<double> out) {
    double remaining = request;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i : order) {
        if (!(energy[i] > 0.0)) continue;
        if (!(remaining > 0.0)) break;
        const double u = std::min(p_max[i], remaining);
        out[i] = u;
        remaining -= u;
    }
    return std::max(remaining, 0.0);
}

// Returns the available power.
double pop_fill(const kernels::KernelTable& k, std::span<const double> p_max, std::span<const double> energy,
                double request, std::span<double> out) {
    const double available = k.masked_power_sum(p_max, energy);
    if (!(available > 0.0)) {
        std::fill(out.begin(), out.end(), 0.0);
        return 0.0;
    }
    k.scale_clamped(p_max, energy, request / available, out);
    return available;
}

double sum(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

}  // namespace

DispatchResult optimal_dispatch(const FleetState& state, double request) {
    check_request(request);
    const auto powers = state.group_powers();
    const auto ttg = state.group_ttg();
    std::vector<double> fractions(powers.size());
    const double available = group_fractions(powers, ttg, request, fractions);

    DispatchResult result;
    result.allocation.assign(state.size(), 0.0);
    const auto& devices = state.devices();
    for (std::size_t g = 0; g < state.group_count(); ++g) {
        if (fractions[g] == 0.0) continue;
        for (std::size_t i : state.groups()[g]) {
            if (devices[i].energy > 0.0) result.allocation[i] = fractions[g] * devices[i].p_max;
        }
    }
    result.total = sum(result.allocation);
    result.deficit = request > available ? request - available : 0.0;
    return result;
}

DispatchResult lpf_dispatch(const FleetState& state, double request) {
    check_request(request);
    const auto order = lpf_order(state.devices());
    DispatchResult result;
    result.allocation.assign(state.size(), 0.0);
    result.deficit = lpf_fill(order, state.p_max(), state.energy(), request, result.allocation);
    result.total = sum(result.allocation);
    return result;
}

DispatchResult pop_dispatch(const FleetState& state, double request) {
    check_request(request);
    DispatchResult result;
    result.allocation.assign(state.size(), 0.0);
    const double available =
        pop_fill(kernels::active(), state.p_max(), state.energy(), request, result.allocation);
    result.total = sum(result.allocation);
    result.deficit = request > available ? request - available : 0.0;
    return result;
}

DispatchResult dispatch(Policy policy, const FleetState& state, double request) {
    switch (policy) {
    case Policy::Optimal: return optimal_dispatch(state, request);
    case Policy::LowestPowerFirst: return lpf_dispatch(state, request);
    case Policy::ProportionOfPower: return pop_dispatch(state, request);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown policy");
}

double max_available_power(const FleetState& state) {
    return kernels::active().masked_power_sum(state.p_max(), state.energy());
}

namespace {

bool is_deficit(double deficit, double request, double tol) {
    return deficit > tol * std::max(1.0, request);
}

FleetState snapshot(const std::vector<Device>& base, std::span<const double> energy, double tol) {
    std::vector<Device> devices = base;
    for (std::size_t i = 0; i < devices.size(); ++i) devices[i].energy = energy[i];
    return make_fleet(std::move(devices), tol);
}

struct Group {
    std::vector<std::size_t> members;
    double power = 0.0;
    double ttg = 0.0;
};

class OptimalSimulator {
public:
    OptimalSimulator(const FleetState& fleet, const SimulationOptions& options)
        : fleet_(fleet), tol_(options.tolerance) {
        for (std::size_t g = 0; g < fleet.group_count(); ++g) {
            groups_.push_back({fleet.groups()[g], fleet.group_powers()[g], fleet.group_ttg()[g]});
        }
        normalize();
    }

    std::size_t group_count() const { return groups_.size(); }

    // Fractions for the current request; returns the available power.
    double rates(double request, std::vector<double>& r) const {
        std::vector<double> powers(groups_.size());
        std::vector<double> ttg(groups_.size());
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            powers[g] = groups_[g].power;
            ttg[g] = groups_[g].ttg;
        }
        r.resize(groups_.size());
        return group_fractions(powers, ttg, request, r);
    }

    // Earliest merge or depletion under the given rates. Returns the time
    // until it and the index of the upper group involved.
    std::pair<double, std::size_t> next_event(const std::vector<double>& r) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t who = groups_.size();
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            if (!(groups_[g].ttg > 0.0)) continue;
            const bool last = g + 1 == groups_.size();
            const double below_ttg = last ? 0.0 : groups_[g + 1].ttg;
            const double below_rate = last ? 0.0 : r[g + 1];
            if (!(r[g] > below_rate)) continue;
            const double dt = (groups_[g].ttg - below_ttg) / (r[g] - below_rate);
            if (dt < best) {
                best = dt;
                who = g;
            }
        }
        return {best, who};
    }

    void advance(const std::vector<double>& r, double dt) {
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            if (r[g] > 0.0) groups_[g].ttg = std::max(groups_[g].ttg - r[g] * dt, 0.0);
        }
    }

    // Makes the group `g` coincide with its lower neighbour (or zero).
    void land(std::size_t g) {
        groups_[g].ttg = g + 1 < groups_.size() ? groups_[g + 1].ttg : 0.0;
        normalize();
    }

    void normalize() {
        for (auto& g : groups_) {
            if (g.ttg <= tol_) g.ttg = 0.0;
        }
        std::vector<Group> merged;
        merged.reserve(groups_.size());
        for (auto& g : groups_) {
            if (!merged.empty()) {
                Group& top = merged.back();
                if (top.ttg - g.ttg <= tol_ * std::max(1.0, top.ttg)) {
                    const double power = top.power + g.power;
                    top.ttg = top.ttg == g.ttg ? g.ttg : (top.ttg * top.power + g.ttg * g.power) / power;
                    top.power = power;
                    top.members.insert(top.members.end(), g.members.begin(), g.members.end());
                    continue;
                }
            }
            merged.push_back(std::move(g));
        }
        groups_ = std::move(merged);
    }

    std::vector<double> energies() const {
        std::vector<double> e(fleet_.size(), 0.0);
        for (const auto& g : groups_) {
            for (std::size_t i : g.members) {
                e[i] = fleet_.devices()[i].energy > 0.0 ? g.ttg * fleet_.devices()[i].p_max : 0.0;
            }
        }
        return e;
    }

    std::vector<double> allocation(const std::vector<double>& r) const {
        std::vector<double> u(fleet_.size(), 0.0);
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            if (r[g] == 0.0) continue;
            for (std::size_t i : groups_[g].members) {
                if (fleet_.devices()[i].energy > 0.0) u[i] = r[g] * fleet_.devices()[i].p_max;
            }
        }
        return u;
    }

private:
    const FleetState& fleet_;
    double tol_;
    std::vector<Group> groups_;
};

Trajectory simulate_optimal(const FleetState& fleet, const StepSignal& signal, const SimulationOptions& opt) {
    Trajectory traj;
    OptimalSimulator sim(fleet, opt);
    traj.event_times.push_back(0.0);
    if (opt.record_states) traj.states.push_back(snapshot(fleet.devices(), sim.energies(), opt.tolerance));

    std::vector<double> r;
    std::size_t seg = 0;
    double t = 0.0;
    // Each pass either crosses a breakpoint or removes a group.
    const std::size_t max_passes = 4 * (signal.size() + fleet.size()) + 16;
    for (std::size_t pass = 0; seg < signal.size() && pass < max_passes; ++pass) {
        const double request = signal.value(seg);
        const double seg_end = signal.end(seg);
        const double available = sim.rates(request, r);
        const double deficit = request > available ? request - available : 0.0;
        if (is_deficit(deficit, request, opt.tolerance) && !traj.failed()) {
            traj.time_to_failure = t;
            if (opt.halt_at_failure) break;
        }

        auto [dt, who] = sim.next_event(r);
        bool breakpoint = false;
        if (!(dt < seg_end - t)) {
            dt = seg_end - t;
            breakpoint = true;
        }

        const double delivered = request - deficit;
        if (dt > 0.0) {
            traj.segments.push_back({t, breakpoint ? seg_end : t + dt, request, delivered, deficit, available});
            if (opt.record_states) {
                DispatchResult d;
                d.allocation = sim.allocation(r);
                d.total = sum(d.allocation);
                d.deficit = deficit;
                traj.allocations.push_back(std::move(d));
            }
            traj.delivered_energy += delivered * dt;
            sim.advance(r, dt);
        }
        if (breakpoint) {
            t = seg_end;
            ++seg;
            sim.normalize();
        } else {
            t += dt;
            sim.land(who);
        }
        if (dt > 0.0) {
            traj.event_times.push_back(t);
            if (opt.record_states) traj.states.push_back(snapshot(fleet.devices(), sim.energies(), opt.tolerance));
        }
    }
    traj.final_energy = sim.energies();
    return traj;
}

Trajectory simulate_device_level(const FleetState& fleet, const StepSignal& signal, Policy policy,
                                 const SimulationOptions& opt) {
    const auto& k = kernels::active();
    Trajectory traj;
    const auto p_max = fleet.p_max();
    std::vector<double> energy(fleet.energy().begin(), fleet.energy().end());
    std::vector<double> u(fleet.size(), 0.0);
    std::vector<std::size_t> order;
    if (policy == Policy::LowestPowerFirst) order = lpf_order(fleet.devices());

    auto zero_small = [&] {
        for (std::size_t i = 0; i < energy.size(); ++i) {
            if (energy[i] > 0.0 && energy[i] <= opt.tolerance * p_max[i]) energy[i] = 0.0;
        }
    };
    zero_small();

    traj.event_times.push_back(0.0);
    if (opt.record_states) traj.states.push_back(snapshot(fleet.devices(), energy, opt.tolerance));

    std::size_t seg = 0;
    double t = 0.0;
    const std::size_t max_passes = 2 * (signal.size() + fleet.size()) + 16;
    for (std::size_t pass = 0; seg < signal.size() && pass < max_passes; ++pass) {
        const double request = signal.value(seg);
        const double seg_end = signal.end(seg);
        double available = 0.0;
        double deficit = 0.0;
        if (policy == Policy::LowestPowerFirst) {
            deficit = lpf_fill(order, p_max, energy, request, u);
            available = k.masked_power_sum(p_max, energy);
        } else {
            available = pop_fill(k, p_max, energy, request, u);
            deficit = request > available ? request - available : 0.0;
        }
        if (is_deficit(deficit, request, opt.tolerance) && !traj.failed()) {
            traj.time_to_failure = t;
            if (opt.halt_at_failure) break;
        }

        double dt = k.min_ratio(energy, u);
        bool breakpoint = false;
        if (!(dt < seg_end - t)) {
            dt = seg_end - t;
            breakpoint = true;
        }

        const double delivered = sum(u);
        traj.segments.push_back({t, breakpoint ? seg_end : t + dt, request, delivered, deficit, available});
        if (opt.record_states) {
            traj.allocations.push_back({u, delivered, deficit});
        }
        traj.delivered_energy += delivered * dt;

        if (!breakpoint) {
            // Devices whose depletion time matches the event empty exactly.
            for (std::size_t i = 0; i < energy.size(); ++i) {
                if (u[i] > 0.0 && energy[i] / u[i] <= dt * (1.0 + 1e-12)) energy[i] = 0.0;
            }
        }
        k.drain(energy, u, dt);
        zero_small();

        if (breakpoint) {
            t = seg_end;
            ++seg;
        } else {
            t += dt;
        }
        traj.event_times.push_back(t);
        if (opt.record_states) traj.states.push_back(snapshot(fleet.devices(), energy, opt.tolerance));
    }
    traj.final_energy = std::move(energy);
    return traj;
}

}  // namespace

Trajectory simulate(const FleetState& fleet, const StepSignal& signal, Policy policy,
                    const SimulationOptions& options) {
    if (policy == Policy::Optimal) return simulate_optimal(fleet, signal, options);
    return simulate_device_level(fleet, signal, policy, options);
}

}  // namespace flexcap
