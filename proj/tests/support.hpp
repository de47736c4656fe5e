#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "flexcap/core.hpp"

namespace flexcap::testing {

inline constexpr double kW = 1e3;
inline constexpr double kWh = 3.6e6;
inline constexpr double hour = 3600.0;

inline FleetState config_a() { return make_fleet({{"a1", 4 * kW, 108 * kWh}, {"a2", 18 * kW, 36 * kWh}}); }
inline FleetState config_b() { return make_fleet({{"b1", 13 * kW, 104 * kWh}}); }
inline FleetState config_c() { return make_fleet({{"c1", 8 * kW, 90 * kWh}, {"c2", 14 * kW, 54 * kWh}}); }

inline bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
    return std::fabs(a - b) <= rel * std::max({std::fabs(a), std::fabs(b), abs_floor});
}

inline std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Continuous-valued fleet: 1..n devices, 0.5..20 kW, 0..12 h, occasionally empty.
inline FleetState random_fleet(std::mt19937_64& rng, std::size_t max_devices = 12) {
    std::uniform_int_distribution<std::size_t> count(1, max_devices);
    std::uniform_real_distribution<double> power(0.5 * kW, 20 * kW);
    std::uniform_real_distribution<double> ttg(0.0, 12 * hour);
    std::bernoulli_distribution empty(0.05);
    std::vector<Device> devices;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = power(rng);
        const double x = empty(rng) ? 0.0 : ttg(rng);
        devices.push_back({"d" + std::to_string(i), p, x * p});
    }
    return make_fleet(std::move(devices));
}

/// 1..n segments of 1 min..4 h with values 0..max_value, some repeated.
inline StepSignal random_signal(std::mt19937_64& rng, double max_value, std::size_t max_segments = 10) {
    std::uniform_int_distribution<std::size_t> count(1, max_segments);
    std::uniform_real_distribution<double> dur(60.0, 4 * hour);
    std::uniform_real_distribution<double> val(0.0, max_value);
    std::bernoulli_distribution repeat(0.2);
    std::vector<double> values;
    std::vector<double> durations;
    const std::size_t n = count(rng);
    for (std::size_t k = 0; k < n; ++k) {
        values.push_back(!values.empty() && repeat(rng) ? values.front() : val(rng));
        durations.push_back(dur(rng));
    }
    return StepSignal::from_durations(values, durations);
}

}  // namespace flexcap::testing
