#include "flexcap/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <cstring>
#include <limits>

namespace flexcap::kernels {

namespace {

double masked_power_sum(std::span<const double> p_max, std::span<const double> energy) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p_max.size(); ++i) {
        if (energy[i] > 0.0) sum += p_max[i];
    }
    return sum;
}

void scale_clamped(std::span<const double> p_max, std::span<const double> energy, double fraction,
                   std::span<double> out) {
    for (std::size_t i = 0; i < p_max.size(); ++i) {
        out[i] = energy[i] > 0.0 ? std::min(p_max[i], p_max[i] * fraction) : 0.0;
    }
}

double min_ratio(std::span<const double> num, std::span<const double> den) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < num.size(); ++i) {
        if (den[i] > 0.0) best = std::min(best, num[i] / den[i]);
    }
    return best;
}

void drain(std::span<double> energy, std::span<const double> rate, double dt) {
    for (std::size_t i = 0; i < energy.size(); ++i) {
        energy[i] = std::max(energy[i] - rate[i] * dt, 0.0);
    }
}

double clipped_energy(std::span<const double> values, std::span<const double> durations, double p) {
    double sum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        sum += durations[k] * std::max(values[k] - p, 0.0);
    }
    return sum;
}

const KernelTable kScalar{Isa::Scalar, masked_power_sum, scale_clamped, min_ratio, drain, clipped_energy};

const KernelTable& select() noexcept {
    if (const char* env = std::getenv("FLEXCAP_SIMD"); env && std::strcmp(env, "scalar") == 0) {
        return kScalar;
    }
    if (const KernelTable* t = avx2_table()) return *t;
    return kScalar;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable& active() noexcept {
    static const KernelTable& table = select();
    return table;
}

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

}  // namespace flexcap::kernels
