#pragma once

// Data-parallel inner loops used by the dispatch policies and the direct
// E-p evaluation. Each kernel has a portable scalar reference and, on x86-64,
// an AVX2 variant chosen at runtime. Elementwise kernels give bit-identical
// results across variants; the reductions (masked_power_sum,
// clipped_energy) may differ in the last bits because of summation order.

#include <span>
#include <string_view>

namespace flexcap::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;
    /// sum of p_max[i] over i with energy[i] > 0
    double (*masked_power_sum)(std::span<const double> p_max, std::span<const double> energy);
    /// out[i] = energy[i] > 0 ? min(p_max[i], p_max[i] * fraction) : 0
    void (*scale_clamped)(std::span<const double> p_max, std::span<const double> energy,
                          double fraction, std::span<double> out);
    /// min of num[i] / den[i] over i with den[i] > 0; +inf when there is none
    double (*min_ratio)(std::span<const double> num, std::span<const double> den);
    /// energy[i] = max(energy[i] - rate[i] * dt, 0)
    void (*drain)(std::span<double> energy, std::span<const double> rate, double dt);
    /// sum of durations[k] * max(values[k] - p, 0)
    double (*clipped_energy)(std::span<const double> values, std::span<const double> durations,
                             double p);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the binary or the CPU lacks AVX2.
const KernelTable* avx2_table() noexcept;

/// The table used by the library. Picks AVX2 when the CPU supports it,
/// unless FLEXCAP_SIMD=scalar is set in the environment.
const KernelTable& active() noexcept;

std::string_view isa_name(Isa isa) noexcept;

}  // namespace flexcap::kernels
