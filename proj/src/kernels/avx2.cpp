#include "flexcap/kernels.hpp"

#if defined(FLEXCAP_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <limits>

namespace flexcap::kernels {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline double hmin(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_min_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_min_sd(lo, shuf));
}

double masked_power_sum(std::span<const double> p_max, std::span<const double> energy) {
    const std::size_t n = p_max.size();
    const __m256d zero = _mm256_setzero_pd();
    __m256d acc = zero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d e = _mm256_loadu_pd(energy.data() + i);
        __m256d p = _mm256_loadu_pd(p_max.data() + i);
        __m256d mask = _mm256_cmp_pd(e, zero, _CMP_GT_OQ);
        acc = _mm256_add_pd(acc, _mm256_and_pd(mask, p));
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        if (energy[i] > 0.0) sum += p_max[i];
    }
    return sum;
}

void scale_clamped(std::span<const double> p_max, std::span<const double> energy, double fraction,
                   std::span<double> out) {
    const std::size_t n = p_max.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d f = _mm256_set1_pd(fraction);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d e = _mm256_loadu_pd(energy.data() + i);
        __m256d p = _mm256_loadu_pd(p_max.data() + i);
        __m256d mask = _mm256_cmp_pd(e, zero, _CMP_GT_OQ);
        // min(p, p*f) with std::min semantics: picks p*f only when strictly smaller
        __m256d scaled = _mm256_mul_pd(p, f);
        __m256d lt = _mm256_cmp_pd(scaled, p, _CMP_LT_OQ);
        __m256d r = _mm256_blendv_pd(p, scaled, lt);
        _mm256_storeu_pd(out.data() + i, _mm256_and_pd(mask, r));
    }
    for (; i < n; ++i) {
        out[i] = energy[i] > 0.0 ? std::min(p_max[i], p_max[i] * fraction) : 0.0;
    }
}

double min_ratio(std::span<const double> num, std::span<const double> den) {
    const std::size_t n = num.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best = inf;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_loadu_pd(num.data() + i);
        __m256d b = _mm256_loadu_pd(den.data() + i);
        __m256d mask = _mm256_cmp_pd(b, zero, _CMP_GT_OQ);
        __m256d q = _mm256_div_pd(a, b);
        q = _mm256_blendv_pd(inf, q, mask);
        best = _mm256_min_pd(best, q);
    }
    double out = hmin(best);
    for (; i < n; ++i) {
        if (den[i] > 0.0) out = std::min(out, num[i] / den[i]);
    }
    return out;
}

void drain(std::span<double> energy, std::span<const double> rate, double dt) {
    const std::size_t n = energy.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d step = _mm256_set1_pd(dt);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d e = _mm256_loadu_pd(energy.data() + i);
        __m256d r = _mm256_loadu_pd(rate.data() + i);
        __m256d next = _mm256_sub_pd(e, _mm256_mul_pd(r, step));
        // max(next, 0) with std::max semantics
        __m256d lt = _mm256_cmp_pd(next, zero, _CMP_LT_OQ);
        _mm256_storeu_pd(energy.data() + i, _mm256_blendv_pd(next, zero, lt));
    }
    for (; i < n; ++i) {
        energy[i] = std::max(energy[i] - rate[i] * dt, 0.0);
    }
}

double clipped_energy(std::span<const double> values, std::span<const double> durations, double p) {
    const std::size_t n = values.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d level = _mm256_set1_pd(p);
    __m256d acc = zero;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        __m256d v = _mm256_loadu_pd(values.data() + k);
        __m256d d = _mm256_loadu_pd(durations.data() + k);
        __m256d above = _mm256_max_pd(_mm256_sub_pd(v, level), zero);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, above));
    }
    double sum = hsum(acc);
    for (; k < n; ++k) {
        sum += durations[k] * std::max(values[k] - p, 0.0);
    }
    return sum;
}

const KernelTable kAvx2{Isa::Avx2, masked_power_sum, scale_clamped, min_ratio, drain, clipped_energy};

}  // namespace

const KernelTable* avx2_table() noexcept {
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &kAvx2 : nullptr;
}

}  // namespace flexcap::kernels

#else

namespace flexcap::kernels {

const KernelTable* avx2_table() noexcept { return nullptr; }

}  // namespace flexcap::kernels

#endif
