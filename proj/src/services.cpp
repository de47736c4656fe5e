#include "flexcap/services.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

namespace flexcap {

double max_pulse(const FleetState& fleet, double duration) {
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw Error(ErrorCode::InvalidDuration, "pulse duration must be positive");
    }
    const EPCurve cap = capacity_curve(fleet);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cap.breakpoints()) {
        best = std::min(best, c.power + c.energy / duration);
    }
    return best;
}

double max_ramp(const FleetState& fleet, double gradient, double tolerance) {
    if (!(gradient > 0.0) || !std::isfinite(gradient)) {
        throw Error(ErrorCode::InvalidGradient, "ramp gradient must be positive");
    }
    const EPCurve cap = capacity_curve(fleet);
    double hi = cap.power_intercept() / gradient;
    if (!(hi > 0.0)) return 0.0;
    if (check_ramp_dominance(cap, gradient, hi, tolerance).dominates) return hi;

    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (check_ramp_dominance(cap, gradient, mid, tolerance).dominates) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

double time_to_failure(const FleetState& fleet, const StepSignal& signal, Policy policy, double tolerance) {
    SimulationOptions opt;
    opt.record_states = false;
    opt.halt_at_failure = true;
    opt.tolerance = tolerance;
    return simulate(fleet, signal, policy, opt).time_to_failure;
}

double max_feasible_truncation(const StepSignal& signal, const FleetState& fleet, double tolerance) {
    const EPCurve cap = capacity_curve(fleet);
    auto feasible_until = [&](double t) { return dominates(cap, ep_transform(truncate(signal, 0.0, t)), tolerance); };
    if (dominates(cap, ep_transform(signal), tolerance)) return signal.horizon();

    // First segment whose end makes the prefix infeasible.
    std::size_t lo = 0;
    std::size_t hi = signal.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (feasible_until(signal.end(mid))) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    const std::size_t seg = lo;
    const double t0 = signal.start(seg);
    const double v = signal.value(seg);
    const EPCurve prefix = ep_transform(truncate(signal, 0.0, t0));

    // Extending the prefix by tau at level v adds tau * max(v - p, 0) to its
    // transform, so tau is limited by (cap - prefix)(p) / (v - p) for p < v.
    // That ratio is monotone wherever both curves are linear, hence the
    // minimum sits on a breakpoint.
    auto ratio = [&](double p) { return std::max(cap(p) - prefix(p), 0.0) / (v - p); };
    double tau = ratio(0.0);
    for (const auto& c : cap.breakpoints()) {
        if (c.power < v) tau = std::min(tau, ratio(c.power));
    }
    for (const auto& c : prefix.breakpoints()) {
        if (c.power < v) tau = std::min(tau, ratio(c.power));
    }
    return t0 + std::clamp(tau, 0.0, signal.duration(seg));
}

std::string_view to_string(Relation relation) noexcept {
    switch (relation) {
    case Relation::ADominates: return "DOMINATES";
    case Relation::BDominates: return "DOMINATED";
    case Relation::Equivalent: return "EQUIVALENT";
    case Relation::Incomparable: return "INCOMPARABLE";
    }
    return "UNKNOWN";
}

ComparisonVerdict compare_fleets(const FleetState& a, const FleetState& b, double tolerance) {
    const EPCurve ca = capacity_curve(a);
    const EPCurve cb = capacity_curve(b);
    const DominanceCheck ab = check_dominance(ca, cb, tolerance);
    const DominanceCheck ba = check_dominance(cb, ca, tolerance);
    ComparisonVerdict v;
    if (ab.dominates && ba.dominates) {
        v.relation = Relation::Equivalent;
    } else if (ab.dominates) {
        v.relation = Relation::ADominates;
    } else if (ba.dominates) {
        v.relation = Relation::BDominates;
        v.witness_p = ab.witness;
    } else {
        v.relation = Relation::Incomparable;
        v.witness_p = ab.witness;
    }
    return v;
}

void validate(const ScenarioConfig& c) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    auto finite = [](double x) { return std::isfinite(x); };
    if (c.device_count == 0) fail("device_count must be at least 1");
    if (!finite(c.ttg_hours.low) || !finite(c.ttg_hours.high) || c.ttg_hours.low < 0.0 ||
        c.ttg_hours.high < c.ttg_hours.low) {
        fail("time-to-go range must satisfy 0 <= low <= high");
    }
    if (!finite(c.power_kw.low) || !finite(c.power_kw.high) || c.power_kw.low < 0.0 ||
        c.power_kw.high < c.power_kw.low || !(c.power_kw.high > 0.0)) {
        fail("power range must satisfy 0 <= low <= high, high > 0");
    }
    if (!finite(c.request_mean_mw) || !finite(c.request_sd_mw) || c.request_sd_mw < 0.0) {
        fail("request distribution needs a finite mean and sd >= 0");
    }
    if (!(c.request_interval_hours > 0.0) || !finite(c.request_interval_hours)) {
        fail("request interval must be positive");
    }
    if (!(c.horizon_hours > 0.0) || !finite(c.horizon_hours)) fail("horizon must be positive");
}

namespace {

constexpr double kHour = 3600.0;
constexpr std::uint32_t kFleetStream = 1;
constexpr std::uint32_t kRequestStream = 2;

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t tag, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

FleetState sample_fleet(const ScenarioConfig& config) {
    validate(config);
    auto rng = substream(config.seed, kFleetStream, 0);
    std::uniform_real_distribution<double> ttg(config.ttg_hours.low, config.ttg_hours.high);
    std::uniform_real_distribution<double> power(config.power_kw.low, config.power_kw.high);
    std::vector<Device> devices;
    devices.reserve(config.device_count);
    for (std::size_t i = 0; i < config.device_count; ++i) {
        const double x = ttg(rng) * kHour;
        double p = 0.0;
        while (!(p > 0.0)) p = power(rng) * 1e3;
        devices.push_back({"d" + std::to_string(i), p, x * p});
    }
    return make_fleet(std::move(devices));
}

StepSignal sample_request(const ScenarioConfig& config, std::uint64_t index) {
    validate(config);
    auto rng = substream(config.seed, kRequestStream, index);
    std::normal_distribution<double> z(0.0, 1.0);
    const double interval = config.request_interval_hours * kHour;
    const double horizon = config.horizon_hours * kHour;
    const auto count = static_cast<std::size_t>(std::ceil(horizon / interval - 1e-9));
    std::vector<double> starts;
    std::vector<double> values;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) * interval;
        if (!(t < horizon)) break;
        const double mw = config.request_mean_mw + config.request_sd_mw * z(rng);
        starts.push_back(t);
        values.push_back(std::max(mw, 0.0) * 1e6);
    }
    return StepSignal(std::move(starts), std::move(values), horizon);
}

Scenario generate_scenario(const ScenarioConfig& config) {
    return {sample_fleet(config), sample_request(config, 0)};
}

double wilson_half_width(std::size_t successes, std::size_t trials) {
    if (trials == 0) return 0.0;
    constexpr double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    return z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
}

ProbabilityEstimate feasibility_probability(const FleetState& fleet, const ScenarioConfig& config,
                                            std::size_t samples, unsigned workers, double tolerance) {
    validate(config);
    if (samples == 0) throw Error(ErrorCode::InvalidConfig, "need at least one sample");
    const EPCurve cap = capacity_curve(fleet);

    std::vector<unsigned char> ok(samples, 0);
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ok[i] = dominates(cap, ep_transform(sample_request(config, i)), tolerance) ? 1 : 0;
        }
    };
    const std::size_t nworkers = std::clamp<std::size_t>(workers, 1, samples);
    if (nworkers == 1) {
        run(0, samples);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nworkers);
        for (std::size_t w = 0; w < nworkers; ++w) {
            pool.emplace_back(run, w * samples / nworkers, (w + 1) * samples / nworkers);
        }
        for (auto& th : pool) th.join();
    }

    ProbabilityEstimate est;
    est.samples = samples;
    for (unsigned char b : ok) est.feasible += b;
    est.probability = static_cast<double>(est.feasible) / static_cast<double>(samples);
    est.half_width = wilson_half_width(est.feasible, samples);
    return est;
}

}  // namespace flexcap
