#include "flexcap/epcurve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "flexcap/kernels.hpp"

namespace flexcap {

EPCurve::EPCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
    if (points_.empty()) {
        throw Error(ErrorCode::InvalidSignal, "curve needs at least one breakpoint");
    }
    if (points_.front().power != 0.0) {
        throw Error(ErrorCode::InvalidSignal, "curve must start at p = 0");
    }
    if (points_.back().energy != 0.0) {
        throw Error(ErrorCode::InvalidSignal, "curve must end on the p-axis");
    }
    for (std::size_t k = 0; k < points_.size(); ++k) {
        if (!(points_[k].energy >= 0.0) || !std::isfinite(points_[k].energy)) {
            throw Error(ErrorCode::InvalidSignal, "curve energies must be finite and nonnegative");
        }
        if (k > 0 && !(points_[k].power > points_[k - 1].power)) {
            throw Error(ErrorCode::InvalidSignal, "curve powers must be strictly increasing");
        }
    }
}

double EPCurve::operator()(double p) const noexcept {
    if (p <= 0.0) return points_.front().energy;
    if (p >= points_.back().power) return 0.0;
    auto it = std::upper_bound(points_.begin(), points_.end(), p,
                               [](double v, const CurvePoint& c) { return v < c.power; });
    const CurvePoint& b = *it;
    const CurvePoint& a = *(it - 1);
    if (p == a.power) return a.energy;
    const double w = (p - a.power) / (b.power - a.power);
    return a.energy + (b.energy - a.energy) * w;
}

double EPCurve::area() const noexcept {
    double s = 0.0;
    for (std::size_t k = 1; k < points_.size(); ++k) {
        s += 0.5 * (points_[k - 1].energy + points_[k].energy) * (points_[k].power - points_[k - 1].power);
    }
    return s;
}

std::vector<double> EPCurve::slopes() const {
    std::vector<double> out;
    out.reserve(points_.size());
    for (std::size_t k = 1; k < points_.size(); ++k) {
        out.push_back((points_[k].energy - points_[k - 1].energy) / (points_[k].power - points_[k - 1].power));
    }
    return out;
}

bool EPCurve::is_monotone() const noexcept {
    for (std::size_t k = 1; k < points_.size(); ++k) {
        if (points_[k].energy > points_[k - 1].energy) return false;
    }
    return true;
}

bool EPCurve::is_convex() const noexcept {
    const auto s = slopes();
    for (std::size_t k = 1; k < s.size(); ++k) {
        if (s[k] < s[k - 1]) return false;
    }
    return true;
}

EPCurve ep_transform(const StepSignal& signal) {
    std::vector<std::pair<double, double>> levels;  // (value, duration)
    levels.reserve(signal.size());
    for (std::size_t k = 0; k < signal.size(); ++k) {
        if (signal.value(k) > 0.0) levels.emplace_back(signal.value(k), signal.duration(k));
    }
    if (levels.empty()) return EPCurve();
    std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    // Walk down from the peak. `above` is the time spent strictly above the
    // current level, which is minus the slope of the segment to its right.
    std::vector<CurvePoint> desc;
    desc.push_back({levels.front().first, 0.0});
    double above = 0.0;
    std::size_t k = 0;
    while (k < levels.size()) {
        const double v = levels[k].first;
        if (v != desc.back().power) {
            const double e = desc.back().energy + above * (desc.back().power - v);
            desc.push_back({v, e});
        }
        while (k < levels.size() && levels[k].first == v) {
            above += levels[k].second;
            ++k;
        }
    }
    desc.push_back({0.0, desc.back().energy + above * desc.back().power});

    std::reverse(desc.begin(), desc.end());
    return EPCurve(std::move(desc));
}

double energy_above(const StepSignal& signal, double p) {
    std::vector<double> durations(signal.size());
    for (std::size_t k = 0; k < signal.size(); ++k) durations[k] = signal.duration(k);
    return kernels::active().clipped_energy(signal.values(), durations, p);
}

namespace {

// Staircase from (ttg, power) pairs with strictly decreasing ttg > 0.
StepSignal staircase(std::span<const double> ttg, std::span<const double> power) {
    const std::size_t q = ttg.size();
    if (q == 0) return {};
    std::vector<double> level(q);
    double cumulative = 0.0;
    for (std::size_t g = 0; g < q; ++g) {
        cumulative += power[g];
        level[g] = cumulative;
    }
    std::vector<double> starts;
    std::vector<double> values;
    starts.reserve(q);
    values.reserve(q);
    starts.push_back(0.0);
    values.push_back(level[q - 1]);
    for (std::size_t g = q - 1; g-- > 0;) {
        starts.push_back(ttg[g + 1]);
        values.push_back(level[g]);
    }
    return StepSignal(std::move(starts), std::move(values), ttg[0]);
}

void nonempty_groups(const FleetState& fleet, std::vector<double>& ttg, std::vector<double>& power) {
    for (std::size_t g = 0; g < fleet.group_count(); ++g) {
        if (fleet.group_ttg()[g] > 0.0) {
            ttg.push_back(fleet.group_ttg()[g]);
            power.push_back(fleet.group_powers()[g]);
        }
    }
}

double energy_tolerance(double tolerance, double scale) { return tolerance * std::max(1.0, scale); }

}  // namespace

StepSignal worst_case_reference(const FleetState& fleet) {
    std::vector<double> ttg;
    std::vector<double> power;
    nonempty_groups(fleet, ttg, power);
    return staircase(ttg, power);
}

EPCurve capacity_curve(const FleetState& fleet) { return ep_transform(worst_case_reference(fleet)); }

DominanceCheck check_dominance(const EPCurve& upper, const EPCurve& lower, double tolerance) {
    DominanceCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    const double etol = energy_tolerance(tolerance, lower.energy_intercept());

    if (lower.power_intercept() > upper.power_intercept() * (1.0 + tolerance)) {
        out.witness = upper.power_intercept();
        out.margin = upper(upper.power_intercept()) - lower(upper.power_intercept());
    }

    const auto a = upper.breakpoints();
    const auto b = lower.breakpoints();
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() || j < b.size()) {
        double p;
        if (j == b.size() || (i < a.size() && a[i].power < b[j].power)) {
            p = a[i++].power;
        } else if (i == a.size() || b[j].power < a[i].power) {
            p = b[j++].power;
        } else {
            p = a[i].power;
            ++i;
            ++j;
        }
        // Past the lower p-intercept the gap is upper(p) >= 0 and says nothing.
        if (p > lower.power_intercept()) continue;
        const double d = upper(p) - lower(p);
        out.margin = std::min(out.margin, d);
        if (d < -etol && !out.witness) out.witness = p;
    }
    out.dominates = !out.witness.has_value();
    return out;
}

bool dominates(const EPCurve& upper, const EPCurve& lower, double tolerance) {
    return check_dominance(upper, lower, tolerance).dominates;
}

bool is_feasible(const StepSignal& signal, const FleetState& fleet, double tolerance) {
    return dominates(capacity_curve(fleet), ep_transform(signal), tolerance);
}

double ramp_energy_above(double gradient, double duration, double p) noexcept {
    const double peak = gradient * duration;
    if (!(p < peak)) return 0.0;
    const double h = peak - std::max(p, 0.0);
    return h * h / (2.0 * gradient);
}

DominanceCheck check_ramp_dominance(const EPCurve& capacity, double gradient, double duration,
                                    double tolerance) {
    DominanceCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    const double peak = gradient * duration;
    const double etol = energy_tolerance(tolerance, ramp_energy_above(gradient, duration, 0.0));

    if (peak > capacity.power_intercept() * (1.0 + tolerance)) {
        out.witness = capacity.power_intercept();
        out.margin = -ramp_energy_above(gradient, duration, capacity.power_intercept());
    }
    auto probe = [&](double p) {
        const double d = capacity(p) - ramp_energy_above(gradient, duration, p);
        out.margin = std::min(out.margin, d);
        if (d < -etol && !out.witness) out.witness = p;
    };
    for (const auto& c : capacity.breakpoints()) {
        if (c.power < peak) probe(c.power);
    }
    probe(peak);
    out.dominates = !out.witness.has_value();
    return out;
}

EPCurve max_flexibility_line(double energy, double power) {
    if (!(energy >= 0.0) || !(power > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "max-flexibility line needs energy >= 0 and power > 0");
    }
    if (energy == 0.0) return EPCurve();
    return EPCurve({{0.0, energy}, {power, 0.0}});
}

double area_between(const EPCurve& upper, const EPCurve& lower) {
    std::vector<double> ps;
    for (const auto& c : upper.breakpoints()) ps.push_back(c.power);
    for (const auto& c : lower.breakpoints()) ps.push_back(c.power);
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());

    double area = 0.0;
    for (std::size_t k = 1; k < ps.size(); ++k) {
        const double p0 = ps[k - 1];
        const double p1 = ps[k];
        const double d0 = upper(p0) - lower(p0);
        const double d1 = upper(p1) - lower(p1);
        const double w = p1 - p0;
        if (d0 >= 0.0 && d1 >= 0.0) {
            area += 0.5 * (d0 + d1) * w;
        } else if (d0 > 0.0 || d1 > 0.0) {
            // Sign change inside: keep only the positive triangle.
            const double pos = std::max(d0, d1);
            const double neg = -std::min(d0, d1);
            area += 0.5 * pos * w * pos / (pos + neg);
        }
    }
    return area;
}

double flexibility_gap(const FleetState& fleet) {
    const EPCurve cap = capacity_curve(fleet);
    if (!(cap.power_intercept() > 0.0)) return 0.0;
    return area_between(max_flexibility_line(cap.energy_intercept(), cap.power_intercept()), cap);
}

EPCurve clustered_capacity_lower_bound(const FleetState& fleet, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::InvalidClusterCount, "cluster count must be at least 1");
    std::vector<double> ttg;
    std::vector<double> power;
    nonempty_groups(fleet, ttg, power);
    const std::size_t q = ttg.size();
    if (q == 0) return EPCurve();
    const std::size_t bands = std::min(k, q);

    std::vector<double> band_ttg;
    std::vector<double> band_power;
    for (std::size_t b = 0; b < bands; ++b) {
        const std::size_t lo = b * q / bands;
        const std::size_t hi = (b + 1) * q / bands;
        double p = 0.0;
        for (std::size_t g = lo; g < hi; ++g) p += power[g];
        band_ttg.push_back(ttg[hi - 1]);
        band_power.push_back(p);
    }
    return ep_transform(staircase(band_ttg, band_power));
}

}  // namespace flexcap
