#pragma once

// E-p transform and capacity curves.
//
// The E-p transform of a power signal maps a power level p to the energy the
// signal delivers above p. For step signals it is convex, nonincreasing and
// piecewise linear, so curves are stored as exact breakpoints and every
// comparison below is closed-form on those breakpoints.

#include <optional>
#include <span>
#include <vector>

#include "flexcap/core.hpp"

namespace flexcap {

struct CurvePoint {
    double power = 0.0;   // W
    double energy = 0.0;  // J

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Convex, nonincreasing piecewise-linear function of power. The first
/// breakpoint sits at p = 0, the last one has E = 0 at the p-intercept, and
/// E is identically zero beyond it.
class EPCurve {
public:
    /// The zero curve: a single breakpoint (0, 0).
    EPCurve() : points_{{0.0, 0.0}} {}

    /// Validates ordering and end conditions (not convexity; see is_convex).
    explicit EPCurve(std::vector<CurvePoint> points);

    std::span<const CurvePoint> breakpoints() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }

    double energy_intercept() const noexcept { return points_.front().energy; }
    double power_intercept() const noexcept { return points_.back().power; }

    /// Linear interpolation between breakpoints; E(0) for p < 0 is not extended.
    double operator()(double p) const noexcept;

    /// Integral of the curve over [0, p_intercept].
    double area() const noexcept;

    /// Slopes between consecutive breakpoints.
    std::vector<double> slopes() const;

    /// Values nonincreasing in p, with no tolerance.
    bool is_monotone() const noexcept;
    /// Slopes nondecreasing in p, with no tolerance.
    bool is_convex() const noexcept;

    friend bool operator==(const EPCurve&, const EPCurve&) = default;

private:
    std::vector<CurvePoint> points_;
};

/// Exact transform: one breakpoint per distinct positive signal value, plus p = 0.
EPCurve ep_transform(const StepSignal& signal);

/// Direct evaluation of the transform at one power level by integrating
/// max(P(t) - p, 0) over the segments.
double energy_above(const StepSignal& signal, double p);

/// Runs every device at full power until it is empty: a staircase that drops
/// by each group's power at that group's time-to-go.
StepSignal worst_case_reference(const FleetState& fleet);

/// E-p transform of the worst-case reference. E-intercept is the total
/// energy; p-intercept is the power of the nonempty devices.
EPCurve capacity_curve(const FleetState& fleet);

struct DominanceCheck {
    bool dominates = false;
    /// Power level where the check fails: the upper curve's p-intercept when
    /// the lower curve reaches further, else the first violated breakpoint.
    std::optional<double> witness;
    /// Minimum of upper(p) - lower(p) over breakpoints up to the lower
    /// p-intercept (J). The zero lower curve gives upper(0).
    double margin = 0.0;
};

/// Decides upper(p) >= lower(p) for all p >= 0. Energy comparisons allow
/// tolerance * max(1 J, lower(0)); the p-intercept of lower may exceed that
/// of upper by at most a factor (1 + tolerance).
DominanceCheck check_dominance(const EPCurve& upper, const EPCurve& lower,
                               double tolerance = kDefaultTolerance);

bool dominates(const EPCurve& upper, const EPCurve& lower, double tolerance = kDefaultTolerance);

/// Feasibility of a request signal for the fleet: the capacity curve must
/// dominate the signal's transform.
bool is_feasible(const StepSignal& signal, const FleetState& fleet, double tolerance = kDefaultTolerance);

/// Transform of the ramp P(t) = gradient * t on [0, duration):
/// E(p) = (g T - p)^2 / (2 g) for p <= g T.
double ramp_energy_above(double gradient, double duration, double p) noexcept;

/// Dominance of a convex ramp transform by a piecewise-linear capacity. On
/// each capacity segment capacity - ramp is concave, so checking the
/// capacity breakpoints and the ramp's p-intercept is exact.
DominanceCheck check_ramp_dominance(const EPCurve& capacity, double gradient, double duration,
                                    double tolerance = kDefaultTolerance);

/// Capacity of a single device with the given totals: the chord from
/// (0, energy) to (power, 0).
EPCurve max_flexibility_line(double energy, double power);

/// Integral of max(upper - lower, 0) over p, by trapezoids on merged breakpoints.
double area_between(const EPCurve& upper, const EPCurve& lower);

/// Area between the fleet's maximum-flexibility line and its capacity (J*W).
double flexibility_gap(const FleetState& fleet);

/// Under-approximation of the capacity: nonempty groups are split into k
/// contiguous time-to-go bands of (nearly) equal group count and each band
/// keeps its smallest time-to-go. k is clamped to the number of nonempty
/// groups. Throws InvalidClusterCount for k < 1.
EPCurve clustered_capacity_lower_bound(const FleetState& fleet, std::size_t k);

}  // namespace flexcap
