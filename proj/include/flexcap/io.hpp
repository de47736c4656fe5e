#pragma once

// Text file formats. All files are UTF-8, comma separated, '#' starts a
// comment line, and the first non-comment line declares the units.
//
// Fleet file:            Signal file:
//   units,kW,kWh            units,kW,h
//   id,p_max,energy         t_start,value
//   a,4,108                 0,10
//   b,18,36                 2,4
//                           3,          <- horizon row, empty value

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "flexcap/core.hpp"
#include "flexcap/dispatch.hpp"
#include "flexcap/epcurve.hpp"
#include "flexcap/services.hpp"

namespace flexcap::io {

/// Named unit with its SI factor.
struct Unit {
    std::string name;
    double factor = 1.0;
};

Unit power_unit(std::string_view name);   // W, kW, MW
Unit energy_unit(std::string_view name);  // J, Wh, kWh, MWh
Unit time_unit(std::string_view name);    // s, min, h

struct FleetFile {
    Unit power{"W", 1.0};
    Unit energy{"J", 1.0};
    FleetState fleet;
};

struct SignalFile {
    Unit power{"W", 1.0};
    Unit time{"s", 1.0};
    StepSignal signal;
};

/// Throws Error(ParseError) with "<source>:<line>: ..." messages, and
/// EmptyFleet / InvalidDevice / InvalidSignal for well-formed but invalid content.
FleetFile read_fleet(std::istream& in, std::string_view source = "<fleet>",
                     double tolerance = kDefaultTolerance);
FleetFile read_fleet_file(const std::string& path, double tolerance = kDefaultTolerance);
void write_fleet(std::ostream& out, const FleetState& fleet, const Unit& power, const Unit& energy);

SignalFile read_signal(std::istream& in, std::string_view source = "<signal>");
SignalFile read_signal_file(const std::string& path);
void write_signal(std::ostream& out, const StepSignal& signal, const Unit& power, const Unit& time);

/// Columns p,E in the given units.
void write_curve(std::ostream& out, const EPCurve& curve, const Unit& power, const Unit& energy);

/// Columns t,available_power,delivered,deficit: one row per segment start
/// plus a closing row at the last event.
void write_trajectory(std::ostream& out, const Trajectory& traj, const Unit& power, const Unit& time);

/// JSON object with keys device_count, ttg_hours [lo, hi], power_kw [lo, hi],
/// request_mean_mw, request_sd_mw, request_interval_hours, horizon_hours,
/// seed. Missing keys keep their defaults.
ScenarioConfig read_scenario(std::istream& in, std::string_view source = "<scenario>");
ScenarioConfig read_scenario_file(const std::string& path);

/// Shortest decimal that round-trips, '.' separator regardless of locale.
std::string format_number(double x);

/// Static SVG plot of one or more curves (first one filled as the feasible region).
void write_svg(std::ostream& out, std::span<const EPCurve> curves, std::span<const std::string> labels,
               const Unit& power, const Unit& energy);

}  // namespace flexcap::io
