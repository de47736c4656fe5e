#include "flexcap/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace flexcap::io {

namespace {

[[noreturn]] void parse_error(std::string_view source, std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ParseError, fmt::format("{}:{}: {}", source, line, what));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

double parse_number(std::string_view field, std::string_view source, std::size_t line) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty() || !std::isfinite(v)) {
        parse_error(source, line, fmt::format("'{}' is not a number", field));
    }
    return v;
}

// Yields (line number, fields) for every non-blank, non-comment line.
class LineReader {
public:
    LineReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

    bool next(std::vector<std::string_view>& fields) {
        while (std::getline(in_, buf_)) {
            ++line_;
            std::string_view s = trim(buf_);
            if (line_ == 1 && s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);
            if (s.empty() || s.front() == '#') continue;
            fields = split(s);
            return true;
        }
        return false;
    }

    std::size_t line() const { return line_; }
    std::string_view source() const { return source_; }

private:
    std::istream& in_;
    std::string_view source_;
    std::string buf_;
    std::size_t line_ = 0;
};

Unit lookup(std::string_view name, std::initializer_list<std::pair<const char*, double>> table, const char* kind) {
    for (const auto& [n, f] : table) {
        if (name == n) return {n, f};
    }
    throw Error(ErrorCode::ParseError, fmt::format("unknown {} unit '{}'", kind, name));
}

Unit unit_or_error(Unit (*fn)(std::string_view), std::string_view name, const LineReader& r) {
    try {
        return fn(name);
    } catch (const Error& e) {
        parse_error(r.source(), r.line(), e.what());
    }
}

std::ifstream open(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, fmt::format("{}: cannot open file", path));
    return in;
}

}  // namespace

Unit power_unit(std::string_view name) { return lookup(name, {{"W", 1.0}, {"kW", 1e3}, {"MW", 1e6}}, "power"); }

Unit energy_unit(std::string_view name) {
    return lookup(name, {{"J", 1.0}, {"Wh", 3600.0}, {"kWh", 3.6e6}, {"MWh", 3.6e9}}, "energy");
}

Unit time_unit(std::string_view name) { return lookup(name, {{"s", 1.0}, {"min", 60.0}, {"h", 3600.0}}, "time"); }

std::string format_number(double x) {
    if (x == 0.0) return "0";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return fmt::format("{}", x);
}

FleetFile read_fleet(std::istream& in, std::string_view source, double tolerance) {
    LineReader r(in, source);
    std::vector<std::string_view> f;
    FleetFile out;

    if (!r.next(f)) throw Error(ErrorCode::EmptyFleet, fmt::format("{}: empty fleet file", source));
    if (f.size() != 3 || f[0] != "units") parse_error(source, r.line(), "expected 'units,<power>,<energy>'");
    out.power = unit_or_error(power_unit, f[1], r);
    out.energy = unit_or_error(energy_unit, f[2], r);

    if (!r.next(f)) throw Error(ErrorCode::EmptyFleet, fmt::format("{}: fleet file has no devices", source));
    if (f.size() != 3 || f[0] != "id" || f[1] != "p_max" || f[2] != "energy") {
        parse_error(source, r.line(), "expected header 'id,p_max,energy'");
    }

    std::vector<Device> devices;
    while (r.next(f)) {
        if (f.size() != 3) parse_error(source, r.line(), fmt::format("expected 3 fields, found {}", f.size()));
        if (f[0].empty()) parse_error(source, r.line(), "device id is empty");
        const double p = parse_number(f[1], source, r.line()) * out.power.factor;
        const double e = parse_number(f[2], source, r.line()) * out.energy.factor;
        if (!(p > 0.0)) parse_error(source, r.line(), "p_max must be positive");
        if (e < 0.0) parse_error(source, r.line(), "energy must be nonnegative");
        devices.push_back({std::string(f[0]), p, e});
    }
    if (devices.empty()) throw Error(ErrorCode::EmptyFleet, fmt::format("{}: fleet file has no devices", source));
    out.fleet = make_fleet(std::move(devices), tolerance);
    return out;
}

FleetFile read_fleet_file(const std::string& path, double tolerance) {
    auto in = open(path);
    return read_fleet(in, path, tolerance);
}

void write_fleet(std::ostream& out, const FleetState& fleet, const Unit& power, const Unit& energy) {
    out << "units," << power.name << ',' << energy.name << '\n';
    out << "id,p_max,energy\n";
    for (const auto& d : fleet.devices()) {
        out << d.id << ',' << format_number(d.p_max / power.factor) << ','
            << format_number(d.energy / energy.factor) << '\n';
    }
}

SignalFile read_signal(std::istream& in, std::string_view source) {
    LineReader r(in, source);
    std::vector<std::string_view> f;
    SignalFile out;

    if (!r.next(f)) parse_error(source, r.line(), "empty signal file");
    if (f.size() != 3 || f[0] != "units") parse_error(source, r.line(), "expected 'units,<power>,<time>'");
    out.power = unit_or_error(power_unit, f[1], r);
    out.time = unit_or_error(time_unit, f[2], r);

    if (!r.next(f)) parse_error(source, r.line(), "missing header 't_start,value'");
    if (f.size() != 2 || f[0] != "t_start" || f[1] != "value") {
        parse_error(source, r.line(), "expected header 't_start,value'");
    }

    std::vector<double> starts;
    std::vector<double> values;
    std::optional<double> horizon;
    while (r.next(f)) {
        if (horizon) parse_error(source, r.line(), "rows after the horizon row");
        if (f.size() != 2) parse_error(source, r.line(), fmt::format("expected 2 fields, found {}", f.size()));
        const double t = parse_number(f[0], source, r.line()) * out.time.factor;
        if (starts.empty() && t != 0.0) parse_error(source, r.line(), "first row must start at t = 0");
        if (!starts.empty() && !(t > starts.back())) parse_error(source, r.line(), "t_start must be strictly increasing");
        if (f[1].empty()) {
            horizon = t;
            continue;
        }
        const double v = parse_number(f[1], source, r.line()) * out.power.factor;
        if (v < 0.0) parse_error(source, r.line(), "power values must be nonnegative");
        starts.push_back(t);
        values.push_back(v);
    }
    if (!horizon) parse_error(source, r.line(), "missing final horizon row '<t>,'");
    if (starts.empty()) {
        if (*horizon != 0.0) parse_error(source, r.line(), "horizon row needs at least one segment before it");
        return out;
    }
    out.signal = StepSignal(std::move(starts), std::move(values), *horizon);
    return out;
}

SignalFile read_signal_file(const std::string& path) {
    auto in = open(path);
    return read_signal(in, path);
}

void write_signal(std::ostream& out, const StepSignal& signal, const Unit& power, const Unit& time) {
    out << "units," << power.name << ',' << time.name << '\n';
    out << "t_start,value\n";
    for (std::size_t k = 0; k < signal.size(); ++k) {
        out << format_number(signal.start(k) / time.factor) << ',' << format_number(signal.value(k) / power.factor)
            << '\n';
    }
    out << format_number(signal.horizon() / time.factor) << ",\n";
}

void write_curve(std::ostream& out, const EPCurve& curve, const Unit& power, const Unit& energy) {
    out << "p,E\n";
    for (const auto& c : curve.breakpoints()) {
        out << format_number(c.power / power.factor) << ',' << format_number(c.energy / energy.factor) << '\n';
    }
}

void write_trajectory(std::ostream& out, const Trajectory& traj, const Unit& power, const Unit& time) {
    out << "t,available_power,delivered,deficit\n";
    for (const auto& s : traj.segments) {
        out << format_number(s.start / time.factor) << ',' << format_number(s.available / power.factor) << ','
            << format_number(s.delivered / power.factor) << ',' << format_number(s.deficit / power.factor) << '\n';
    }
    if (!traj.segments.empty()) {
        out << format_number(traj.segments.back().end / time.factor) << ",,,\n";
    }
}

ScenarioConfig read_scenario(std::istream& in, std::string_view source) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, fmt::format("{}: {}", source, e.what()));
    }
    ScenarioConfig c;
    try {
        if (!j.is_object()) throw Error(ErrorCode::ParseError, fmt::format("{}: expected a JSON object", source));
        if (j.contains("device_count")) c.device_count = j.at("device_count").get<std::size_t>();
        if (j.contains("ttg_hours")) {
            c.ttg_hours = {j.at("ttg_hours").at(0).get<double>(), j.at("ttg_hours").at(1).get<double>()};
        }
        if (j.contains("power_kw")) {
            c.power_kw = {j.at("power_kw").at(0).get<double>(), j.at("power_kw").at(1).get<double>()};
        }
        if (j.contains("request_mean_mw")) c.request_mean_mw = j.at("request_mean_mw").get<double>();
        if (j.contains("request_sd_mw")) c.request_sd_mw = j.at("request_sd_mw").get<double>();
        if (j.contains("request_interval_hours")) c.request_interval_hours = j.at("request_interval_hours").get<double>();
        if (j.contains("horizon_hours")) c.horizon_hours = j.at("horizon_hours").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, fmt::format("{}: {}", source, e.what()));
    }
    validate(c);
    return c;
}

ScenarioConfig read_scenario_file(const std::string& path) {
    auto in = open(path);
    return read_scenario(in, path);
}

void write_svg(std::ostream& out, std::span<const EPCurve> curves, std::span<const std::string> labels,
               const Unit& power, const Unit& energy) {
    constexpr double W = 640.0, H = 400.0, M = 50.0;
    double pmax = 0.0;
    double emax = 0.0;
    for (const auto& c : curves) {
        pmax = std::max(pmax, c.power_intercept());
        emax = std::max(emax, c.energy_intercept());
    }
    if (!(pmax > 0.0)) pmax = 1.0;
    if (!(emax > 0.0)) emax = 1.0;
    auto x = [&](double p) { return M + (W - 2 * M) * p / pmax; };
    auto y = [&](double e) { return H - M - (H - 2 * M) * e / emax; };
    static constexpr const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n", W, H);
    out << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", M, H - M, W - M, H - M);
    out << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", M, M, M, H - M);
    out << fmt::format("<text x=\"{}\" y=\"{}\">p [{}] (max {})</text>\n", W / 2, H - 10, power.name,
                       format_number(pmax / power.factor));
    out << fmt::format("<text x=\"5\" y=\"{}\">E [{}] (max {})</text>\n", M - 20, energy.name,
                       format_number(emax / energy.factor));
    for (std::size_t i = 0; i < curves.size(); ++i) {
        std::string pts;
        for (const auto& c : curves[i].breakpoints()) pts += fmt::format("{:.2f},{:.2f} ", x(c.power), y(c.energy));
        const char* colour = colours[i % 5];
        if (i == 0) {
            out << fmt::format("<polygon points=\"{}{:.2f},{:.2f}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                               pts, x(0.0), y(0.0), colour);
        }
        out << fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, colour);
        if (i < labels.size()) {
            out << fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", W - M - 120, M + 15 * i, colour,
                               labels[i]);
        }
    }
    out << "</svg>\n";
}

}  // namespace flexcap::io
