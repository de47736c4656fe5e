#include "flexcap/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "flexcap/io.hpp"

namespace flexcap::cli {

namespace {

struct Context {
    std::ostream& out;
    std::ostream& err;
    double tol;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::ParseError, fmt::format("{}: cannot write file", path));
    return f;
}

std::string with_unit(double si, const io::Unit& u) { return io::format_number(si / u.factor) + " " + u.name; }

void write_svg_file(const std::string& path, std::vector<EPCurve> curves, std::vector<std::string> labels,
                    const io::Unit& power, const io::Unit& energy) {
    auto f = open_out(path);
    io::write_svg(f, curves, labels, power, energy);
}

int cmd_capacity(const Context& c, const std::string& fleet_path, std::optional<std::size_t> clusters,
                 const std::string& out_path, const std::string& svg_path) {
    const auto ff = io::read_fleet_file(fleet_path, c.tol);
    const EPCurve cap = clusters ? clustered_capacity_lower_bound(ff.fleet, *clusters) : capacity_curve(ff.fleet);
    if (out_path.empty()) {
        io::write_curve(c.out, cap, ff.power, ff.energy);
    } else {
        auto f = open_out(out_path);
        io::write_curve(f, cap, ff.power, ff.energy);
    }
    const io::Unit area{ff.energy.name + "*" + ff.power.name, ff.energy.factor * ff.power.factor};
    c.out << "E_intercept=" << with_unit(cap.energy_intercept(), ff.energy) << '\n';
    c.out << "p_intercept=" << with_unit(cap.power_intercept(), ff.power) << '\n';
    c.out << "flexibility_gap=" << with_unit(flexibility_gap(ff.fleet), area) << '\n';
    if (!svg_path.empty()) write_svg_file(svg_path, {cap}, {"capacity"}, ff.power, ff.energy);
    return kExitOk;
}

int cmd_feasible(const Context& c, const std::string& fleet_path, const std::string& signal_path,
                 const std::string& svg_path) {
    const auto ff = io::read_fleet_file(fleet_path, c.tol);
    const auto sf = io::read_signal_file(signal_path);
    const EPCurve cap = capacity_curve(ff.fleet);
    const EPCurve req = ep_transform(sf.signal);
    const DominanceCheck chk = check_dominance(cap, req, c.tol);
    if (!svg_path.empty()) write_svg_file(svg_path, {cap, req}, {"capacity", "request"}, ff.power, ff.energy);
    if (chk.dominates) {
        c.out << "FEASIBLE margin=" << with_unit(chk.margin, ff.energy) << '\n';
        return kExitOk;
    }
    c.out << "INFEASIBLE witness_p=" << with_unit(chk.witness.value_or(0.0), ff.power) << '\n';
    return kExitInfeasible;
}

int cmd_simulate(const Context& c, const std::string& fleet_path, const std::string& signal_path,
                 const std::string& policy, const std::string& out_path, bool halt) {
    const auto ff = io::read_fleet_file(fleet_path, c.tol);
    const auto sf = io::read_signal_file(signal_path);
    SimulationOptions opt;
    opt.record_states = false;
    opt.halt_at_failure = halt;
    opt.tolerance = c.tol;
    const Trajectory traj = simulate(ff.fleet, sf.signal, parse_policy(policy), opt);
    if (out_path.empty()) {
        io::write_trajectory(c.out, traj, ff.power, sf.time);
    } else {
        auto f = open_out(out_path);
        io::write_trajectory(f, traj, ff.power, sf.time);
    }
    c.out << "delivered_energy=" << with_unit(traj.delivered_energy, ff.energy) << '\n';
    if (traj.failed()) {
        c.out << "TTF=" << io::format_number(traj.time_to_failure / sf.time.factor) << sf.time.name << '\n';
    } else {
        c.out << "TTF=inf\n";
    }
    return kExitOk;
}

int cmd_pulse(const Context& c, const std::string& fleet_path, double duration, const std::string& time_name) {
    const auto ff = io::read_fleet_file(fleet_path, c.tol);
    const io::Unit t = io::time_unit(time_name);
    const double m = max_pulse(ff.fleet, duration * t.factor);
    c.out << "max_pulse=" << with_unit(m, ff.power) << '\n';
    return kExitOk;
}

int cmd_ramp(const Context& c, const std::string& fleet_path, double gradient, const std::string& power_name,
             const std::string& time_name) {
    const auto ff = io::read_fleet_file(fleet_path, c.tol);
    const io::Unit p = io::power_unit(power_name);
    const io::Unit t = io::time_unit(time_name);
    const double g = gradient * p.factor / t.factor;
    const double T = max_ramp(ff.fleet, g, c.tol);
    c.out << "max_ramp_duration=" << with_unit(T, t) << '\n';
    c.out << "peak=" << with_unit(g * T, ff.power) << '\n';
    return kExitOk;
}

int cmd_compare(const Context& c, const std::string& a_path, const std::string& b_path) {
    const auto a = io::read_fleet_file(a_path, c.tol);
    const auto b = io::read_fleet_file(b_path, c.tol);
    const ComparisonVerdict v = compare_fleets(a.fleet, b.fleet, c.tol);
    c.out << to_string(v.relation);
    if (v.witness_p) c.out << " witness_p=" << with_unit(*v.witness_p, a.power);
    c.out << '\n';
    return kExitOk;
}

int cmd_truncate(const Context& c, const std::string& fleet_path, const std::string& signal_path,
                 const std::string& out_path) {
    const auto ff = io::read_fleet_file(fleet_path, c.tol);
    const auto sf = io::read_signal_file(signal_path);
    const double t = max_feasible_truncation(sf.signal, ff.fleet, c.tol);
    c.out << "max_feasible_truncation=" << with_unit(t, sf.time) << '\n';
    if (!out_path.empty()) {
        auto f = open_out(out_path);
        io::write_signal(f, truncate(sf.signal, 0.0, t), sf.power, sf.time);
    }
    return kExitOk;
}

int cmd_montecarlo(const Context& c, const std::string& fleet_path, const std::string& scenario_path,
                   std::size_t samples, std::optional<std::uint64_t> seed, unsigned workers) {
    ScenarioConfig cfg = scenario_path.empty() ? ScenarioConfig{} : io::read_scenario_file(scenario_path);
    if (seed) cfg.seed = *seed;
    const FleetState fleet = fleet_path.empty() ? sample_fleet(cfg) : io::read_fleet_file(fleet_path, c.tol).fleet;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    const ProbabilityEstimate est = feasibility_probability(fleet, cfg, samples, workers, c.tol);
    c.out << fmt::format("seed={}\ndevices={}\nsamples={}\nfeasible={}\n", cfg.seed, fleet.size(), est.samples,
                         est.feasible);
    c.out << "probability=" << io::format_number(est.probability) << '\n';
    c.out << "wilson95_half_width=" << io::format_number(est.half_width) << '\n';
    return kExitOk;
}

}  // namespace

double tolerance_from_env() {
    const char* raw = std::getenv("FLEXCAP_TOLERANCE");
    if (raw == nullptr || *raw == '\0') return kDefaultTolerance;
    const std::string_view s(raw);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidConfig, fmt::format("FLEXCAP_TOLERANCE='{}' is not a positive number", s));
    }
    return v;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Capacity-curve analysis for fleets of energy storage devices", "flexcap"};
    app.require_subcommand(1);

    std::string fleet, fleet_b, signal, out_path, svg, policy = "op", time_name = "h", power_name = "kW", scenario;
    std::size_t clusters = 0;
    std::size_t samples = 1000;
    std::uint64_t seed_value = 0;
    unsigned workers = 1;
    double duration = 0.0;
    double gradient = 0.0;
    bool halt = false;

    auto* capacity = app.add_subcommand("capacity", "Capacity curve of a fleet");
    capacity->add_option("fleet", fleet, "Fleet file")->required();
    auto* clusters_opt = capacity->add_option("--clusters", clusters, "Clustered lower bound with k groups");
    capacity->add_option("--out", out_path, "Write the curve CSV here instead of stdout");
    capacity->add_option("--svg", svg, "Write an SVG plot");

    auto* feasible = app.add_subcommand("feasible", "Check a request signal against a fleet");
    feasible->add_option("fleet", fleet, "Fleet file")->required();
    feasible->add_option("signal", signal, "Signal file")->required();
    feasible->add_option("--svg", svg, "Write an SVG plot of capacity and request");

    auto* sim = app.add_subcommand("simulate", "Event-driven simulation under a dispatch policy");
    sim->add_option("fleet", fleet, "Fleet file")->required();
    sim->add_option("signal", signal, "Signal file")->required();
    sim->add_option("--policy", policy, "op, lpf or pop")->check(CLI::IsMember({"op", "lpf", "pop"}));
    sim->add_option("--out", out_path, "Write the trajectory CSV here instead of stdout");
    sim->add_flag("--halt-at-failure", halt, "Stop delivering at the first deficit");

    auto* pulse = app.add_subcommand("pulse", "Largest feasible pulse of a given duration");
    pulse->add_option("fleet", fleet, "Fleet file")->required();
    pulse->add_option("--duration", duration, "Pulse duration")->required();
    pulse->add_option("--time-unit", time_name, "s, min or h")->check(CLI::IsMember({"s", "min", "h"}));

    auto* ramp = app.add_subcommand("ramp", "Longest feasible ramp of a given gradient");
    ramp->add_option("fleet", fleet, "Fleet file")->required();
    ramp->add_option("--gradient", gradient, "Ramp gradient in power-unit per time-unit")->required();
    ramp->add_option("--power-unit", power_name, "W, kW or MW")->check(CLI::IsMember({"W", "kW", "MW"}));
    ramp->add_option("--time-unit", time_name, "s, min or h")->check(CLI::IsMember({"s", "min", "h"}));

    auto* compare = app.add_subcommand("compare", "Compare the capacity of two fleets");
    compare->add_option("fleet_a", fleet, "First fleet file")->required();
    compare->add_option("fleet_b", fleet_b, "Second fleet file")->required();

    auto* trunc = app.add_subcommand("truncate", "Longest feasible prefix of a signal");
    trunc->add_option("fleet", fleet, "Fleet file")->required();
    trunc->add_option("signal", signal, "Signal file")->required();
    trunc->add_option("--out", out_path, "Write the truncated signal here");

    auto* mc = app.add_subcommand("montecarlo", "Monte Carlo feasibility probability");
    mc->add_option("--fleet", fleet, "Fleet file (default: sampled from the scenario)");
    mc->add_option("--scenario", scenario, "Scenario JSON");
    mc->add_option("--samples", samples, "Number of request samples")->check(CLI::PositiveNumber);
    auto* seed_opt = mc->add_option("--seed", seed_value, "Seed (overrides the scenario)");
    mc->add_option("--workers", workers, "Worker threads, 0 for all cores");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        const Context c{out, err, tolerance_from_env()};
        if (*capacity) {
            std::optional<std::size_t> k;
            if (clusters_opt->count() > 0) k = clusters;
            return cmd_capacity(c, fleet, k, out_path, svg);
        }
        if (*feasible) return cmd_feasible(c, fleet, signal, svg);
        if (*sim) return cmd_simulate(c, fleet, signal, policy, out_path, halt);
        if (*pulse) return cmd_pulse(c, fleet, duration, time_name);
        if (*ramp) return cmd_ramp(c, fleet, gradient, power_name, time_name);
        if (*compare) return cmd_compare(c, fleet, fleet_b);
        if (*trunc) return cmd_truncate(c, fleet, signal, out_path);
        if (*mc) {
            std::optional<std::uint64_t> seed;
            if (seed_opt->count() > 0) seed = seed_value;
            return cmd_montecarlo(c, fleet, scenario, samples, seed, workers);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

}  // namespace flexcap::cli
