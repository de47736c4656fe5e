#include "flexcap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <thread>

#include "flexcap/dispatch.hpp"
#include "flexcap/epcurve.hpp"

namespace flexcap::oracle {

namespace {

// Optimal-rule allocation recomputed from raw device energies. Kept separate
// from dispatch.cpp so the oracle does not share code with what it checks.
double greedy_allocation(std::span<const double> p_max, std::span<const double> energy, double request,
                         double tol, std::vector<double>& u) {
    const std::size_t n = p_max.size();
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
        if (energy[i] > 0.0) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return energy[a] / p_max[a] > energy[b] / p_max[b];
    });
    u.assign(n, 0.0);
    double remaining = request;
    std::size_t k = 0;
    while (k < order.size() && remaining > 0.0) {
        // One group of (nearly) equal time-to-go.
        const double lead = energy[order[k]] / p_max[order[k]];
        std::size_t end = k;
        double power = 0.0;
        while (end < order.size() && lead - energy[order[end]] / p_max[order[end]] <= tol * std::max(1.0, lead)) {
            power += p_max[order[end]];
            ++end;
        }
        const double r = std::min(1.0, remaining / power);
        for (std::size_t j = k; j < end; ++j) u[order[j]] = r * p_max[order[j]];
        remaining -= r * power;
        k = end;
    }
    return std::max(remaining, 0.0);
}

// Energy the devices could deliver above power level p if all ran flat out.
double capacity_at(std::span<const double> p_max, std::span<const double> energy, double p) {
    std::vector<std::size_t> idx(p_max.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return energy[a] / p_max[a] < energy[b] / p_max[b]; });
    double level = 0.0;
    for (std::size_t i : idx) {
        if (energy[i] > 0.0) level += p_max[i];
    }
    double out = 0.0;
    double prev = 0.0;
    for (std::size_t i : idx) {
        if (!(energy[i] > 0.0)) continue;
        const double x = energy[i] / p_max[i];
        out += (x - prev) * std::max(level - p, 0.0);
        prev = x;
        level -= p_max[i];
    }
    return out;
}

}  // namespace

OracleVerdict brute_force_feasible(const StepSignal& signal, const FleetState& fleet, double step, double tol) {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw Error(ErrorCode::InvalidStep, "oracle step must be positive");
    }
    const auto p_max = fleet.p_max();
    std::vector<double> e(fleet.energy().begin(), fleet.energy().end());
    std::vector<double> u;

    OracleVerdict v;
    v.margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < signal.size(); ++k) {
        const double request = signal.value(k);
        const double end = signal.end(k);
        double t = signal.start(k);
        while (t < end) {
            const double deficit = greedy_allocation(p_max, e, request, tol, u);
            if (deficit > tol * std::max(1.0, request)) v.feasible = false;
            v.margin = std::min(v.margin, capacity_at(p_max, e, request));

            double h = std::min(step, end - t);
            for (std::size_t i = 0; i < e.size(); ++i) {
                if (u[i] > 0.0) h = std::min(h, e[i] / u[i]);
            }
            v.step = std::max(v.step, h);
            double total = 0.0;
            for (std::size_t i = 0; i < e.size(); ++i) {
                total += u[i];
                e[i] -= u[i] * h;
                if (e[i] < -tol * std::max(1.0, fleet.devices()[i].energy)) v.feasible = false;
                if (e[i] <= tol * p_max[i]) e[i] = 0.0;
            }
            v.delivered += total * h;
            t = (end - t - h <= 0.0) ? end : t + h;
        }
    }
    if (v.margin == std::numeric_limits<double>::infinity()) v.margin = fleet.total_energy();
    return v;
}

namespace {

class MaxFlow {
public:
    explicit MaxFlow(std::size_t n) : n_(n), cap_(n * n, 0.0) {}

    void add(std::size_t from, std::size_t to, double c) { cap_[from * n_ + to] += c; }

    double run(std::size_t s, std::size_t t, double eps) {
        double flow = 0.0;
        std::vector<std::size_t> parent(n_);
        for (;;) {
            std::fill(parent.begin(), parent.end(), n_);
            parent[s] = s;
            std::queue<std::size_t> q;
            q.push(s);
            while (!q.empty() && parent[t] == n_) {
                const std::size_t a = q.front();
                q.pop();
                for (std::size_t b = 0; b < n_; ++b) {
                    if (parent[b] == n_ && cap_[a * n_ + b] > eps) {
                        parent[b] = a;
                        q.push(b);
                    }
                }
            }
            if (parent[t] == n_) break;
            double push = std::numeric_limits<double>::infinity();
            for (std::size_t b = t; b != s; b = parent[b]) push = std::min(push, cap_[parent[b] * n_ + b]);
            for (std::size_t b = t; b != s; b = parent[b]) {
                cap_[parent[b] * n_ + b] -= push;
                cap_[b * n_ + parent[b]] += push;
            }
            flow += push;
        }
        return flow;
    }

private:
    std::size_t n_;
    std::vector<double> cap_;
};

}  // namespace

FlowVerdict flow_feasible(const StepSignal& signal, const FleetState& fleet, double tol) {
    FlowVerdict out;
    out.demand = signal.energy();
    if (!(out.demand > 0.0)) return out;

    const std::size_t K = signal.size();
    const std::size_t n = fleet.size();
    const std::size_t source = 0;
    const std::size_t sink = 1 + K + n;
    MaxFlow g(K + n + 2);
    // Work in units of the demand so the residual threshold is scale-free.
    const double scale = 1.0 / out.demand;
    for (std::size_t k = 0; k < K; ++k) {
        const double d = signal.duration(k);
        g.add(source, 1 + k, signal.value(k) * d * scale);
        for (std::size_t i = 0; i < n; ++i) g.add(1 + k, 1 + K + i, fleet.p_max()[i] * d * scale);
    }
    for (std::size_t i = 0; i < n; ++i) g.add(1 + K + i, sink, fleet.energy()[i] * scale);

    const double flow = g.run(source, sink, 1e-15) / scale;
    out.shortfall = std::max(out.demand - flow, 0.0);
    out.feasible = out.shortfall <= tol * std::max(1.0, out.demand);
    return out;
}

std::mt19937_64 case_stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x0a0cu};
    return std::mt19937_64(seq);
}

FleetSampler small_fleet_sampler(std::size_t max_devices) {
    return [max_devices](std::mt19937_64& rng) {
        std::uniform_int_distribution<std::size_t> count(1, max_devices);
        std::uniform_int_distribution<int> minutes(0, 600);
        std::uniform_int_distribution<int> decikw(1, 200);
        std::bernoulli_distribution empty(0.05);
        const std::size_t n = count(rng);
        std::vector<Device> devices;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = decikw(rng) * 100.0;
            const double ttg = empty(rng) ? 0.0 : minutes(rng) * 60.0;
            devices.push_back({"d" + std::to_string(i), p, ttg * p});
        }
        return make_fleet(std::move(devices));
    };
}

SignalSampler small_signal_sampler(std::size_t max_segments) {
    return [max_segments](std::mt19937_64& rng, const FleetState& fleet) {
        std::uniform_int_distribution<std::size_t> count(1, max_segments);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::size_t K = count(rng);
        const double power = std::max(fleet.total_power(), 1.0);
        std::vector<double> values(K);
        std::vector<double> weights(K);
        for (std::size_t k = 0; k < K; ++k) {
            values[k] = 1.1 * power * unit(rng);
            weights[k] = 0.1 + unit(rng);
        }
        double raw = 0.0;
        for (std::size_t k = 0; k < K; ++k) raw += values[k] * weights[k];
        const double target = (0.3 + 1.2 * unit(rng)) * std::max(fleet.total_energy(), 3600.0 * power * 0.1);
        const double scale = raw > 0.0 ? target / raw : 3600.0;
        std::vector<double> durations(K);
        for (std::size_t k = 0; k < K; ++k) {
            durations[k] = std::max(1.0, std::round(weights[k] * scale / 60.0)) * 60.0;
        }
        return StepSignal::from_durations(values, durations);
    };
}

namespace {

std::int64_t gcd_seconds(const StepSignal& s) {
    std::int64_t g = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double d = s.duration(k);
        const double r = std::round(d);
        if (std::abs(d - r) > 1e-9 * std::max(1.0, d) || r < 1.0) return 0;
        g = std::gcd(g, static_cast<std::int64_t>(r));
    }
    return g;
}

[[noreturn]] void mismatch(std::uint64_t seed, std::uint64_t index, const std::string& what) {
    std::ostringstream os;
    os << "oracle mismatch (seed " << seed << ", case " << index << "): " << what;
    throw Error(ErrorCode::OracleMismatch, os.str());
}

}  // namespace

namespace {

struct CaseResult {
    bool feasible = false;
    bool agree = false;
    bool boundary = false;
    bool banded = false;
    bool permuted = false;
    bool terminal_checked = false;
    double terminal_error = 0.0;
    std::string mismatch;  // empty when the case passed
};

CaseResult check_case(const FleetSampler& fleets, const SignalSampler& signals, std::uint64_t seed,
                      std::uint64_t i, const CrossValidationOptions& opt) {
    CaseResult res;
    auto rng = case_stream(seed, i);
    const FleetState fleet = fleets(rng);
    const StepSignal signal = signals(rng, fleet);

    const EPCurve cap = capacity_curve(fleet);
    const DominanceCheck dom = check_dominance(cap, ep_transform(signal), opt.tolerance);
    const double etol = opt.tolerance * std::max(1.0, signal.energy());

    const std::int64_t g = gcd_seconds(signal);
    const double step = g > 0 ? std::min(static_cast<double>(g), opt.max_step) : opt.max_step;
    const OracleVerdict brute = brute_force_feasible(signal, fleet, step, opt.tolerance);
    const FlowVerdict flow = flow_feasible(signal, fleet, opt.tolerance);

    // Near the frontier floating point cannot settle an iff statement. The
    // flow check is exact up to rounding; the stepped simulation loses
    // O(step * power) energy to merges falling inside a step.
    const double peak_gap = std::abs(signal.peak() - cap.power_intercept());
    const bool flow_boundary =
        std::abs(dom.margin) <= 10.0 * etol || peak_gap <= 10.0 * opt.tolerance * std::max(1.0, signal.peak());
    const double brute_band = 4.0 * step * fleet.total_power();
    const bool brute_boundary = flow_boundary || std::abs(dom.margin) <= brute_band;

    res.feasible = dom.dominates;
    res.agree = dom.dominates == flow.feasible && dom.dominates == brute.feasible;
    res.banded = brute_boundary;
    res.boundary = !res.agree && brute_boundary;
    if (dom.dominates != flow.feasible && !flow_boundary) {
        res.mismatch = "capacity test and transportation flow disagree";
        return res;
    }
    if (dom.dominates != brute.feasible && !brute_boundary) {
        res.mismatch = "capacity test and stepped greedy simulation disagree";
        return res;
    }
    if (!opt.check_permutations || signal.size() < 2) return res;

    // Random cut points and a random order of the parts.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> cuts;
    const std::size_t ncuts = 1 + static_cast<std::size_t>(unit(rng) * 4.0);
    for (std::size_t c = 0; c < ncuts; ++c) cuts.push_back(std::round(unit(rng) * signal.horizon()));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::erase_if(cuts, [&](double c) { return !(c > 0.0 && c < signal.horizon()); });
    std::vector<std::size_t> order(cuts.size() + 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const StepSignal permuted = permute_segments(signal, cuts, order);

    res.permuted = true;
    const FlowVerdict pflow = flow_feasible(permuted, fleet, opt.tolerance);
    const bool pdom = is_feasible(permuted, fleet, opt.tolerance);
    if (pdom != dom.dominates) {
        res.mismatch = "permutation changed the capacity verdict";
        return res;
    }
    if (pflow.feasible != flow.feasible && !flow_boundary) {
        res.mismatch = "permutation changed the transportation-flow verdict";
        return res;
    }

    if (dom.dominates && !flow_boundary) {
        SimulationOptions so;
        so.record_states = false;
        so.tolerance = opt.tolerance;
        const Trajectory a = simulate(fleet, signal, Policy::Optimal, so);
        const Trajectory b = simulate(fleet, permuted, Policy::Optimal, so);
        double err = 0.0;
        for (std::size_t d = 0; d < fleet.size(); ++d) {
            err = std::max(err, std::abs(a.final_energy[d] - b.final_energy[d]));
        }
        res.terminal_error = err / std::max(1.0, fleet.total_energy());
        res.terminal_checked = true;
        if (res.terminal_error > 1e-9) res.mismatch = "permuted signal left a different terminal state";
    }
    return res;
}

}  // namespace

CrossValidationReport cross_validate(const FleetSampler& fleets, const SignalSampler& signals, std::size_t cases,
                                     std::uint64_t seed, const CrossValidationOptions& opt) {
    if (cases == 0) throw Error(ErrorCode::InvalidConfig, "need at least one case");
    std::vector<CaseResult> results(cases);
    std::vector<std::exception_ptr> errors(cases);
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                results[i] = check_case(fleets, signals, seed, i, opt);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t nworkers = std::clamp<std::size_t>(opt.workers, 1, cases);
    if (nworkers == 1) {
        run(0, cases);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nworkers; ++w) {
            pool.emplace_back(run, w * cases / nworkers, (w + 1) * cases / nworkers);
        }
        for (auto& th : pool) th.join();
    }

    // Aggregated in case order, so the report and the first reported
    // mismatch do not depend on the schedule.
    CrossValidationReport rep;
    for (std::size_t i = 0; i < cases; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        const CaseResult& r = results[i];
        if (!r.mismatch.empty()) mismatch(seed, i, r.mismatch);
        ++rep.cases;
        if (r.feasible) ++rep.feasible_cases;
        if (r.agree) ++rep.agreements;
        if (r.banded) ++rep.banded_cases;
        if (r.boundary) {
            ++rep.boundary_cases;
            rep.boundary_indices.push_back(i);
        }
        if (r.permuted) ++rep.permutation_checks;
        if (r.terminal_checked) {
            ++rep.terminal_state_checks;
            rep.max_terminal_state_error = std::max(rep.max_terminal_state_error, r.terminal_error);
        }
    }
    return rep;
}

}  // namespace flexcap::oracle
