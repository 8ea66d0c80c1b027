#include "vstack/admm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include "vstack/devices.hpp"
#include "vstack/subproblems.hpp"

namespace vstack::admm {

using EV = ExchangeVector;

Mode mode_from_string(const std::string& name) {
    if (name == "sync") return Mode::Sync;
    if (name == "sync-latency") return Mode::SyncLatency;
    if (name == "async") return Mode::Async;
    throw InputError("solver", "unknown mode '" + name + "' (sync | sync-latency | async)");
}

const char* to_string(Mode m) {
    switch (m) {
        case Mode::Sync: return "sync";
        case Mode::SyncLatency: return "sync-latency";
        case Mode::Async: return "async";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// LatencyModel

LatencyModel LatencyModel::none() { return LatencyModel{}; }

LatencyModel LatencyModel::bernoulli(double p_delay, std::uint64_t seed) {
    if (!(p_delay >= 0.0 && p_delay < 1.0))
        throw InputError("latency", "bernoulli delay probability must lie in [0, 1)");
    LatencyModel m;
    m.kind_ = Kind::Bernoulli;
    m.p_delay_ = p_delay;
    m.seed_ = seed;
    return m;
}

LatencyModel LatencyModel::fixed_delay(std::vector<int> delays) {
    for (int d : delays)
        if (d < 0) throw InputError("latency", "fixed delays must be >= 0");
    LatencyModel m;
    m.kind_ = Kind::FixedDelay;
    m.delays_ = std::move(delays);
    return m;
}

LatencyModel LatencyModel::from_trace(const std::filesystem::path& path, int community_count,
                                      int window) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string(), "cannot open arrival-trace file");
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string(), "empty arrival-trace file");
    if (split_csv_line(line) != std::vector<std::string>{"iter", "community_id"})
        throw InputError(path.string(), "expected header 'iter,community_id'");
    std::map<int, std::set<int>> arrivals;
    int max_iter = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 2) throw InputError(path.string(), "expected 2 columns");
        int it = std::stoi(cells[0]);
        int cid = std::stoi(cells[1]);
        if (it < 0 || cid < 0 || cid >= community_count)
            throw InputError(path.string(), "iteration or community id out of range");
        arrivals[it].insert(cid);
        max_iter = std::max(max_iter, it);
    }
    LatencyModel m;
    m.kind_ = Kind::Trace;
    m.period_ = max_iter + 1;
    m.trace_.assign(static_cast<size_t>(m.period_), {});
    for (auto& [it, who] : arrivals) m.trace_[static_cast<size_t>(it)] = std::move(who);

    // every community must arrive at least once per `window` iterations,
    // including across the cyclic wrap
    for (int c = 0; c < community_count; ++c) {
        std::vector<int> when;
        for (int k = 0; k < m.period_; ++k)
            if (m.trace_[static_cast<size_t>(k)].count(c)) when.push_back(k);
        if (when.empty())
            throw InputError(path.string(),
                             "community " + std::to_string(c) + " never appears in the trace");
        int worst = when.front() + m.period_ - when.back();
        for (size_t k = 1; k < when.size(); ++k)
            worst = std::max(worst, when[k] - when[k - 1]);
        if (worst > window)
            throw InputError(path.string(), "community " + std::to_string(c) +
                                                " has an arrival gap of " + std::to_string(worst) +
                                                " > window " + std::to_string(window));
    }
    return m;
}

LatencyModel LatencyModel::parse(const std::string& spec, int community_count,
                                 std::uint64_t seed) {
    if (spec.empty() || spec == "none") return none();
    auto colon = spec.find(':');
    std::string head = spec.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "bernoulli") {
        if (rest.empty()) throw InputError("latency", "bernoulli:<p> requires a probability");
        return bernoulli(std::stod(rest), seed);
    }
    if (head == "fixed") {
        if (rest.empty()) throw InputError("latency", "fixed:<d1,d2,...> requires delays");
        std::vector<int> delays;
        for (const auto& cell : split_csv_line(rest)) delays.push_back(std::stoi(cell));
        if (static_cast<int>(delays.size()) == 1)
            delays.assign(static_cast<size_t>(community_count), delays[0]);
        if (static_cast<int>(delays.size()) != community_count)
            throw InputError("latency", "fixed delays must list one value or one per community");
        return fixed_delay(std::move(delays));
    }
    if (head == "trace") {
        if (rest.empty()) throw InputError("latency", "trace:<file> requires a path");
        return from_trace(rest, community_count);
    }
    throw InputError("latency", "unknown latency spec '" + spec +
                                    "' (none | bernoulli:<p> | fixed:<d,...> | trace:<file>)");
}

bool LatencyModel::delivers(int iter, int community) const {
    switch (kind_) {
        case Kind::None: return true;
        case Kind::Bernoulli: {
            std::uint64_t w = mix64(seed_, (static_cast<std::uint64_t>(iter) << 20) ^
                                               static_cast<std::uint64_t>(community));
            return u64_to_unit(w) >= p_delay_;
        }
        case Kind::FixedDelay: {
            int d = delays_[static_cast<size_t>(community) % delays_.size()];
            return d == 0 || iter % (d + 1) == 0;
        }
        case Kind::Trace:
            return trace_[static_cast<size_t>(iter % period_)].count(community) > 0;
    }
    return true;
}

// ---------------------------------------------------------------------------

std::pair<double, double> residuals(const std::vector<Vec>& aux,
                                    const std::vector<Vec>& aux_prev,
                                    const std::vector<Vec>& exchange, double rho) {
    double r_primal = 0.0;
    double r_dual = 0.0;
    for (size_t i = 0; i < aux.size(); ++i) {
        r_primal = std::max(r_primal, (aux[i] - exchange[i]).cwiseAbs().maxCoeff());
        r_dual = std::max(r_dual, rho * (aux[i] - aux_prev[i]).cwiseAbs().maxCoeff());
    }
    return {r_primal, r_dual};
}

namespace {

/// Restores the per-slot market balance on the final decisions. The exchange
/// disagreement left by a finite-tolerance run is rerouted through channels
/// that leave the community power balance, the discharge split and the nodal
/// injection unchanged: excess sells move from ETS to B2G (or to B2B backed
/// by a grid reduction); excess buys move from ETB to the grid. Returns the
/// worst per-slot imbalance that could not be repaired.
double rebalance_market(const Scenario& s, std::vector<CommunityDecision>& ds) {
    const int H = s.H();
    const int I = s.community_count();
    const double dt = s.dt();
    double worst = 0.0;
    for (int t = 0; t < H; ++t) {
        const auto ts = static_cast<size_t>(t);
        double delta = 0.0;
        for (const auto& d : ds) delta += d.exchange.at(EV::ETS, t) - d.exchange.at(EV::ETB, t);

        if (delta > 0) {
            for (int i = 0; i < I && delta > 1e-15; ++i) {
                CommunityDecision& d = ds[static_cast<size_t>(i)];
                const Community& c = s.communities[static_cast<size_t>(i)];
                double& ets = d.exchange.at(EV::ETS, t);
                if (ets <= 0) continue;
                // route 1: sell to the grid instead of the market
                if (s.flags.enable_b2g) {
                    double& b2g = d.exchange.at(EV::B2G, t);
                    double a = std::min({ets, delta, c.limits.b2g_max[ts] - b2g});
                    if (a > 0) { ets -= a; b2g += a; delta -= a; }
                }
                // route 2: serve the building instead, cutting the grid draw
                if (delta > 1e-15 && s.flags.enable_b2b) {
                    double& grid = d.exchange.at(EV::GRID, t);
                    double a = std::min({ets, delta, grid, c.limits.b2b_max[ts] - d.p_b2b[ts]});
                    if (a > 0) { ets -= a; d.p_b2b[ts] += a; grid -= a; delta -= a; }
                }
                // route 3: discharge less (needs stored-energy headroom later)
                if (delta > 1e-15) {
                    double head = c.battery.capacity_upper;
                    for (int u = t; u < H; ++u)
                        head = std::min(head, c.battery.capacity_upper - d.b_bats[static_cast<size_t>(u)]);
                    double a = std::min({ets, delta, d.p_batd[ts],
                                         head * c.battery.eff_discharge / dt});
                    if (a > 0) {
                        ets -= a;
                        d.p_batd[ts] -= a;
                        for (int u = t; u < H; ++u)
                            d.b_bats[static_cast<size_t>(u)] += a * dt / c.battery.eff_discharge;
                        delta -= a;
                    }
                }
            }
        } else if (delta < 0) {
            double need = -delta;
            for (int i = 0; i < I && need > 1e-15; ++i) {
                CommunityDecision& d = ds[static_cast<size_t>(i)];
                const Community& c = s.communities[static_cast<size_t>(i)];
                double& etb = d.exchange.at(EV::ETB, t);
                if (etb <= 0) continue;
                // buy from the grid instead of the market
                double& grid = d.exchange.at(EV::GRID, t);
                double a = std::min({etb, need, c.limits.grid_max - grid});
                if (a > 0) { etb -= a; grid += a; need -= a; }
            }
            delta = -need;
        }
        worst = std::max(worst, std::abs(delta));
    }
    return worst;
}

}  // namespace

RunTrace run(const Scenario& s, const AdmmOptions& opts, const LatencyModel& latency) {
    const int I = s.community_count();
    const int H = s.H();
    const int aux_len = 5 * H;
    if (!(opts.rho > 0)) throw InputError("admm.rho", "must be > 0");
    if (!(opts.eps1 > 0) || !(opts.eps2 > 0))
        throw InputError("admm.eps", "thresholds must be > 0");

    const auto t_start = std::chrono::steady_clock::now();

    std::vector<sub::CommunitySolver> solvers;
    solvers.reserve(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i) solvers.emplace_back(s, i, opts.rho, opts.qp_opts);
    sub::OperatorSolver op(s, opts.rho, opts.qp_opts);

    // Standalone solves seed the decisions (and, with warm_start, the
    // auxiliary copies): each community minimizes its own cost with no
    // coupling terms.
    std::vector<CommunityDecision> decisions;
    decisions.reserve(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i)
        decisions.push_back(
            sub::solve_community(s, i, Vec::Zero(aux_len), Vec::Zero(aux_len), 0.0, opts.qp_opts));

    std::vector<Vec> duals(static_cast<size_t>(I), Vec::Zero(aux_len));
    std::vector<Vec> exchange(static_cast<size_t>(I), Vec::Zero(aux_len));
    std::vector<Vec> aux(static_cast<size_t>(I), Vec::Zero(aux_len));
    if (opts.warm_start)
        for (int i = 0; i < I; ++i) {
            exchange[static_cast<size_t>(i)] = decisions[static_cast<size_t>(i)].exchange.flat;
            aux[static_cast<size_t>(i)] = exchange[static_cast<size_t>(i)];
        }
    std::vector<Vec> aux_prev = aux;
    std::vector<Vec> operator_view = exchange;  // what the operator uses

    RunTrace trace;
    trace.iterations.reserve(static_cast<size_t>(opts.max_iter));

    for (int k = 0; k < opts.max_iter; ++k) {
        IterationRecord rec;
        rec.iter = k;

        for (int i = 0; i < I; ++i) {
            bool active = opts.mode == Mode::Sync || latency.delivers(k, i);
            if (active) {
                decisions[static_cast<size_t>(i)] =
                    solvers[static_cast<size_t>(i)].solve(duals[static_cast<size_t>(i)],
                                                          aux[static_cast<size_t>(i)]);
                exchange[static_cast<size_t>(i)] =
                    decisions[static_cast<size_t>(i)].exchange.flat;
                operator_view[static_cast<size_t>(i)] = exchange[static_cast<size_t>(i)];
                rec.active.push_back(i);
            } else if (opts.mode == Mode::SyncLatency) {
                operator_view[static_cast<size_t>(i)] = Vec::Zero(aux_len);
            }
            // Async: operator_view keeps the last received exchange vector
        }

        aux_prev = aux;
        aux = op.solve(duals, operator_view);
        for (int i = 0; i < I; ++i)
            duals[static_cast<size_t>(i)] =
                sub::dual_update(duals[static_cast<size_t>(i)], aux[static_cast<size_t>(i)],
                                 operator_view[static_cast<size_t>(i)], opts.rho);

        auto [r_p, r_d] = residuals(aux, aux_prev, operator_view, opts.rho);
        rec.r_primal = r_p;
        rec.r_dual = r_d;
        double obj = 0.0;
        for (int i = 0; i < I; ++i)
            obj += dev::community_cost(s, i, decisions[static_cast<size_t>(i)]);
        rec.objective = obj;
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        trace.iterations.push_back(std::move(rec));
        trace.iterations_used = k + 1;
        trace.final_r_primal = r_p;
        trace.final_r_dual = r_d;

        if (r_p <= opts.eps1 && r_d <= opts.eps2) {
            trace.converged = true;
            break;
        }
    }

    trace.rebalance_residual = rebalance_market(s, decisions);
    trace.solution = assemble_solution(s, std::move(decisions));
    return trace;
}

void RunTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "iter,r_primal,r_dual,objective,n_active\n";
    for (const auto& rec : iterations)
        out << rec.iter << ',' << fmt_full(rec.r_primal) << ',' << fmt_full(rec.r_dual) << ','
            << fmt_full(rec.objective) << ',' << rec.active.size() << "\n";
}

nlohmann::json RunTrace::to_json() const {
    nlohmann::json j;
    j["converged"] = converged;
    j["iterations_used"] = iterations_used;
    j["final_r_primal"] = final_r_primal;
    j["final_r_dual"] = final_r_dual;
    j["rebalance_residual"] = rebalance_residual;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rec : iterations)
        arr.push_back({{"iter", rec.iter},
                       {"r_primal", rec.r_primal},
                       {"r_dual", rec.r_dual},
                       {"objective", rec.objective},
                       {"active", rec.active},
                       {"wall_time_s", rec.wall_time_s}});
    j["iterations"] = arr;
    j["solution"] = solution_to_json(solution);
    return j;
}

}  // namespace vstack::admm
