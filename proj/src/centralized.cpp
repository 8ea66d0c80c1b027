#include "vstack/centralized.hpp"

#include <algorithm>
#include <cmath>

#include "vstack/devices.hpp"
#include "vstack/subproblems.hpp"

namespace vstack::cent {

using EV = ExchangeVector;

namespace {

/// One-shot problem over all communities plus the feeder: community blocks
/// first (each laid out like the sub-problem), then the network columns.
struct WholeSystem {
    sub::CommunityLayout lay;
    net::LinearConstraintBlock block;
    int net_off = 0;
    qp::QuadraticProgram prob;
    Vec relaxed_l, relaxed_u;
};

WholeSystem build_whole_system(const Scenario& s) {
    const int H = s.H();
    const int I = s.community_count();
    WholeSystem ws;
    ws.lay = sub::CommunityLayout::make(H, s.tariff.kind == TariffKind::TPT);
    ws.block = net::network_constraints(s.feeder, H);
    ws.net_off = I * ws.lay.n;

    qp::QuadraticProgram& prob = ws.prob;
    prob.n = ws.net_off + ws.block.n_cols;

    std::vector<char> occupied(static_cast<size_t>(s.feeder.node_count), 0);
    for (const auto& c : s.communities) occupied[static_cast<size_t>(c.node_id)] = 1;
    int link_rows = 0;
    for (int node = 1; node < s.feeder.node_count; ++node)
        if (occupied[static_cast<size_t>(node)]) link_rows += H;

    const int comm_rows = (ws.lay.tpt ? 6 : 5) * H;
    prob.m = I * comm_rows + ws.block.row_count() + link_rows + H;
    prob.b = Vec::Zero(prob.m);
    prob.l = Vec::Constant(prob.n, -kInf);
    prob.u = Vec::Constant(prob.n, kInf);
    prob.c = Vec::Zero(prob.n);
    prob.objective_constant = 0.0;
    prob.var_names.assign(static_cast<size_t>(prob.n), {});

    std::vector<Triplet> a_trips;
    Vec p_diag = Vec::Zero(prob.n);
    for (int i = 0; i < I; ++i) {
        // community rows reuse the sub-problem assembly with offsets
        sub::append_community_rows_for(s, i, ws.lay, i * ws.lay.n, i * comm_rows, a_trips, prob.b);
        sub::fill_community_bounds_for(s, i, ws.lay, i * ws.lay.n, prob.l, prob.u);
        sub::fill_community_objective_for(s, i, ws.lay, i * ws.lay.n, p_diag, prob.c,
                                          prob.objective_constant);
        sub::fill_community_names_for(ws.lay, i * ws.lay.n, "c" + std::to_string(i) + ".",
                                      prob.var_names);
    }

    // network recursions
    int row0 = I * comm_rows;
    for (const auto& tr : ws.block.rows)
        a_trips.emplace_back(row0 + tr.row(), ws.net_off + tr.col(), tr.value());
    prob.b.segment(row0, ws.block.row_count()) = ws.block.rhs;
    prob.l.tail(ws.block.n_cols) = ws.block.col_lower;
    prob.u.tail(ws.block.n_cols) = ws.block.col_upper;

    // pin injections (reactive everywhere, active where no community sits)
    Vec qload = Vec::Zero(static_cast<Eigen::Index>(s.feeder.node_count) * H);
    for (const auto& c : s.communities)
        for (int t = 0; t < H; ++t)
            qload[c.node_id * H + t] += c.series.reactive_load[static_cast<size_t>(t)];
    for (int node = 1; node < s.feeder.node_count; ++node)
        for (int t = 0; t < H; ++t) {
            int cq = ws.net_off + ws.block.col_inj_q(node, t);
            double v = qload[node * H + t] / s.feeder.s_base_kva;
            prob.l[cq] = v;
            prob.u[cq] = v;
            if (!occupied[static_cast<size_t>(node)]) {
                int cp = ws.net_off + ws.block.col_inj_p(node, t);
                prob.l[cp] = 0.0;
                prob.u[cp] = 0.0;
            }
        }

    // injection links: inj_p = sum of exchange draws at the node, per-unit
    int r = row0 + ws.block.row_count();
    const double inv_base = 1.0 / s.feeder.s_base_kva;
    for (int node = 1; node < s.feeder.node_count; ++node) {
        if (!occupied[static_cast<size_t>(node)]) continue;
        for (int t = 0; t < H; ++t, ++r) {
            a_trips.emplace_back(r, ws.net_off + ws.block.col_inj_p(node, t), 1.0);
            for (int i = 0; i < I; ++i) {
                if (s.communities[static_cast<size_t>(i)].node_id != node) continue;
                const int base = i * ws.lay.n;
                a_trips.emplace_back(r, base + ws.lay.grid + t, -inv_base);
                a_trips.emplace_back(r, base + ws.lay.etb + t, -inv_base);
                a_trips.emplace_back(r, base + ws.lay.ets + t, inv_base);
                a_trips.emplace_back(r, base + ws.lay.b2g + t, inv_base);
                a_trips.emplace_back(r, base + ws.lay.feed + t, inv_base);
            }
        }
    }
    // market balance per slot
    for (int t = 0; t < H; ++t, ++r) {
        for (int i = 0; i < I; ++i) {
            a_trips.emplace_back(r, i * ws.lay.n + ws.lay.ets + t, 1.0);
            a_trips.emplace_back(r, i * ws.lay.n + ws.lay.etb + t, -1.0);
        }
    }

    prob.A = SpMat(prob.m, prob.n);
    prob.A.setFromTriplets(a_trips.begin(), a_trips.end());
    std::vector<Triplet> p_trips;
    for (int j = 0; j < prob.n; ++j)
        if (p_diag[j] != 0.0) p_trips.emplace_back(j, j, p_diag[j]);
    prob.P = SpMat(prob.n, prob.n);
    prob.P.setFromTriplets(p_trips.begin(), p_trips.end());

    ws.relaxed_l = prob.l;
    ws.relaxed_u = prob.u;
    return ws;
}

GlobalSolution extract_global(const Scenario& s, const WholeSystem& ws, const Vec& x) {
    std::vector<CommunityDecision> decisions;
    for (int i = 0; i < s.community_count(); ++i)
        decisions.push_back(sub::extract_decision(s, i, ws.lay, x, i * ws.lay.n));
    return assemble_solution(s, std::move(decisions));
}

}  // namespace

GlobalSolution solve_centralized(const Scenario& s, const qp::SolveOptions& opts) {
    const int H = s.H();
    const int I = s.community_count();
    WholeSystem ws = build_whole_system(s);
    qp::Solver solver(ws.prob, opts);

    // Direction handling in rounds. Each round re-solves the relaxation with
    // the pins accumulated so far, then pins every pair the solution already
    // uses one-sidedly. Pairs that remain genuinely two-sided (the relaxation
    // likes routing power through both directions of a pair at once) are
    // resolved one per round by trying both pins and keeping the cheaper one.
    // Pairs that are idle at the end default to charge-allowed / buy-allowed.
    // Exploration rounds run at reduced accuracy without polish; the final
    // pass tightens back up so the reported point is exact.
    const double kPinTol = 1e-3;  // kW; a side this small counts as idle
    solver.set_tolerances(1e-4, 1e-4, false, 6000);
    std::vector<std::vector<int>> x_state(static_cast<size_t>(I), std::vector<int>(H, -1));
    std::vector<std::vector<int>> y_state(static_cast<size_t>(I), std::vector<int>(H, -1));

    auto bounds_for_states = [&](Vec& l, Vec& u) {
        l = ws.relaxed_l;
        u = ws.relaxed_u;
        for (int i = 0; i < I; ++i) {
            const int base = i * ws.lay.n;
            for (int t = 0; t < H; ++t) {
                int xs = x_state[static_cast<size_t>(i)][static_cast<size_t>(t)];
                int ys = y_state[static_cast<size_t>(i)][static_cast<size_t>(t)];
                if (xs == 0) u[base + ws.lay.batd + t] = 0.0;
                if (xs == 1) u[base + ws.lay.batc + t] = 0.0;
                if (ys == 0) u[base + ws.lay.ets + t] = 0.0;
                if (ys == 1) u[base + ws.lay.etb + t] = 0.0;
            }
        }
    };

    Vec l, u;
    qp::QpSolution sol;
    int n_resolves = 0;
    long long n_iters = 0;
    bool exploring = true;
    auto resolve = [&]() {
        bounds_for_states(l, u);
        solver.update_bounds(ws.prob.b, l, u);
        sol = solver.solve();
        ++n_resolves;
        n_iters += sol.iterations;
        if (sol.status == qp::SolveStatus::Infeasible)
            throw SolveError("centralized: problem infeasible");
        // exploration rounds may stop at the iteration cap; the iterate is
        // still a usable guide for pinning decisions
        if (sol.status != qp::SolveStatus::Optimal && !exploring)
            throw SolveError(std::string("centralized: relaxed solve ") +
                             qp::to_string(sol.status));
    };

    // Rounds the still-open pairs (all communities, or a single one when
    // `only >= 0`): pin one-sided pairs in batches, settle two-sided ones by
    // trying both pins, default idle pairs to charge-allowed / buy-allowed.
    auto run_rounding = [&](int only) {
        resolve();
        while (true) {
            struct Pair {
                int i, t;
                bool is_x;
                double overlap;
            };
            std::vector<Pair> ambiguous;
            int pinned_this_round = 0;
            for (int i = 0; i < I; ++i) {
                if (only >= 0 && i != only) continue;
                const int base = i * ws.lay.n;
                for (int t = 0; t < H; ++t) {
                    auto classify = [&](double off_side, double on_side, std::vector<int>& state,
                                        bool is_x) {
                        if (state[static_cast<size_t>(t)] >= 0) return;
                        double lo = std::min(off_side, on_side);
                        double hi = std::max(off_side, on_side);
                        if (lo <= kPinTol && hi > kPinTol) {
                            state[static_cast<size_t>(t)] = on_side > off_side ? 1 : 0;
                            ++pinned_this_round;
                        } else if (lo > kPinTol) {
                            ambiguous.push_back({i, t, is_x, lo});
                        }
                        // both sides idle: leave for the final default
                    };
                    classify(sol.x[base + ws.lay.batc + t], sol.x[base + ws.lay.batd + t],
                             x_state[static_cast<size_t>(i)], true);
                    classify(sol.x[base + ws.lay.etb + t], sol.x[base + ws.lay.ets + t],
                             y_state[static_cast<size_t>(i)], false);
                }
            }
            if (pinned_this_round > 0) {
                resolve();
                continue;
            }
            if (ambiguous.empty()) break;

            // Largest two-sided pair decides next: try both directions and
            // keep the cheaper pinned problem (first on ties, for determinism).
            std::stable_sort(ambiguous.begin(), ambiguous.end(),
                             [](const Pair& a, const Pair& b) { return a.overlap > b.overlap; });
            const Pair& p = ambiguous.front();
            auto& state = p.is_x ? x_state[static_cast<size_t>(p.i)]
                                 : y_state[static_cast<size_t>(p.i)];
            double best_obj = kInf;
            int best_dir = 0;
            qp::QpSolution best_sol;
            for (int dir : {0, 1}) {
                state[static_cast<size_t>(p.t)] = dir;
                bool ok = true;
                try {
                    resolve();
                } catch (const SolveError&) {
                    ok = false;
                }
                if (ok && sol.objective < best_obj) {
                    best_obj = sol.objective;
                    best_dir = dir;
                    best_sol = sol;
                }
            }
            if (!(best_obj < kInf)) throw SolveError("centralized: problem infeasible");
            state[static_cast<size_t>(p.t)] = best_dir;
            sol = best_sol;
        }
        for (int i = 0; i < I; ++i) {
            if (only >= 0 && i != only) continue;
            for (int t = 0; t < H; ++t) {
                if (x_state[static_cast<size_t>(i)][static_cast<size_t>(t)] < 0)
                    x_state[static_cast<size_t>(i)][static_cast<size_t>(t)] = 0;
                if (y_state[static_cast<size_t>(i)][static_cast<size_t>(t)] < 0)
                    y_state[static_cast<size_t>(i)][static_cast<size_t>(t)] = 0;
            }
        }
        resolve();
    };

    run_rounding(-1);

    // Coordinate descent over community patterns: re-open one community at a
    // time and re-round it against the others' pinned directions. This picks
    // up the cross-community trade patterns a single global rounding misses.
    double cur_obj = sol.objective;
    for (int sweep = 0; sweep < 2 && I > 1; ++sweep) {
        bool improved = false;
        for (int i = 0; i < I; ++i) {
            auto x_save = x_state[static_cast<size_t>(i)];
            auto y_save = y_state[static_cast<size_t>(i)];
            std::fill(x_state[static_cast<size_t>(i)].begin(),
                      x_state[static_cast<size_t>(i)].end(), -1);
            std::fill(y_state[static_cast<size_t>(i)].begin(),
                      y_state[static_cast<size_t>(i)].end(), -1);
            try {
                run_rounding(i);
            } catch (const SolveError&) {
                x_state[static_cast<size_t>(i)] = x_save;
                y_state[static_cast<size_t>(i)] = y_save;
                continue;
            }
            if (sol.objective < cur_obj - 1e-7 * (1.0 + std::abs(cur_obj))) {
                cur_obj = sol.objective;
                improved = true;
            } else {
                x_state[static_cast<size_t>(i)] = x_save;
                y_state[static_cast<size_t>(i)] = y_save;
            }
        }
        if (!improved) break;
    }

    exploring = false;
    solver.set_tolerances(std::min(opts.eps_abs, 1e-7), std::min(opts.eps_rel, 1e-7),
                          opts.polish, opts.max_iter);
    resolve();
    if (getenv("VSTACK_CENT_DEBUG"))
        fprintf(stderr, "centralized: %d resolves, %lld total qp iterations, final=%.6f\n",
                n_resolves, n_iters, sol.objective);

    std::vector<DirectionPattern> patterns(static_cast<size_t>(I), DirectionPattern::zeros(H));
    for (int i = 0; i < I; ++i)
        for (int t = 0; t < H; ++t) {
            patterns[static_cast<size_t>(i)].x[static_cast<size_t>(t)] =
                x_state[static_cast<size_t>(i)][static_cast<size_t>(t)];
            patterns[static_cast<size_t>(i)].y[static_cast<size_t>(t)] =
                y_state[static_cast<size_t>(i)][static_cast<size_t>(t)];
        }

    GlobalSolution g = extract_global(s, ws, sol.x);
    for (int i = 0; i < I; ++i)
        g.communities[static_cast<size_t>(i)].pattern = patterns[static_cast<size_t>(i)];
    return g;
}

GlobalSolution brute_force_oracle(const Scenario& s, const qp::SolveOptions& opts) {
    const int H = s.H();
    const int I = s.community_count();
    if (I > 2 || H > 3)
        throw InputError("brute_force_oracle",
                         "instance too large (needs <= 2 communities and H <= 3)");

    WholeSystem ws = build_whole_system(s);
    qp::Solver solver(ws.prob, opts);

    const int bits = 2 * H * I;
    const long long total = 1LL << bits;
    double best_obj = kInf;
    Vec best_x;
    std::vector<DirectionPattern> best_patterns;

    for (long long code = 0; code < total; ++code) {
        std::vector<DirectionPattern> pats;
        int bit = 0;
        for (int i = 0; i < I; ++i) {
            DirectionPattern pat = DirectionPattern::zeros(H);
            for (int t = 0; t < H; ++t) pat.x[static_cast<size_t>(t)] = (code >> bit++) & 1;
            for (int t = 0; t < H; ++t) pat.y[static_cast<size_t>(t)] = (code >> bit++) & 1;
            pats.push_back(std::move(pat));
        }
        Vec l = ws.relaxed_l;
        Vec u = ws.relaxed_u;
        for (int i = 0; i < I; ++i)
            sub::apply_pattern_bounds_for(s, i, ws.lay, i * ws.lay.n, pats[static_cast<size_t>(i)],
                                          l, u);
        solver.update_bounds(ws.prob.b, l, u);
        solver.reset_warm_start();
        qp::QpSolution sol = solver.solve();
        if (sol.status != qp::SolveStatus::Optimal) continue;
        if (sol.objective < best_obj) {  // lexicographically first pattern wins ties
            best_obj = sol.objective;
            best_x = sol.x;
            best_patterns = pats;
        }
    }
    if (!(best_obj < kInf)) throw SolveError("brute_force_oracle: every pattern infeasible");
    GlobalSolution g = extract_global(s, ws, best_x);
    for (int i = 0; i < I; ++i)
        g.communities[static_cast<size_t>(i)].pattern = best_patterns[static_cast<size_t>(i)];
    return g;
}

// ---------------------------------------------------------------------------
// Grid-search oracle: enumerate a lattice over the independent decisions and
// score every feasible point. Dependent quantities are derived exactly:
//   batd = b2b + b2g + ets,
//   re_local = min(pv - feed, remaining demand)  (PV is free, grid is not),
//   grid = remaining demand - re_local.
// With two communities the market balance forces community 1's trades to
// mirror community 0's, so only community 0's trade volumes are enumerated.

namespace {

struct GridDim {
    int community = 0;
    int slot = 0;
    enum Kind { B2B, B2G, ETS, ETB, AC, BATC, FEED } kind = B2B;
    std::vector<double> levels;
};

std::vector<double> linspace(double lo, double hi, int levels) {
    if (hi <= lo) return {lo};
    std::vector<double> v(static_cast<size_t>(levels));
    for (int k = 0; k < levels; ++k) v[static_cast<size_t>(k)] = lo + (hi - lo) * k / (levels - 1);
    return v;
}

}  // namespace

GridSearchResult grid_search_oracle(const Scenario& s, int levels, long long max_points) {
    const int H = s.H();
    const int I = s.community_count();
    if (I > 2 || H > 3)
        throw InputError("grid_search_oracle",
                         "instance too large (needs <= 2 communities and H <= 3)");
    if (levels < 2 || levels > 7) throw InputError("grid_search_oracle", "levels must be in 2..7");
    const bool et_active = s.flags.enable_et && I == 2;

    std::vector<GridDim> dims;
    for (int i = 0; i < I; ++i) {
        const Community& c = s.communities[static_cast<size_t>(i)];
        for (int t = 0; t < H; ++t) {
            const auto ts = static_cast<size_t>(t);
            auto add = [&](GridDim::Kind kind, double lo, double hi) {
                if (hi > lo) dims.push_back({i, t, kind, linspace(lo, hi, levels)});
            };
            if (s.flags.enable_b2b) add(GridDim::B2B, 0.0, c.limits.b2b_max[ts]);
            if (s.flags.enable_b2g) add(GridDim::B2G, 0.0, c.limits.b2g_max[ts]);
            if (et_active && i == 0) {
                // community 1 mirrors these, so cap by both communities' limits
                const Community& other = s.communities[1];
                add(GridDim::ETS, 0.0, std::min(c.limits.et_sell_max, other.limits.et_buy_max));
                add(GridDim::ETB, 0.0, std::min(c.limits.et_buy_max, other.limits.et_sell_max));
            }
            add(GridDim::AC, c.hvac.power_min[ts], c.hvac.power_max[ts]);
            add(GridDim::BATC, 0.0, c.battery.charge_max);
            add(GridDim::FEED, 0.0, c.series.pv_available[ts]);
        }
    }

    long long total = 1;
    for (const auto& d : dims) {
        total *= static_cast<long long>(d.levels.size());
        if (total > max_points)
            throw InputError("grid_search_oracle", "lattice exceeds max_points");
    }

    // decision arrays indexed [i][t]
    auto zeros = [&] {
        return std::vector<std::vector<double>>(static_cast<size_t>(I),
                                                std::vector<double>(static_cast<size_t>(H), 0.0));
    };
    GridSearchResult res;
    res.enumerated = total;

    std::vector<int> idx(dims.size(), 0);
    for (long long point = 0; point < total; ++point) {
        auto b2b = zeros(), b2g = zeros(), ets = zeros(), etb = zeros(), ac = zeros(),
             batc = zeros(), feed = zeros();
        {
            long long rem = point;
            for (size_t k = 0; k < dims.size(); ++k) {
                const auto& d = dims[k];
                int sel = static_cast<int>(rem % static_cast<long long>(d.levels.size()));
                rem /= static_cast<long long>(d.levels.size());
                double v = d.levels[static_cast<size_t>(sel)];
                auto& tgt = d.kind == GridDim::B2B    ? b2b
                            : d.kind == GridDim::B2G  ? b2g
                            : d.kind == GridDim::ETS  ? ets
                            : d.kind == GridDim::ETB  ? etb
                            : d.kind == GridDim::AC   ? ac
                            : d.kind == GridDim::BATC ? batc
                                                      : feed;
                tgt[static_cast<size_t>(d.community)][static_cast<size_t>(d.slot)] = v;
            }
        }
        if (et_active)
            for (int t = 0; t < H; ++t) {
                ets[1][static_cast<size_t>(t)] = etb[0][static_cast<size_t>(t)];
                etb[1][static_cast<size_t>(t)] = ets[0][static_cast<size_t>(t)];
            }

        bool feasible = true;
        double cost = 0.0;
        for (int i = 0; i < I && feasible; ++i) {
            const Community& c = s.communities[static_cast<size_t>(i)];
            const double dt = s.dt();
            std::vector<double> grid(static_cast<size_t>(H), 0.0);
            double soc = c.battery.initial_energy;
            double temp = c.hvac.initial_indoor_temp;
            double discomfort = 0.0, degradation = 0.0;
            for (int t = 0; t < H && feasible; ++t) {
                const auto ts = static_cast<size_t>(t);
                double sell = ets[static_cast<size_t>(i)][ts];
                double buy = etb[static_cast<size_t>(i)][ts];
                if (sell > 0 && buy > 0) { feasible = false; break; }
                double discharge = b2b[static_cast<size_t>(i)][ts] +
                                   b2g[static_cast<size_t>(i)][ts] + sell;
                double charge = batc[static_cast<size_t>(i)][ts];
                if (discharge > c.battery.discharge_max + 1e-12) { feasible = false; break; }
                if (charge > 0 && discharge > 0) { feasible = false; break; }
                soc = dev::battery_step(soc, charge, discharge, c.battery, dt);
                if (soc < c.battery.capacity_lower - 1e-9 ||
                    soc > c.battery.capacity_upper + 1e-9) { feasible = false; break; }
                temp = dev::hvac_step(temp, c.series.outdoor_temp[ts],
                                      ac[static_cast<size_t>(i)][ts], c.hvac, dt);
                if (temp < c.hvac.temp_min[ts] - 1e-9 || temp > c.hvac.temp_max[ts] + 1e-9) {
                    feasible = false;
                    break;
                }
                double dev_t = temp - c.hvac.temp_pref;
                discomfort += c.hvac.discomfort_coeff * dev_t * dev_t;
                degradation += c.battery.degradation_coeff *
                               ((discharge * dt) * (discharge * dt) + (charge * dt) * (charge * dt));

                double demand = charge + c.series.inflexible_load[ts] +
                                ac[static_cast<size_t>(i)][ts] - buy -
                                b2b[static_cast<size_t>(i)][ts];
                double pv_left = c.series.pv_available[ts] - feed[static_cast<size_t>(i)][ts];
                double re_local = std::clamp(demand, 0.0, pv_left);
                double g = demand - re_local;
                if (g < -1e-9 || g > c.limits.grid_max + 1e-9) { feasible = false; break; }
                grid[ts] = std::max(0.0, g);

                cost += s.tariff.et_price[ts] * (buy - sell) * dt;
                cost -= s.tariff.b2g_price[ts] * b2g[static_cast<size_t>(i)][ts] * dt;
                cost -= s.tariff.feed_in_price[ts] * feed[static_cast<size_t>(i)][ts] * dt;
            }
            if (!feasible) break;
            cost += dev::grid_cost(s.tariff, grid, dt);
            cost += degradation;
            if (s.include_discomfort) cost += discomfort;
        }
        if (feasible) {
            ++res.evaluated;
            if (cost < res.objective) {
                res.objective = cost;
                res.found = true;
            }
        }
    }
    return res;
}

}  // namespace vstack::cent
