#include "vstack/subproblems.hpp"

#include <algorithm>
#include <cmath>

#include "vstack/devices.hpp"

namespace vstack::sub {

using EV = ExchangeVector;

CommunityLayout CommunityLayout::make(int H, bool tpt) {
    CommunityLayout lay;
    lay.H = H;
    lay.tpt = tpt;
    lay.b2g = 0;
    lay.ets = H;
    lay.etb = 2 * H;
    lay.grid = 3 * H;
    lay.feed = 4 * H;
    lay.re_local = 5 * H;
    lay.batc = 6 * H;
    lay.batd = 7 * H;
    lay.b2b = 8 * H;
    lay.ac = 9 * H;
    lay.t_in = 10 * H;
    lay.soc = 11 * H;
    lay.s_pv = 12 * H;
    lay.n = 13 * H;
    if (tpt) {
        lay.z_peak = lay.n;
        lay.s_peak = lay.n + 1;
        lay.n += 1 + H;
    }
    return lay;
}

/// Equality rows of one community block (battery / thermal recursions, power
/// balance, discharge split, PV availability, TPT peak epigraph), with column
/// and row offsets so the same code assembles both the standalone and the
/// centralized problems.
void append_community_rows_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                           int row_off, std::vector<Triplet>& trips, Vec& rhs) {
    const Community& c = s.communities[static_cast<size_t>(i)];
    const int H = lay.H;
    const double dt = s.dt();
    const double cr = c.hvac.thermal_capacitance * c.hvac.thermal_resistance;
    const double decay = 1.0 - 1.0 / cr;
    const double ac_gain = c.hvac.mode * dt / c.hvac.thermal_capacitance;

    int r = row_off;
    // stored energy recursion
    for (int t = 0; t < H; ++t, ++r) {
        trips.emplace_back(r, col_off + lay.soc + t, 1.0);
        if (t > 0)
            trips.emplace_back(r, col_off + lay.soc + t - 1, -1.0);
        else
            rhs[r] += c.battery.initial_energy;
        trips.emplace_back(r, col_off + lay.batc + t, -c.battery.eff_charge * dt);
        trips.emplace_back(r, col_off + lay.batd + t, dt / c.battery.eff_discharge);
    }
    // indoor temperature recursion
    for (int t = 0; t < H; ++t, ++r) {
        trips.emplace_back(r, col_off + lay.t_in + t, 1.0);
        if (t > 0)
            trips.emplace_back(r, col_off + lay.t_in + t - 1, -decay);
        else
            rhs[r] += decay * c.hvac.initial_indoor_temp;
        trips.emplace_back(r, col_off + lay.ac + t, ac_gain);
        rhs[r] += c.series.outdoor_temp[static_cast<size_t>(t)] / cr;
    }
    // power balance: grid + re_local + etb + b2b - batc - ac = load
    for (int t = 0; t < H; ++t, ++r) {
        trips.emplace_back(r, col_off + lay.grid + t, 1.0);
        trips.emplace_back(r, col_off + lay.re_local + t, 1.0);
        trips.emplace_back(r, col_off + lay.etb + t, 1.0);
        trips.emplace_back(r, col_off + lay.b2b + t, 1.0);
        trips.emplace_back(r, col_off + lay.batc + t, -1.0);
        trips.emplace_back(r, col_off + lay.ac + t, -1.0);
        rhs[r] += c.series.inflexible_load[static_cast<size_t>(t)];
    }
    // discharge split: batd = b2b + b2g + ets
    for (int t = 0; t < H; ++t, ++r) {
        trips.emplace_back(r, col_off + lay.batd + t, 1.0);
        trips.emplace_back(r, col_off + lay.b2b + t, -1.0);
        trips.emplace_back(r, col_off + lay.b2g + t, -1.0);
        trips.emplace_back(r, col_off + lay.ets + t, -1.0);
    }
    // PV availability: re_local + feed + slack = pv
    for (int t = 0; t < H; ++t, ++r) {
        trips.emplace_back(r, col_off + lay.re_local + t, 1.0);
        trips.emplace_back(r, col_off + lay.feed + t, 1.0);
        trips.emplace_back(r, col_off + lay.s_pv + t, 1.0);
        rhs[r] += c.series.pv_available[static_cast<size_t>(t)];
    }
    // peak epigraph (TPT): grid_t - z + slack_t = 0
    if (lay.tpt) {
        for (int t = 0; t < H; ++t, ++r) {
            trips.emplace_back(r, col_off + lay.grid + t, 1.0);
            trips.emplace_back(r, col_off + lay.z_peak, -1.0);
            trips.emplace_back(r, col_off + lay.s_peak + t, 1.0);
        }
    }
}

int community_row_count(const CommunityLayout& lay) { return (lay.tpt ? 6 : 5) * lay.H; }

/// Relaxed variable boxes for one community block (exclusivity pairs opened
/// into simultaneous boxes; disabled streams pinned to zero).
void fill_community_bounds_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                           Vec& l, Vec& u) {
    const Community& c = s.communities[static_cast<size_t>(i)];
    const int H = lay.H;
    for (int t = 0; t < H; ++t) {
        const auto ts = static_cast<size_t>(t);
        l[col_off + lay.b2g + t] = 0.0;
        u[col_off + lay.b2g + t] = s.flags.enable_b2g ? c.limits.b2g_max[ts] : 0.0;
        l[col_off + lay.ets + t] = 0.0;
        u[col_off + lay.ets + t] = s.flags.enable_et ? c.limits.et_sell_max : 0.0;
        l[col_off + lay.etb + t] = 0.0;
        u[col_off + lay.etb + t] = s.flags.enable_et ? c.limits.et_buy_max : 0.0;
        l[col_off + lay.grid + t] = 0.0;
        u[col_off + lay.grid + t] = c.limits.grid_max;
        l[col_off + lay.feed + t] = 0.0;
        u[col_off + lay.feed + t] = kInf;
        l[col_off + lay.re_local + t] = 0.0;
        u[col_off + lay.re_local + t] = kInf;
        l[col_off + lay.batc + t] = 0.0;
        u[col_off + lay.batc + t] = c.battery.charge_max;
        l[col_off + lay.batd + t] = 0.0;
        u[col_off + lay.batd + t] = c.battery.discharge_max;
        l[col_off + lay.b2b + t] = 0.0;
        u[col_off + lay.b2b + t] = s.flags.enable_b2b ? c.limits.b2b_max[ts] : 0.0;
        l[col_off + lay.ac + t] = c.hvac.power_min[ts];
        u[col_off + lay.ac + t] = c.hvac.power_max[ts];
        l[col_off + lay.t_in + t] = c.hvac.temp_min[ts];
        u[col_off + lay.t_in + t] = c.hvac.temp_max[ts];
        l[col_off + lay.soc + t] = c.battery.capacity_lower;
        u[col_off + lay.soc + t] = c.battery.capacity_upper;
        l[col_off + lay.s_pv + t] = 0.0;
        u[col_off + lay.s_pv + t] = kInf;
    }
    if (lay.tpt) {
        l[col_off + lay.z_peak] = 0.0;
        u[col_off + lay.z_peak] = kInf;
        for (int t = 0; t < H; ++t) {
            l[col_off + lay.s_peak + t] = 0.0;
            u[col_off + lay.s_peak + t] = kInf;
        }
    }
}

/// Pins the direction pairs of one community block to a fixed pattern.
void apply_pattern_bounds_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                          const DirectionPattern& pat, Vec& l, Vec& u) {
    const Community& c = s.communities[static_cast<size_t>(i)];
    for (int t = 0; t < lay.H; ++t) {
        const auto ts = static_cast<size_t>(t);
        if (pat.x[ts])
            u[col_off + lay.batc + t] = 0.0;
        else
            u[col_off + lay.batd + t] = 0.0;
        if (pat.y[ts])
            u[col_off + lay.etb + t] = 0.0;
        else
            u[col_off + lay.ets + t] = 0.0;
    }
}

/// Standalone cost terms of one community block in (P-diagonal, c, constant)
/// form. The exchange-coupling terms are layered on top by the callers.
void fill_community_objective_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                              Vec& p_diag, Vec& c_lin, double& constant) {
    const Community& c = s.communities[static_cast<size_t>(i)];
    const int H = lay.H;
    const double dt = s.dt();
    const double deg = 2.0 * c.battery.degradation_coeff * dt * dt;
    for (int t = 0; t < H; ++t) {
        p_diag[col_off + lay.batc + t] += deg;
        p_diag[col_off + lay.batd + t] += deg;
        c_lin[col_off + lay.grid + t] += s.tariff.energy_price(t) * dt;
        c_lin[col_off + lay.etb + t] += s.tariff.et_price[static_cast<size_t>(t)] * dt;
        c_lin[col_off + lay.ets + t] -= s.tariff.et_price[static_cast<size_t>(t)] * dt;
        c_lin[col_off + lay.b2g + t] -= s.tariff.b2g_price[static_cast<size_t>(t)] * dt;
        c_lin[col_off + lay.feed + t] -= s.tariff.feed_in_price[static_cast<size_t>(t)] * dt;
    }
    if (s.include_discomfort && c.hvac.discomfort_coeff > 0) {
        const double beta = c.hvac.discomfort_coeff;
        for (int t = 0; t < H; ++t) {
            p_diag[col_off + lay.t_in + t] += 2.0 * beta;
            c_lin[col_off + lay.t_in + t] -= 2.0 * beta * c.hvac.temp_pref;
        }
        constant += beta * c.hvac.temp_pref * c.hvac.temp_pref * H;
    }
    if (lay.tpt) c_lin[col_off + lay.z_peak] += s.tariff.tpt_peak_price;
}

void fill_community_names_for(const CommunityLayout& lay, int col_off, const std::string& prefix,
                          std::vector<std::string>& names) {
    auto block = [&](int off, const char* tag) {
        for (int t = 0; t < lay.H; ++t)
            names[static_cast<size_t>(col_off + off + t)] =
                prefix + tag + "[" + std::to_string(t) + "]";
    };
    block(lay.b2g, "b2g");
    block(lay.ets, "ets");
    block(lay.etb, "etb");
    block(lay.grid, "grid");
    block(lay.feed, "feed");
    block(lay.re_local, "re_local");
    block(lay.batc, "batc");
    block(lay.batd, "batd");
    block(lay.b2b, "b2b");
    block(lay.ac, "ac");
    block(lay.t_in, "t_in");
    block(lay.soc, "soc");
    block(lay.s_pv, "s_pv");
    if (lay.tpt) {
        names[static_cast<size_t>(col_off + lay.z_peak)] = prefix + "z_peak";
        block(lay.s_peak, "s_peak");
    }
}

qp::QuadraticProgram build_community_qp(const Scenario& s, int i, const Vec& duals,
                                        const Vec& aux, double rho,
                                        const std::optional<DirectionPattern>& pattern) {
    const int H = s.H();
    if (duals.size() != 5 * H || aux.size() != 5 * H)
        throw InputError("community_qp", "dual/aux vectors must have length 5H");
    const bool tpt = s.tariff.kind == TariffKind::TPT;
    CommunityLayout lay = CommunityLayout::make(H, tpt);

    qp::QuadraticProgram prob;
    prob.n = lay.n;
    prob.m = community_row_count(lay);
    prob.b = Vec::Zero(prob.m);
    std::vector<Triplet> a_trips;
    append_community_rows_for(s, i, lay, 0, 0, a_trips, prob.b);
    prob.A = SpMat(prob.m, prob.n);
    prob.A.setFromTriplets(a_trips.begin(), a_trips.end());

    prob.l = Vec::Zero(prob.n);
    prob.u = Vec::Zero(prob.n);
    fill_community_bounds_for(s, i, lay, 0, prob.l, prob.u);
    if (pattern) apply_pattern_bounds_for(s, i, lay, 0, *pattern, prob.l, prob.u);

    Vec p_diag = Vec::Zero(prob.n);
    prob.c = Vec::Zero(prob.n);
    prob.objective_constant = 0.0;
    fill_community_objective_for(s, i, lay, 0, p_diag, prob.c, prob.objective_constant);
    // dual and proximal coupling on the exchange blocks
    for (int k = 0; k < 5 * H; ++k) {
        p_diag[k] += rho;
        prob.c[k] += -duals[k] - rho * aux[k];
    }
    prob.objective_constant += 0.5 * rho * aux.squaredNorm();

    std::vector<Triplet> p_trips;
    for (int j = 0; j < prob.n; ++j)
        if (p_diag[j] != 0.0) p_trips.emplace_back(j, j, p_diag[j]);
    prob.P = SpMat(prob.n, prob.n);
    prob.P.setFromTriplets(p_trips.begin(), p_trips.end());

    prob.var_names.assign(static_cast<size_t>(prob.n), {});
    fill_community_names_for(lay, 0, "c" + std::to_string(i) + ".", prob.var_names);
    return prob;
}

DirectionPattern fix_pattern(const CommunityLayout& lay, const Vec& x, int col_off) {
    DirectionPattern pat = DirectionPattern::zeros(lay.H);
    for (int t = 0; t < lay.H; ++t) {
        // strict comparisons: ties keep charge-allowed / buy-allowed
        pat.x[static_cast<size_t>(t)] =
            x[col_off + lay.batd + t] > x[col_off + lay.batc + t] ? 1 : 0;
        pat.y[static_cast<size_t>(t)] =
            x[col_off + lay.ets + t] > x[col_off + lay.etb + t] ? 1 : 0;
    }
    return pat;
}

CommunityDecision extract_decision(const Scenario& s, int i, const CommunityLayout& lay,
                                   const Vec& x, int col_off) {
    const int H = lay.H;
    CommunityDecision d;
    d.exchange = ExchangeVector(H);
    for (int k = 0; k < 5 * H; ++k) d.exchange.flat[k] = std::max(0.0, x[col_off + k]);
    auto series = [&](int off, bool clamp) {
        std::vector<double> v(static_cast<size_t>(H));
        for (int t = 0; t < H; ++t) {
            double val = x[col_off + off + t];
            v[static_cast<size_t>(t)] = clamp ? std::max(0.0, val) : val;
        }
        return v;
    };
    d.p_re_local = series(lay.re_local, true);
    d.p_batc = series(lay.batc, true);
    d.p_batd = series(lay.batd, true);
    d.p_b2b = series(lay.b2b, true);
    d.p_ac = series(lay.ac, false);
    d.t_in = series(lay.t_in, false);
    d.b_bats = series(lay.soc, false);
    d.pattern = fix_pattern(lay, x, col_off);
    d.objective_value = dev::community_cost(s, i, d);
    return d;
}

CommunitySolver::CommunitySolver(const Scenario& s, int i, double rho,
                                 const qp::SolveOptions& opts)
    : s_(s), i_(i), rho_(rho), opts_(opts) {
    qp::QuadraticProgram prob = build_community_qp(s, i, Vec::Zero(5 * s.H()),
                                                   Vec::Zero(5 * s.H()), rho, std::nullopt);
    lay_ = CommunityLayout::make(s.H(), s.tariff.kind == TariffKind::TPT);
    relaxed_l_ = prob.l;
    relaxed_u_ = prob.u;
    rhs_ = prob.b;
    solver_.emplace(std::move(prob), opts);
}

void CommunitySolver::apply_pattern(Vec& l, Vec& u, const DirectionPattern& pat) const {
    apply_pattern_bounds_for(s_, i_, lay_, 0, pat, l, u);
}

CommunityDecision CommunitySolver::solve(const Vec& duals, const Vec& aux) {
    const int H = lay_.H;
    Vec c_lin = Vec::Zero(lay_.n);
    Vec p_unused = Vec::Zero(lay_.n);
    double constant = 0.0;
    fill_community_objective_for(s_, i_, lay_, 0, p_unused, c_lin, constant);
    for (int k = 0; k < 5 * H; ++k) c_lin[k] += -duals[k] - rho_ * aux[k];
    constant += 0.5 * rho_ * aux.squaredNorm();
    solver_->update_cost(c_lin, constant);

    // Direction handling in rounds, mirroring the whole-system benchmark:
    // pin the pairs the relaxation uses one-sidedly, re-solve, and settle
    // genuinely two-sided pairs one at a time by trying both pins.
    const double kPinTol = 1e-4;  // kW
    std::vector<int> x_state(static_cast<size_t>(H), -1);
    std::vector<int> y_state(static_cast<size_t>(H), -1);

    Vec l, u;
    auto bounds_for_states = [&] {
        l = relaxed_l_;
        u = relaxed_u_;
        for (int t = 0; t < H; ++t) {
            if (x_state[static_cast<size_t>(t)] == 0) u[lay_.batd + t] = 0.0;
            if (x_state[static_cast<size_t>(t)] == 1) u[lay_.batc + t] = 0.0;
            if (y_state[static_cast<size_t>(t)] == 0) u[lay_.ets + t] = 0.0;
            if (y_state[static_cast<size_t>(t)] == 1) u[lay_.etb + t] = 0.0;
        }
    };
    qp::QpSolution sol;
    bool exploring = true;
    auto resolve = [&] {
        bounds_for_states();
        solver_->update_bounds(rhs_, l, u);
        sol = solver_->solve();
        if (sol.status == qp::SolveStatus::Infeasible ||
            (!exploring && sol.status != qp::SolveStatus::Optimal))
            throw SolveError("community " + std::to_string(i_) + ": sub-problem " +
                             qp::to_string(sol.status));
    };

    solver_->set_tolerances(1e-4, 1e-4, false, 4000);
    resolve();
    while (true) {
        struct Pair {
            int t;
            bool is_x;
            double overlap;
        };
        std::vector<Pair> ambiguous;
        int pinned = 0;
        for (int t = 0; t < H; ++t) {
            auto classify = [&](double off_side, double on_side, std::vector<int>& state,
                                bool is_x) {
                if (state[static_cast<size_t>(t)] >= 0) return;
                double lo = std::min(off_side, on_side);
                double hi = std::max(off_side, on_side);
                if (lo <= kPinTol && hi > kPinTol) {
                    state[static_cast<size_t>(t)] = on_side > off_side ? 1 : 0;
                    ++pinned;
                } else if (lo > kPinTol) {
                    ambiguous.push_back({t, is_x, lo});
                }
            };
            classify(sol.x[lay_.batc + t], sol.x[lay_.batd + t], x_state, true);
            classify(sol.x[lay_.etb + t], sol.x[lay_.ets + t], y_state, false);
        }
        if (pinned > 0) {
            resolve();
            continue;
        }
        if (ambiguous.empty()) break;
        std::stable_sort(ambiguous.begin(), ambiguous.end(),
                         [](const Pair& a, const Pair& b) { return a.overlap > b.overlap; });
        const Pair& p = ambiguous.front();
        auto& state = p.is_x ? x_state : y_state;
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
        if (!(best_obj < kInf))
            throw SolveError("community " + std::to_string(i_) + ": sub-problem infeasible");
        state[static_cast<size_t>(p.t)] = best_dir;
        sol = best_sol;
    }

    for (int t = 0; t < H; ++t) {
        if (x_state[static_cast<size_t>(t)] < 0) x_state[static_cast<size_t>(t)] = 0;
        if (y_state[static_cast<size_t>(t)] < 0) y_state[static_cast<size_t>(t)] = 0;
    }
    exploring = false;
    solver_->set_tolerances(std::min(opts_.eps_abs, 1e-7), std::min(opts_.eps_rel, 1e-7),
                            opts_.polish, opts_.max_iter);
    resolve();

    CommunityDecision d = extract_decision(s_, i_, lay_, sol.x);
    for (int t = 0; t < H; ++t) {
        d.pattern.x[static_cast<size_t>(t)] = x_state[static_cast<size_t>(t)];
        d.pattern.y[static_cast<size_t>(t)] = y_state[static_cast<size_t>(t)];
    }
    return d;
}

CommunityDecision solve_community(const Scenario& s, int i, const Vec& duals, const Vec& aux,
                                  double rho, const qp::SolveOptions& opts) {
    CommunitySolver solver(s, i, rho, opts);
    return solver.solve(duals, aux);
}

// ---------------------------------------------------------------------------
// Operator sub-problem

namespace {

struct OperatorStructure {
    net::LinearConstraintBlock block;
    int aux_cols = 0;  // I * 5H exchange copies ahead of the network columns
    int net_off = 0;
    int total_rows = 0;
    Vec rhs;
    Vec l, u;
    std::vector<Triplet> a_trips;
};

OperatorStructure build_operator_structure(const Scenario& s) {
    const int H = s.H();
    const int I = s.community_count();
    OperatorStructure os;
    os.block = net::network_constraints(s.feeder, H);
    os.aux_cols = I * 5 * H;
    os.net_off = os.aux_cols;
    const int n = os.aux_cols + os.block.n_cols;

    // Rows: network recursions, then injection links (one per occupied
    // node-slot), then the per-slot market balance.
    std::vector<char> occupied(static_cast<size_t>(s.feeder.node_count), 0);
    for (const auto& c : s.communities) occupied[static_cast<size_t>(c.node_id)] = 1;
    int link_rows = 0;
    for (int node = 1; node < s.feeder.node_count; ++node)
        if (occupied[static_cast<size_t>(node)]) link_rows += H;
    os.total_rows = os.block.row_count() + link_rows + H;

    os.rhs = Vec::Zero(os.total_rows);
    os.rhs.head(os.block.row_count()) = os.block.rhs;
    os.a_trips = os.block.rows;
    for (auto& tr : os.a_trips)
        tr = Triplet(tr.row(), os.net_off + tr.col(), tr.value());

    os.l = Vec::Constant(n, -kInf);
    os.u = Vec::Constant(n, kInf);
    os.l.tail(os.block.n_cols) = os.block.col_lower;
    os.u.tail(os.block.n_cols) = os.block.col_upper;

    // Pin injections: reactive to the exogenous reactive load everywhere,
    // active to zero at nodes with no community (occupied nodes get link rows).
    Vec qload = Vec::Zero(static_cast<Eigen::Index>(s.feeder.node_count) * H);
    for (const auto& c : s.communities)
        for (int t = 0; t < H; ++t)
            qload[c.node_id * H + t] += c.series.reactive_load[static_cast<size_t>(t)];
    for (int node = 1; node < s.feeder.node_count; ++node)
        for (int t = 0; t < H; ++t) {
            int cq = os.net_off + os.block.col_inj_q(node, t);
            double v = qload[node * H + t] / s.feeder.s_base_kva;
            os.l[cq] = v;
            os.u[cq] = v;
            if (!occupied[static_cast<size_t>(node)]) {
                int cp = os.net_off + os.block.col_inj_p(node, t);
                os.l[cp] = 0.0;
                os.u[cp] = 0.0;
            }
        }

    int r = os.block.row_count();
    const double inv_base = 1.0 / s.feeder.s_base_kva;
    for (int node = 1; node < s.feeder.node_count; ++node) {
        if (!occupied[static_cast<size_t>(node)]) continue;
        for (int t = 0; t < H; ++t, ++r) {
            os.a_trips.emplace_back(r, os.net_off + os.block.col_inj_p(node, t), 1.0);
            for (int i = 0; i < I; ++i) {
                if (s.communities[static_cast<size_t>(i)].node_id != node) continue;
                const int base = i * 5 * H;
                os.a_trips.emplace_back(r, base + EV::GRID * H + t, -inv_base);
                os.a_trips.emplace_back(r, base + EV::ETB * H + t, -inv_base);
                os.a_trips.emplace_back(r, base + EV::ETS * H + t, inv_base);
                os.a_trips.emplace_back(r, base + EV::B2G * H + t, inv_base);
                os.a_trips.emplace_back(r, base + EV::FEED * H + t, inv_base);
            }
        }
    }
    // market balance: sum_i (ets - etb) = 0 per slot
    for (int t = 0; t < H; ++t, ++r) {
        for (int i = 0; i < I; ++i) {
            const int base = i * 5 * H;
            os.a_trips.emplace_back(r, base + EV::ETS * H + t, 1.0);
            os.a_trips.emplace_back(r, base + EV::ETB * H + t, -1.0);
        }
    }
    return os;
}

qp::QuadraticProgram assemble_operator_qp(const Scenario& s, const OperatorStructure& os,
                                          const std::vector<Vec>& duals,
                                          const std::vector<Vec>& exchanges, double rho) {
    const int H = s.H();
    const int I = s.community_count();
    if (static_cast<int>(duals.size()) != I || static_cast<int>(exchanges.size()) != I)
        throw InputError("operator_qp", "expected one dual and one exchange vector per community");

    qp::QuadraticProgram prob;
    prob.n = os.aux_cols + os.block.n_cols;
    prob.m = os.total_rows;
    prob.A = SpMat(prob.m, prob.n);
    prob.A.setFromTriplets(os.a_trips.begin(), os.a_trips.end());
    prob.b = os.rhs;
    prob.l = os.l;
    prob.u = os.u;

    prob.c = Vec::Zero(prob.n);
    prob.objective_constant = 0.0;
    std::vector<Triplet> p_trips;
    for (int i = 0; i < I; ++i) {
        if (duals[static_cast<size_t>(i)].size() != 5 * H ||
            exchanges[static_cast<size_t>(i)].size() != 5 * H)
            throw InputError("operator_qp", "dual/exchange vectors must have length 5H");
        const int base = i * 5 * H;
        for (int k = 0; k < 5 * H; ++k) {
            p_trips.emplace_back(base + k, base + k, rho);
            prob.c[base + k] =
                duals[static_cast<size_t>(i)][k] - rho * exchanges[static_cast<size_t>(i)][k];
        }
        prob.objective_constant += 0.5 * rho * exchanges[static_cast<size_t>(i)].squaredNorm();
    }
    prob.P = SpMat(prob.n, prob.n);
    prob.P.setFromTriplets(p_trips.begin(), p_trips.end());
    return prob;
}

}  // namespace

qp::QuadraticProgram build_operator_qp(const Scenario& s, const std::vector<Vec>& duals,
                                       const std::vector<Vec>& exchanges, double rho) {
    OperatorStructure os = build_operator_structure(s);
    return assemble_operator_qp(s, os, duals, exchanges, rho);
}

OperatorSolver::OperatorSolver(const Scenario& s, double rho, const qp::SolveOptions& opts)
    : s_(s), rho_(rho) {
    aux_len_ = 5 * s.H();
    OperatorStructure os = build_operator_structure(s);
    block_ = os.block;
    std::vector<Vec> zero(static_cast<size_t>(s.community_count()), Vec::Zero(aux_len_));
    solver_.emplace(assemble_operator_qp(s, os, zero, zero, rho), opts);
}

std::vector<Vec> OperatorSolver::solve(const std::vector<Vec>& duals,
                                       const std::vector<Vec>& exchanges) {
    const int I = s_.community_count();
    const int H = s_.H();
    Vec c = Vec::Zero(solver_->problem().n);
    double constant = 0.0;
    for (int i = 0; i < I; ++i) {
        const int base = i * aux_len_;
        for (int k = 0; k < aux_len_; ++k)
            c[base + k] =
                duals[static_cast<size_t>(i)][k] - rho_ * exchanges[static_cast<size_t>(i)][k];
        constant += 0.5 * rho_ * exchanges[static_cast<size_t>(i)].squaredNorm();
    }
    solver_->update_cost(c, constant);
    qp::QpSolution sol = solver_->solve();
    if (sol.status != qp::SolveStatus::Optimal)
        throw SolveError(std::string("operator sub-problem ") + qp::to_string(sol.status));

    std::vector<Vec> aux(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i)
        aux[static_cast<size_t>(i)] = sol.x.segment(i * aux_len_, aux_len_);

    const int net_off = I * aux_len_;
    state_.branch_active = Eigen::MatrixXd::Zero(block_.branch_count, H);
    state_.branch_reactive = Eigen::MatrixXd::Zero(block_.branch_count, H);
    state_.node_voltage = Eigen::MatrixXd::Constant(block_.node_count, H, s_.feeder.v_ref);
    for (int b = 0; b < block_.branch_count; ++b)
        for (int t = 0; t < H; ++t) {
            state_.branch_active(b, t) = sol.x[net_off + block_.col_p(b, t)];
            state_.branch_reactive(b, t) = sol.x[net_off + block_.col_q(b, t)];
        }
    for (int node = 1; node < block_.node_count; ++node)
        for (int t = 0; t < H; ++t)
            state_.node_voltage(node, t) = sol.x[net_off + block_.col_v(node, t)];
    return aux;
}

Vec dual_update(const Vec& duals, const Vec& aux, const Vec& exchange, double rho) {
    if (duals.size() != aux.size() || duals.size() != exchange.size())
        throw InputError("dual_update", "dimension mismatch");
    return duals + rho * (aux - exchange);
}

}  // namespace vstack::sub
