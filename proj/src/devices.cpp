#include "vstack/devices.hpp"

#include <algorithm>
#include <cmath>

namespace vstack::dev {

double battery_step(double b_prev, double p_c, double p_d, const BatteryParams& p, double dt) {
    return b_prev + p.eff_charge * p_c * dt - p_d * dt / p.eff_discharge;
}

double hvac_step(double t_prev, double t_out, double p_ac, const HvacParams& p, double dt) {
    return t_prev - (t_prev - t_out + p.mode * p.thermal_resistance * p_ac * dt) /
                        (p.thermal_capacitance * p.thermal_resistance);
}

double degradation_cost(std::span<const double> p_c, std::span<const double> p_d,
                        double degradation_coeff, double dt) {
    double sum = 0.0;
    for (size_t t = 0; t < p_c.size(); ++t) {
        double c = p_c[t] * dt;
        double d = p_d[t] * dt;
        sum += d * d + c * c;
    }
    return degradation_coeff * sum;
}

double discomfort_cost(std::span<const double> t_in, double t_pref, double discomfort_coeff) {
    double sum = 0.0;
    for (double v : t_in) {
        double dev = v - t_pref;
        sum += dev * dev;
    }
    return discomfort_coeff * sum;
}

double grid_cost(const Tariff& tariff, std::span<const double> p_grid, double dt) {
    if (tariff.kind == TariffKind::TPT) {
        double energy = 0.0;
        double peak = 0.0;
        for (double v : p_grid) {
            energy += v * dt;
            peak = std::max(peak, v);
        }
        return tariff.tpt_energy_price * energy + tariff.tpt_peak_price * peak;
    }
    double cost = 0.0;
    for (size_t t = 0; t < p_grid.size(); ++t)
        cost += tariff.tou_energy_price[t] * p_grid[t] * dt;
    return cost;
}

Revenue revenue_terms(std::span<const double> p_re_feed, std::span<const double> p_b2g,
                      std::span<const double> p_ets, std::span<const double> p_etb,
                      const Tariff& tariff, double dt) {
    Revenue r;
    for (size_t t = 0; t < p_re_feed.size(); ++t) {
        r.pv_feed += tariff.feed_in_price[t] * p_re_feed[t] * dt;
        r.b2g += tariff.b2g_price[t] * p_b2g[t] * dt;
        r.et_net_cost += tariff.et_price[t] * (p_etb[t] - p_ets[t]) * dt;
    }
    return r;
}

namespace {

void check_box(std::vector<Violation>& out, const std::string& name, double v, double lo,
               double hi, double tol) {
    if (v < lo - tol) out.push_back({name, lo - v});
    if (v > hi + tol) out.push_back({name, v - hi});
}

std::string slot_name(const std::string& base, int t) {
    return base + "[t=" + std::to_string(t) + "]";
}

}  // namespace

std::vector<Violation> check_community_feasibility(const Scenario& s, int i,
                                                   const CommunityDecision& d, double tol) {
    std::vector<Violation> out;
    const int H = s.H();
    const double dt = s.dt();
    const Community& c = s.communities[static_cast<size_t>(i)];
    const std::string base = "community[" + std::to_string(i) + "].";

    auto size_ok = [&](const std::vector<double>& v) { return static_cast<int>(v.size()) == H; };
    if (!size_ok(d.p_re_local) || !size_ok(d.p_batc) || !size_ok(d.p_batd) || !size_ok(d.p_b2b) ||
        !size_ok(d.p_ac) || !size_ok(d.t_in) || !size_ok(d.b_bats) || d.exchange.H != H)
        throw InputError(base, "decision dimensions do not match the scenario horizon");

    using EV = ExchangeVector;
    double b_prev = c.battery.initial_energy;
    double t_prev = c.hvac.initial_indoor_temp;
    for (int t = 0; t < H; ++t) {
        const auto ts = static_cast<size_t>(t);
        const double grid = d.exchange.at(EV::GRID, t);
        const double etb = d.exchange.at(EV::ETB, t);
        const double ets = d.exchange.at(EV::ETS, t);
        const double b2g = d.exchange.at(EV::B2G, t);
        const double feed = d.exchange.at(EV::FEED, t);

        // storage and thermal recursions
        double b_expect = battery_step(b_prev, d.p_batc[ts], d.p_batd[ts], c.battery, dt);
        if (std::abs(d.b_bats[ts] - b_expect) > tol)
            out.push_back({slot_name(base + "battery_recursion", t),
                           std::abs(d.b_bats[ts] - b_expect)});
        b_prev = d.b_bats[ts];
        double t_expect =
            hvac_step(t_prev, c.series.outdoor_temp[ts], d.p_ac[ts], c.hvac, dt);
        if (std::abs(d.t_in[ts] - t_expect) > tol)
            out.push_back({slot_name(base + "hvac_recursion", t), std::abs(d.t_in[ts] - t_expect)});
        t_prev = d.t_in[ts];

        check_box(out, slot_name(base + "soc_bounds", t), d.b_bats[ts], c.battery.capacity_lower,
                  c.battery.capacity_upper, tol);
        check_box(out, slot_name(base + "charge_bound", t), d.p_batc[ts], 0.0,
                  c.battery.charge_max, tol);
        check_box(out, slot_name(base + "discharge_bound", t), d.p_batd[ts], 0.0,
                  c.battery.discharge_max, tol);
        check_box(out, slot_name(base + "ac_bounds", t), d.p_ac[ts], c.hvac.power_min[ts],
                  c.hvac.power_max[ts], tol);
        check_box(out, slot_name(base + "temp_bounds", t), d.t_in[ts], c.hvac.temp_min[ts],
                  c.hvac.temp_max[ts], tol);
        check_box(out, slot_name(base + "grid_bound", t), grid, 0.0, c.limits.grid_max, tol);
        check_box(out, slot_name(base + "b2b_bound", t), d.p_b2b[ts], 0.0,
                  s.flags.enable_b2b ? c.limits.b2b_max[ts] : 0.0, tol);
        check_box(out, slot_name(base + "b2g_bound", t), b2g, 0.0,
                  s.flags.enable_b2g ? c.limits.b2g_max[ts] : 0.0, tol);
        check_box(out, slot_name(base + "ets_bound", t), ets, 0.0,
                  s.flags.enable_et ? c.limits.et_sell_max : 0.0, tol);
        check_box(out, slot_name(base + "etb_bound", t), etb, 0.0,
                  s.flags.enable_et ? c.limits.et_buy_max : 0.0, tol);

        // PV availability split
        if (d.p_re_local[ts] < -tol)
            out.push_back({slot_name(base + "pv_split", t), -d.p_re_local[ts]});
        if (feed < -tol) out.push_back({slot_name(base + "pv_split", t), -feed});
        double pv_used = d.p_re_local[ts] + feed;
        if (pv_used > c.series.pv_available[ts] + tol)
            out.push_back({slot_name(base + "pv_split", t), pv_used - c.series.pv_available[ts]});

        // power balance: supply = demand
        double balance = grid + d.p_re_local[ts] + etb + d.p_b2b[ts] -
                         (d.p_batc[ts] + c.series.inflexible_load[ts] + d.p_ac[ts]);
        if (std::abs(balance) > tol)
            out.push_back({slot_name(base + "power_balance", t), std::abs(balance)});

        // discharge split
        double split = d.p_batd[ts] - (d.p_b2b[ts] + b2g + ets);
        if (std::abs(split) > tol)
            out.push_back({slot_name(base + "discharge_split", t), std::abs(split)});

        // exclusivity of the direction pairs: a pair violates when both sides
        // are simultaneously active beyond tol
        double cd = std::min(d.p_batc[ts], d.p_batd[ts]);
        if (cd > tol) out.push_back({slot_name(base + "complementarity_charge_discharge", t), cd});
        double tr = std::min(ets, etb);
        if (tr > tol) out.push_back({slot_name(base + "complementarity_trade", t), tr});
    }
    return out;
}

std::vector<Violation> check_feasibility(const Scenario& s, const GlobalSolution& g, double tol) {
    std::vector<Violation> out;
    const int H = s.H();
    const int I = s.community_count();
    if (static_cast<int>(g.communities.size()) != I)
        throw InputError("solution", "community count mismatch");

    for (int i = 0; i < I; ++i) {
        auto local = check_community_feasibility(s, i, g.communities[static_cast<size_t>(i)], tol);
        out.insert(out.end(), local.begin(), local.end());
    }

    using EV = ExchangeVector;
    for (int t = 0; t < H; ++t) {
        double imbalance = 0.0;
        for (int i = 0; i < I; ++i) {
            const auto& ex = g.communities[static_cast<size_t>(i)].exchange;
            imbalance += ex.at(EV::ETS, t) - ex.at(EV::ETB, t);
        }
        if (std::abs(imbalance) > tol)
            out.push_back({slot_name("market_balance", t), std::abs(imbalance)});
    }

    // Network side: rebuild injections from the community exchanges and check
    // the provided state for recursion consistency and box feasibility.
    const auto& f = s.feeder;
    const int nb = f.branch_count();
    if (g.network.branch_active.rows() != nb || g.network.node_voltage.rows() != f.node_count ||
        g.network.branch_active.cols() != H)
        throw InputError("solution.network", "network state dimensions mismatch");

    net::NodeInjection inj;
    inj.active = Eigen::MatrixXd::Zero(f.node_count, H);
    inj.reactive = Eigen::MatrixXd::Zero(f.node_count, H);
    for (int i = 0; i < I; ++i) {
        const auto& ex = g.communities[static_cast<size_t>(i)].exchange;
        const auto& c = s.communities[static_cast<size_t>(i)];
        for (int t = 0; t < H; ++t) {
            inj.active(c.node_id, t) += ex.at(EV::GRID, t) + ex.at(EV::ETB, t) -
                                        ex.at(EV::ETS, t) - ex.at(EV::B2G, t) - ex.at(EV::FEED, t);
            inj.reactive(c.node_id, t) += c.series.reactive_load[static_cast<size_t>(t)];
        }
    }
    net::NetworkState expect = net::solve_flow(f, inj);
    for (int b = 0; b < nb; ++b)
        for (int t = 0; t < H; ++t) {
            double dp = std::abs(g.network.branch_active(b, t) - expect.branch_active(b, t));
            if (dp > tol)
                out.push_back({"network_flow_recursion[b=" + std::to_string(b) +
                                   ",t=" + std::to_string(t) + "]",
                               dp});
            double dq = std::abs(g.network.branch_reactive(b, t) - expect.branch_reactive(b, t));
            if (dq > tol)
                out.push_back({"network_q_recursion[b=" + std::to_string(b) +
                                   ",t=" + std::to_string(t) + "]",
                               dq});
            const auto& br = f.branches[static_cast<size_t>(b)];
            check_box(out,
                      "network_p_box[b=" + std::to_string(b) + ",t=" + std::to_string(t) + "]",
                      g.network.branch_active(b, t), br.p_min_pu, br.p_max_pu, tol);
            check_box(out,
                      "network_q_box[b=" + std::to_string(b) + ",t=" + std::to_string(t) + "]",
                      g.network.branch_reactive(b, t), br.q_min_pu, br.q_max_pu, tol);
        }
    for (int node = 1; node < f.node_count; ++node)
        for (int t = 0; t < H; ++t) {
            double dv = std::abs(g.network.node_voltage(node, t) - expect.node_voltage(node, t));
            if (dv > tol)
                out.push_back({"network_v_recursion[n=" + std::to_string(node) +
                                   ",t=" + std::to_string(t) + "]",
                               dv});
            check_box(out,
                      "network_v_box[n=" + std::to_string(node) + ",t=" + std::to_string(t) + "]",
                      g.network.node_voltage(node, t), f.v_min, f.v_max, tol);
        }
    return out;
}

double community_cost(const Scenario& s, int i, const CommunityDecision& d) {
    const Community& c = s.communities[static_cast<size_t>(i)];
    const double dt = s.dt();
    using EV = ExchangeVector;
    const Vec& flat = d.exchange.flat;
    const int H = s.H();
    std::span<const double> grid(flat.data() + EV::GRID * H, static_cast<size_t>(H));
    std::span<const double> feed(flat.data() + EV::FEED * H, static_cast<size_t>(H));
    std::span<const double> b2g(flat.data() + EV::B2G * H, static_cast<size_t>(H));
    std::span<const double> ets(flat.data() + EV::ETS * H, static_cast<size_t>(H));
    std::span<const double> etb(flat.data() + EV::ETB * H, static_cast<size_t>(H));

    double cost = grid_cost(s.tariff, grid, dt);
    cost += degradation_cost(d.p_batc, d.p_batd, c.battery.degradation_coeff, dt);
    Revenue r = revenue_terms(feed, b2g, ets, etb, s.tariff, dt);
    cost += r.et_net_cost - r.b2g - r.pv_feed;
    if (s.include_discomfort)
        cost += discomfort_cost(d.t_in, c.hvac.temp_pref, c.hvac.discomfort_coeff);
    return cost;
}

void recompute_costs(const Scenario& s, GlobalSolution& g) {
    const double dt = s.dt();
    const int H = s.H();
    using EV = ExchangeVector;
    g.breakdown.assign(g.communities.size(), {});
    g.aggregate = {};
    for (size_t i = 0; i < g.communities.size(); ++i) {
        CommunityDecision& d = g.communities[i];
        const Community& c = s.communities[i];
        const Vec& flat = d.exchange.flat;
        std::span<const double> grid(flat.data() + EV::GRID * H, static_cast<size_t>(H));
        std::span<const double> feed(flat.data() + EV::FEED * H, static_cast<size_t>(H));
        std::span<const double> b2g(flat.data() + EV::B2G * H, static_cast<size_t>(H));
        std::span<const double> ets(flat.data() + EV::ETS * H, static_cast<size_t>(H));
        std::span<const double> etb(flat.data() + EV::ETB * H, static_cast<size_t>(H));

        GlobalSolution::Terms& terms = g.breakdown[i];
        terms.grid_cost = grid_cost(s.tariff, grid, dt);
        terms.battery_degradation =
            degradation_cost(d.p_batc, d.p_batd, c.battery.degradation_coeff, dt);
        Revenue r = revenue_terms(feed, b2g, ets, etb, s.tariff, dt);
        terms.et_net_cost = r.et_net_cost;
        terms.b2g_revenue = r.b2g;
        terms.pv_revenue = r.pv_feed;
        terms.discomfort_cost = discomfort_cost(d.t_in, c.hvac.temp_pref, c.hvac.discomfort_coeff);
        terms.total = terms.grid_cost + terms.battery_degradation + terms.et_net_cost -
                      terms.b2g_revenue - terms.pv_revenue +
                      (s.include_discomfort ? terms.discomfort_cost : 0.0);
        d.objective_value = terms.total;

        g.aggregate.grid_cost += terms.grid_cost;
        g.aggregate.battery_degradation += terms.battery_degradation;
        g.aggregate.et_net_cost += terms.et_net_cost;
        g.aggregate.b2g_revenue += terms.b2g_revenue;
        g.aggregate.pv_revenue += terms.pv_revenue;
        g.aggregate.discomfort_cost += terms.discomfort_cost;
        g.aggregate.total += terms.total;
    }
    g.total_cost = g.aggregate.total;
}

}  // namespace vstack::dev
