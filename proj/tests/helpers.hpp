#pragma once

// Shared fixture builders and independent oracles for the test suites. The
// oracles here deliberately avoid the library's solver paths: dense linear
// algebra for KKT systems, quadrature for distributions, and a dense
// sensitivity matrix for the feeder model.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vstack/common.hpp"
#include "vstack/network.hpp"
#include "vstack/qp.hpp"
#include "vstack/scenario.hpp"

#ifndef VSTACK_FIXTURES_DIR
#define VSTACK_FIXTURES_DIR "fixtures"
#endif

namespace vstack::testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(VSTACK_FIXTURES_DIR) / name;
}

// ---------------------------------------------------------------------------
// programmatic scenarios

/// Chain feeder 0-1-...-n with uniform impedance and roomy limits.
inline net::FeederModel chain_feeder(int nodes, double pmax_kw = 1000.0,
                                     double r_ohm = 0.1, double x_ohm = 0.08) {
    net::FeederModel f;
    f.node_count = nodes;
    f.s_base_kva = 1000.0;
    f.v_base_kv = 12.66;
    f.v_min = 0.90;
    f.v_max = 1.10;
    f.v_ref = 1.0;
    const double z_base = 1000.0 * f.v_base_kv * f.v_base_kv / f.s_base_kva;
    for (int n = 1; n < nodes; ++n) {
        net::Branch br;
        br.from = n - 1;
        br.to = n;
        br.r_pu = r_ohm / z_base;
        br.x_pu = x_ohm / z_base;
        br.p_max_pu = pmax_kw / f.s_base_kva;
        br.p_min_pu = -br.p_max_pu;
        br.q_max_pu = 0.6 * pmax_kw / f.s_base_kva;
        br.q_min_pu = -br.q_max_pu;
        f.branches.push_back(br);
    }
    return net::rebuild_tree(std::move(f));
}

struct SmallScenarioOptions {
    int min_communities = 1;
    int max_communities = 3;
    int min_H = 2;
    int max_H = 6;
    bool allow_tpt = true;
    bool always_all_streams = false;
};

/// Randomized small-but-feasible scenario: chain feeder, ample grid limit,
/// wide temperature band around the outdoor range.
inline Scenario random_small_scenario(Rng& rng, const SmallScenarioOptions& opt = {}) {
    Scenario s;
    const int I = rng.uniform_int(opt.min_communities, opt.max_communities);
    const int H = rng.uniform_int(opt.min_H, opt.max_H);
    s.horizon = {H, 1.0};
    s.feeder = chain_feeder(I + 1 + rng.uniform_int(0, 2));

    s.tariff.kind = (opt.allow_tpt && rng.uniform() < 0.3) ? TariffKind::TPT : TariffKind::TOU;
    s.tariff.tou_energy_price.resize(static_cast<size_t>(H));
    s.tariff.feed_in_price.resize(static_cast<size_t>(H));
    s.tariff.b2g_price.resize(static_cast<size_t>(H));
    s.tariff.et_price.resize(static_cast<size_t>(H));
    s.tariff.tpt_energy_price = rng.uniform(0.08, 0.25);
    s.tariff.tpt_peak_price = rng.uniform(0.1, 0.8);
    for (int t = 0; t < H; ++t) {
        const auto ts = static_cast<size_t>(t);
        s.tariff.tou_energy_price[ts] = rng.uniform(0.05, 0.5);
        s.tariff.feed_in_price[ts] = rng.uniform(0.01, 0.08);
        s.tariff.b2g_price[ts] = rng.uniform(0.02, 0.3);
        s.tariff.et_price[ts] =
            0.5 * (s.tariff.energy_price(t) + s.tariff.feed_in_price[ts]);
    }
    if (opt.always_all_streams) {
        s.flags = {true, true, true};
    } else {
        s.flags.enable_b2b = rng.uniform() < 0.8;
        s.flags.enable_b2g = rng.uniform() < 0.8;
        s.flags.enable_et = rng.uniform() < 0.8;
    }

    for (int i = 0; i < I; ++i) {
        Community c;
        c.node_id = 1 + i;
        double cap = rng.uniform(20.0, 80.0);
        double power = rng.uniform(5.0, 25.0);
        c.battery.capacity_upper = cap;
        c.battery.capacity_lower = 0.1 * cap;
        c.battery.charge_max = power;
        c.battery.discharge_max = power;
        c.battery.eff_charge = rng.uniform(0.9, 0.98);
        c.battery.eff_discharge = rng.uniform(0.9, 0.98);
        c.battery.initial_energy = rng.uniform(0.3 * cap, 0.7 * cap);
        c.battery.degradation_coeff = rng.uniform(1e-4, 1e-3);

        c.hvac.thermal_capacitance = rng.uniform(3.0, 10.0);
        c.hvac.thermal_resistance = rng.uniform(1.0, 4.0);
        c.hvac.mode = 1.0;
        c.hvac.power_min.assign(static_cast<size_t>(H), 0.0);
        c.hvac.power_max.assign(static_cast<size_t>(H), rng.uniform(3.0, 10.0));
        c.hvac.temp_min.assign(static_cast<size_t>(H), 16.0);
        c.hvac.temp_max.assign(static_cast<size_t>(H), 30.0);
        c.hvac.temp_pref = rng.uniform(21.0, 24.0);
        c.hvac.discomfort_coeff = rng.uniform(0.0, 0.5);
        c.hvac.initial_indoor_temp = rng.uniform(20.0, 25.0);

        c.limits.grid_max = 150.0;
        c.limits.et_buy_max = rng.uniform(5.0, 30.0);
        c.limits.et_sell_max = rng.uniform(5.0, 30.0);
        c.limits.b2b_max.assign(static_cast<size_t>(H), power);
        c.limits.b2g_max.assign(static_cast<size_t>(H), power);

        c.series.pv_available.resize(static_cast<size_t>(H));
        c.series.inflexible_load.resize(static_cast<size_t>(H));
        c.series.outdoor_temp.resize(static_cast<size_t>(H));
        c.series.reactive_load.resize(static_cast<size_t>(H));
        for (int t = 0; t < H; ++t) {
            const auto ts = static_cast<size_t>(t);
            c.series.pv_available[ts] = rng.uniform(0.0, 25.0);
            c.series.inflexible_load[ts] = rng.uniform(5.0, 40.0);
            c.series.outdoor_temp[ts] = rng.uniform(19.0, 28.0);
            c.series.reactive_load[ts] = rng.uniform(0.0, 10.0);
        }
        s.communities.push_back(std::move(c));
    }
    return s;
}

/// Tiny instance for the exhaustive oracles: <= 2 communities, H <= 2, small
/// integer-ish magnitudes, generous SoC headroom so snapped lattice points
/// stay feasible.
inline Scenario random_tiny_scenario(Rng& rng, int communities, int H,
                                     bool enable_et, bool enable_b2g, bool enable_b2b,
                                     bool fixed_ac = true) {
    SmallScenarioOptions opt;
    opt.min_communities = opt.max_communities = communities;
    opt.min_H = opt.max_H = H;
    opt.allow_tpt = false;
    Scenario s = random_small_scenario(rng, opt);
    s.flags = {enable_b2b, enable_b2g, enable_et};
    for (auto& c : s.communities) {
        c.battery.capacity_upper = 40.0;
        c.battery.capacity_lower = 2.0;
        c.battery.initial_energy = 20.0;
        c.battery.charge_max = rng.uniform(4.0, 8.0);
        c.battery.discharge_max = rng.uniform(4.0, 8.0);
        c.limits.b2b_max.assign(static_cast<size_t>(H), c.battery.discharge_max);
        c.limits.b2g_max.assign(static_cast<size_t>(H), c.battery.discharge_max);
        c.limits.et_buy_max = 5.0;
        c.limits.et_sell_max = 5.0;
        if (fixed_ac) {
            // pins the HVAC so the grid-search lattice stays small
            double level = rng.uniform(0.0, 2.0);
            c.hvac.power_min.assign(static_cast<size_t>(H), level);
            c.hvac.power_max.assign(static_cast<size_t>(H), level);
        }
        for (int t = 0; t < H; ++t) {
            auto ts = static_cast<size_t>(t);
            c.series.inflexible_load[ts] = rng.uniform(10.0, 20.0);
            c.series.pv_available[ts] = rng.uniform(0.0, 6.0);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// independent oracles

/// Dense KKT factorization for an equality-constrained QP (the oracle for
/// solver correctness): solves [P A'; A 0][x;y] = [-c; b].
inline std::pair<Vec, Vec> dense_kkt_solve(const qp::QuadraticProgram& p) {
    const int n = p.n;
    const int m = p.m;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    Eigen::MatrixXd Pd = Eigen::MatrixXd(p.P);
    Pd = 0.5 * (Pd + Pd.transpose()).eval();
    K.topLeftCorner(n, n) = Pd;
    if (m > 0) {
        Eigen::MatrixXd Ad = Eigen::MatrixXd(p.A);
        K.topRightCorner(n, m) = Ad.transpose();
        K.bottomLeftCorner(m, n) = Ad;
    }
    Vec rhs(n + m);
    rhs.head(n) = -p.c;
    if (m > 0) rhs.tail(m) = p.b;
    Vec sol = K.fullPivLu().solve(rhs);
    return {sol.head(n), m > 0 ? Vec(sol.tail(m)) : Vec(0)};
}

/// Random strictly convex QP with equality rows and (optionally) infinite
/// bounds, scaled to moderate magnitudes.
inline qp::QuadraticProgram random_eq_qp(Rng& rng, int n_max = 50, bool with_bounds = false) {
    const int n = rng.uniform_int(2, n_max);
    const int m = rng.uniform_int(1, std::max(1, n / 2));
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) L(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::MatrixXd Pd = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);

    qp::QuadraticProgram p;
    p.n = n;
    p.m = m;
    std::vector<Triplet> pt;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (Pd(i, j) != 0.0) pt.emplace_back(i, j, Pd(i, j));
    p.P = SpMat(n, n);
    p.P.setFromTriplets(pt.begin(), pt.end());
    p.c = Vec(n);
    for (int i = 0; i < n; ++i) p.c[i] = rng.uniform(-2.0, 2.0);
    std::vector<Triplet> at;
    for (int r = 0; r < m; ++r)
        for (int j = 0; j < n; ++j)
            if (rng.uniform() < 0.4) at.emplace_back(r, j, rng.uniform(-1.0, 1.0));
    // guarantee no empty row
    for (int r = 0; r < m; ++r) at.emplace_back(r, r % n, 1.0);
    p.A = SpMat(m, n);
    p.A.setFromTriplets(at.begin(), at.end());
    p.b = Vec(m);
    for (int r = 0; r < m; ++r) p.b[r] = rng.uniform(-1.0, 1.0);
    if (with_bounds) {
        p.l = Vec(n);
        p.u = Vec(n);
        for (int i = 0; i < n; ++i) {
            p.l[i] = rng.uniform() < 0.3 ? -kInf : rng.uniform(-3.0, 0.0);
            p.u[i] = rng.uniform() < 0.3 ? kInf : rng.uniform(0.5, 3.0);
        }
    } else {
        p.l = Vec::Constant(n, -kInf);
        p.u = Vec::Constant(n, kInf);
    }
    return p;
}

/// Mean of a normal(mean, sd) truncated to [lo, hi], by Simpson quadrature
/// over the truncated density.
inline double truncated_normal_mean_quadrature(double lo, double hi, double mean, double sd,
                                               int intervals = 4000) {
    auto density = [&](double x) {
        double z = (x - mean) / sd;
        return std::exp(-0.5 * z * z);
    };
    double mass = 0.0, moment = 0.0;
    const double h = (hi - lo) / intervals;
    for (int k = 0; k <= intervals; ++k) {
        double x = lo + k * h;
        double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        mass += w * density(x);
        moment += w * x * density(x);
    }
    return moment / mass;
}

/// Dense path-based evaluation of the linear feeder map: voltage at node j =
/// v_ref - sum over branches b on root->j of (R_b P_b + X_b Q_b)/v_ref, with
/// branch flows from an explicit node-times-branch incidence aggregation.
inline net::NetworkState dense_flow_oracle(const net::FeederModel& f,
                                           const net::NodeInjection& inj) {
    const int n = f.node_count;
    const int nb = f.branch_count();
    const int H = static_cast<int>(inj.active.cols());
    // membership[b][k] = 1 if node k lies in the subtree fed by branch b
    Eigen::MatrixXd member = Eigen::MatrixXd::Zero(nb, n);
    for (int k = 0; k < n; ++k) {
        int node = k;
        while (node != 0) {
            member(f.branch_into[static_cast<size_t>(node)], k) = 1.0;
            node = f.parent[static_cast<size_t>(node)];
        }
    }
    net::NetworkState st;
    st.branch_active = member * inj.active / f.s_base_kva;
    st.branch_reactive = member * inj.reactive / f.s_base_kva;
    st.node_voltage = Eigen::MatrixXd::Constant(n, H, f.v_ref);
    for (int k = 1; k < n; ++k) {
        int node = k;
        while (node != 0) {
            int b = f.branch_into[static_cast<size_t>(node)];
            st.node_voltage.row(k) -=
                (f.branches[static_cast<size_t>(b)].r_pu * st.branch_active.row(b) +
                 f.branches[static_cast<size_t>(b)].x_pu * st.branch_reactive.row(b)) /
                f.v_ref;
            node = f.parent[static_cast<size_t>(node)];
        }
    }
    return st;
}

}  // namespace vstack::testing
