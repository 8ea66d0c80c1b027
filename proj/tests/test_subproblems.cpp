#include "doctest.h"

#include "helpers.hpp"
#include "vstack/centralized.hpp"
#include "vstack/devices.hpp"
#include "vstack/subproblems.hpp"

using namespace vstack;
using EV = ExchangeVector;

TEST_SUITE("subproblems") {

TEST_CASE("relaxed community program has the expected shape") {
    Scenario s = load_scenario(testing::fixture("twin2.json"));
    s.horizon.H = 2;
    for (auto& c : s.communities) {
        c.hvac.power_min.resize(2);
        c.hvac.power_max.resize(2);
        c.hvac.temp_min.resize(2);
        c.hvac.temp_max.resize(2);
        c.limits.b2b_max.resize(2);
        c.limits.b2g_max.resize(2);
        c.series.pv_available.resize(2);
        c.series.inflexible_load.resize(2);
        c.series.outdoor_temp.resize(2);
        c.series.reactive_load.resize(2);
    }
    s.tariff.tou_energy_price.resize(2);
    s.tariff.feed_in_price.resize(2);
    s.tariff.b2g_price.resize(2);
    s.tariff.et_price.resize(2);
    const int H = 2;

    auto p = sub::build_community_qp(s, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.1, std::nullopt);
    // 13 per-slot columns: the five exchange blocks, local PV use, charge,
    // discharge, building supply, HVAC power, indoor temperature, stored
    // energy, and the PV-availability slack
    CHECK(p.n == 13 * H);
    CHECK(p.m == 5 * H);
    // every variable carries its box: nonnegative flows, physical state bands
    for (int t = 0; t < H; ++t) {
        auto lay = sub::CommunityLayout::make(H, false);
        CHECK(p.l[lay.grid + t] == 0.0);
        CHECK(p.u[lay.grid + t] == s.communities[0].limits.grid_max);
        CHECK(p.l[lay.soc + t] == s.communities[0].battery.capacity_lower);
        CHECK(p.u[lay.soc + t] == s.communities[0].battery.capacity_upper);
        CHECK(p.l[lay.t_in + t] == s.communities[0].hvac.temp_min[static_cast<size_t>(t)]);
    }

    SUBCASE("peak-charge epigraph appears under the two-part tariff") {
        Scenario tpt = s;
        tpt.tariff.kind = TariffKind::TPT;
        auto q = sub::build_community_qp(tpt, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.1,
                                         std::nullopt);
        CHECK(q.n == 13 * H + 1 + H);  // epigraph variable plus one slack per slot
        CHECK(q.m == 6 * H);
    }
}

TEST_CASE("vanishing penalty reduces the objective to the standalone cost") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));
    const int H = s.H();
    auto standalone = sub::solve_community(s, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.0);
    auto tiny_rho = sub::solve_community(s, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 1e-9);
    CHECK(tiny_rho.objective_value ==
          doctest::Approx(standalone.objective_value).epsilon(1e-6));
}

TEST_CASE("a discharge-only pattern pins charging to zero") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));
    const int H = s.H();
    DirectionPattern pat;
    pat.x.assign(static_cast<size_t>(H), 1);
    pat.y.assign(static_cast<size_t>(H), 0);
    auto p = sub::build_community_qp(s, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.1, pat);
    auto lay = sub::CommunityLayout::make(H, false);
    for (int t = 0; t < H; ++t) {
        CHECK(p.u[lay.batc + t] == 0.0);
        CHECK(p.u[lay.batd + t] == s.communities[0].battery.discharge_max);
    }
}

TEST_CASE("all-zero instance solves to an all-zero decision") {
    Scenario s = load_scenario(testing::fixture("zero1.json"));
    const int H = s.H();
    auto d = sub::solve_community(s, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.1);
    CHECK(d.objective_value == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(d.exchange.flat.cwiseAbs().maxCoeff() < 1e-7);
    for (int t = 0; t < H; ++t) {
        CHECK(d.p_batc[static_cast<size_t>(t)] < 1e-7);
        CHECK(d.p_batd[static_cast<size_t>(t)] < 1e-7);
    }
}

TEST_CASE("price spread makes the battery arbitrage pay") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));
    const int H = s.H();
    auto with_battery = sub::solve_community(s, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.0);
    Scenario no_battery = s;
    no_battery.communities[0].battery.charge_max = 0.0;
    no_battery.communities[0].battery.initial_energy =
        no_battery.communities[0].battery.capacity_lower;
    auto without = sub::solve_community(no_battery, 0, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.0);
    CHECK(with_battery.objective_value < without.objective_value - 0.5);
    // the battery charges in the cheap slots and discharges in the dear ones
    double charged_cheap = with_battery.p_batc[0] + with_battery.p_batc[1];
    double discharged_peak = with_battery.p_batd[2] + with_battery.p_batd[3];
    CHECK(charged_cheap > 1.0);
    CHECK(discharged_peak > 1.0);
}

TEST_CASE("tiny instance matches the exhaustive grid oracle") {
    Rng rng(77);
    Scenario s = testing::random_tiny_scenario(rng, 1, 2, false, false, true);
    s.include_discomfort = true;
    auto d = sub::solve_community(s, 0, Vec::Zero(10), Vec::Zero(10), 0.0);
    auto grid = cent::grid_search_oracle(s, 7);
    REQUIRE(grid.found);
    // the solver must not beat the true optimum, and the lattice optimum can
    // only sit above the solver's by the discretization error
    CHECK(d.objective_value <= grid.objective + 1e-3);
    CHECK(grid.objective <= d.objective_value + 1.0);
}

TEST_CASE("community decisions satisfy their own constraint set exactly") {
    Rng rng(88);
    for (int k = 0; k < 10; ++k) {
        Scenario s = testing::random_small_scenario(rng);
        const int H = s.H();
        Vec duals(5 * H), aux(5 * H);
        for (int j = 0; j < 5 * H; ++j) {
            duals[j] = rng.uniform(-0.2, 0.2);
            aux[j] = rng.uniform(0.0, 20.0);
        }
        for (int i = 0; i < s.community_count(); ++i) {
            auto d = sub::solve_community(s, i, duals, aux, 0.1);
            auto v = dev::check_community_feasibility(s, i, d, 1e-6);
            CAPTURE(k);
            CAPTURE(i);
            if (!v.empty()) {
                CAPTURE(v.front().name);
                CAPTURE(v.front().magnitude);
            }
            CHECK(v.empty());
        }
    }
}

TEST_CASE("disabling a stream never helps a community") {
    Scenario base = load_scenario(testing::fixture("desk33.json"));
    const int H = base.H();
    auto cost_with_flags = [&](bool b2b, bool b2g, bool et) {
        Scenario s = base;
        s.flags = {b2b, b2g, et};
        return sub::solve_community(s, 1, Vec::Zero(5 * H), Vec::Zero(5 * H), 0.0)
            .objective_value;
    };
    double full = cost_with_flags(true, true, true);
    CHECK(cost_with_flags(false, true, true) >= full - 1e-6);
    CHECK(cost_with_flags(true, false, true) >= full - 1e-6);
    CHECK(cost_with_flags(true, true, false) >= full - 1e-6);
}

TEST_CASE("operator projection enforces the per-slot market balance") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));
    s.flags.enable_et = true;
    s.communities[0].limits.et_buy_max = 20.0;
    s.communities[0].limits.et_sell_max = 20.0;
    const int H = s.H();

    // one community: the balance row forces matched buy and sell copies
    Vec ex = Vec::Zero(5 * H);
    for (int t = 0; t < H; ++t) {
        ex[EV::ETS * H + t] = 4.0;
        ex[EV::GRID * H + t] = 10.0;
    }
    sub::OperatorSolver op(s, 0.5);
    auto aux = op.solve({Vec::Zero(5 * H)}, {ex});
    REQUIRE(aux.size() == 1);
    for (int t = 0; t < H; ++t) {
        // projection of (ets, etb) = (4, 0) onto ets = etb is (2, 2)
        CHECK(aux[0][EV::ETS * H + t] == doctest::Approx(2.0).epsilon(1e-5));
        CHECK(aux[0][EV::ETB * H + t] == doctest::Approx(2.0).epsilon(1e-5));
        CHECK(aux[0][EV::GRID * H + t] == doctest::Approx(10.0).epsilon(1e-5));
    }
}

TEST_CASE("balanced opposite trades pass through the operator unchanged") {
    Scenario s = load_scenario(testing::fixture("twin2.json"));
    const int H = s.H();
    Vec ex0 = Vec::Zero(5 * H), ex1 = Vec::Zero(5 * H);
    for (int t = 0; t < H; ++t) {
        ex0[EV::ETS * H + t] = 3.0;
        ex1[EV::ETB * H + t] = 3.0;
        ex0[EV::GRID * H + t] = 8.0;
        ex1[EV::GRID * H + t] = 11.0;
    }
    sub::OperatorSolver op(s, 0.5);
    auto aux = op.solve({Vec::Zero(5 * H), Vec::Zero(5 * H)}, {ex0, ex1});
    CHECK((aux[0] - ex0).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((aux[1] - ex1).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("a binding branch limit clips the requested grid draw") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));
    // community sits at node 2 behind a 400 kW branch; choke it to 25 kW
    for (auto& br : s.feeder.branches) {
        br.p_max_pu = 25.0 / s.feeder.s_base_kva;
        br.p_min_pu = -br.p_max_pu;
    }
    const int H = s.H();
    Vec ex = Vec::Zero(5 * H);
    for (int t = 0; t < H; ++t) ex[EV::GRID * H + t] = 60.0;  // above the 25 kW limit
    sub::OperatorSolver op(s, 0.5);
    auto aux = op.solve({Vec::Zero(5 * H)}, {ex});
    for (int t = 0; t < H; ++t)
        CHECK(aux[0][EV::GRID * H + t] <= 25.0 + 1e-5);
    // the clipped copy sits exactly on the limit
    CHECK(aux[0][EV::GRID * H + 0] == doctest::Approx(25.0).epsilon(1e-5));
    const auto& st = op.network_state();
    CHECK(st.branch_active.maxCoeff() <= 25.0 / s.feeder.s_base_kva + 1e-8);
}

TEST_CASE("dual update is the scaled consensus residual") {
    Vec duals = Vec::Zero(4), aux(4), ex(4);
    aux << 1, 2, 3, 4;
    ex << 1, 2, 3, 4;
    SUBCASE("fixed point") {
        CHECK((sub::dual_update(duals, aux, ex, 0.7) - duals).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("single-entry disagreement") {
        ex[2] = 2.0;
        Vec next = sub::dual_update(duals, aux, ex, 2.0);
        CHECK(next[2] == doctest::Approx(2.0));
        CHECK(next[0] == 0.0);
    }
    SUBCASE("constant disagreement accumulates linearly") {
        ex.setZero();
        aux.setOnes();
        Vec lam = Vec::Zero(4);
        for (int k = 0; k < 5; ++k) lam = sub::dual_update(lam, aux, ex, 0.3);
        CHECK(lam[0] == doctest::Approx(5 * 0.3));
    }
}

}  // TEST_SUITE
