#include "doctest.h"

#include "helpers.hpp"
#include "vstack/centralized.hpp"
#include "vstack/devices.hpp"

using namespace vstack;

namespace {

BatteryParams battery(double mu, double eta) {
    BatteryParams p;
    p.eff_charge = mu;
    p.eff_discharge = eta;
    p.capacity_upper = 1e9;
    return p;
}

HvacParams hvac(double C, double R, double mode) {
    HvacParams p;
    p.thermal_capacitance = C;
    p.thermal_resistance = R;
    p.mode = mode;
    return p;
}

}  // namespace

TEST_SUITE("devices") {

TEST_CASE("battery step follows the storage recursion") {
    CHECK(dev::battery_step(250, 0, 0, battery(0.9, 0.9), 1.0) == 250);
    CHECK(dev::battery_step(100, 10, 0, battery(0.95, 0.95), 1.0) == doctest::Approx(109.5));
    CHECK(dev::battery_step(100, 0, 19, battery(0.95, 0.95), 1.0) == doctest::Approx(80.0));
}

TEST_CASE("battery step is affine in the charge/discharge pair") {
    Rng rng(5);
    BatteryParams p = battery(0.93, 0.96);
    for (int k = 0; k < 200; ++k) {
        double b0 = rng.uniform(0, 400);
        double c1 = rng.uniform(0, 50), d1 = rng.uniform(0, 50);
        double c2 = rng.uniform(0, 50), d2 = rng.uniform(0, 50);
        double a = rng.uniform(0, 1);
        double dt = rng.uniform(0.25, 2.0);
        double mixed = dev::battery_step(b0, a * c1 + (1 - a) * c2, a * d1 + (1 - a) * d2, p, dt);
        double split = a * dev::battery_step(b0, c1, d1, p, dt) +
                       (1 - a) * dev::battery_step(b0, c2, d2, p, dt);
        CHECK(mixed == doctest::Approx(split).epsilon(1e-12));
    }
}

TEST_CASE("thermal step matches the printed recursion") {
    CHECK(dev::hvac_step(20, 20, 0, hvac(5, 2, 1), 1.0) == 20);
    CHECK(dev::hvac_step(20, 30, 0, hvac(5, 2, 1), 1.0) == doctest::Approx(21.0));
    CHECK(dev::hvac_step(24, 30, 2, hvac(2, 5, 1), 1.0) == doctest::Approx(23.6));
}

TEST_CASE("thermal fixed point: cooling exactly balances the temperature gap") {
    // zero increment when T_prev = T_out - mode*R*p*dt
    Rng rng(11);
    for (int k = 0; k < 100; ++k) {
        HvacParams p = hvac(rng.uniform(1, 10), rng.uniform(0.5, 4), 1.0);
        double dt = rng.uniform(0.25, 2.0);
        double power = rng.uniform(0, 10);
        double t_out = rng.uniform(15, 35);
        double t_prev = t_out - p.mode * p.thermal_resistance * power * dt;
        CHECK(dev::hvac_step(t_prev, t_out, power, p, dt) ==
              doctest::Approx(t_prev).epsilon(1e-12));
    }
}

TEST_CASE("degradation cost sums squared throughput") {
    std::vector<double> d1{10.0}, c1{0.0};
    CHECK(dev::degradation_cost(c1, d1, 0.01, 1.0) == doctest::Approx(1.0));
    std::vector<double> z{0.0, 0.0};
    CHECK(dev::degradation_cost(z, z, 0.5, 1.0) == 0.0);
    std::vector<double> d2{3.0, 4.0}, c2{0.0, 0.0};
    CHECK(dev::degradation_cost(c2, d2, 0.01, 1.0) == doctest::Approx(0.25));
}

TEST_CASE("discomfort cost is the squared deviation from the set point") {
    std::vector<double> at_pref{22.0, 22.0};
    CHECK(dev::discomfort_cost(at_pref, 22.0, 3.0) == 0.0);
    std::vector<double> off{21.0, 23.0};
    CHECK(dev::discomfort_cost(off, 22.0, 2.0) == doctest::Approx(4.0));
    CHECK(dev::discomfort_cost(off, 22.0, 0.0) == 0.0);
}

TEST_CASE("grid cost under both tariffs") {
    Tariff tpt;
    tpt.kind = TariffKind::TPT;
    tpt.tpt_energy_price = 0.1;
    tpt.tpt_peak_price = 1.0;
    std::vector<double> p{2.0, 4.0};
    CHECK(dev::grid_cost(tpt, p, 1.0) == doctest::Approx(4.6));

    Tariff tou;
    tou.kind = TariffKind::TOU;
    tou.tou_energy_price = {0.2, 0.4};
    std::vector<double> q{5.0, 5.0};
    CHECK(dev::grid_cost(tou, q, 1.0) == doctest::Approx(3.0));

    std::vector<double> zero{0.0, 0.0};
    CHECK(dev::grid_cost(tpt, zero, 1.0) == 0.0);
    CHECK(dev::grid_cost(tou, zero, 1.0) == 0.0);
}

TEST_CASE("two-part tariff dominates a flat TOU at the same energy rate") {
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        double rate = rng.uniform(0.05, 0.4);
        Tariff tpt;
        tpt.kind = TariffKind::TPT;
        tpt.tpt_energy_price = rate;
        tpt.tpt_peak_price = rng.uniform(0.0, 1.0);
        Tariff tou;
        tou.kind = TariffKind::TOU;
        int H = rng.uniform_int(1, 8);
        tou.tou_energy_price.assign(static_cast<size_t>(H), rate);
        std::vector<double> p(static_cast<size_t>(H));
        for (auto& v : p) v = rng.uniform(0.0, 50.0);
        double dt = rng.uniform(0.25, 2.0);
        CHECK(dev::grid_cost(tpt, p, dt) >= dev::grid_cost(tou, p, dt) - 1e-12);
    }
}

TEST_CASE("revenue terms") {
    Tariff t;
    t.kind = TariffKind::TOU;
    t.feed_in_price = {0.05};
    t.b2g_price = {0.2};
    t.et_price = {0.3};
    std::vector<double> zero{0.0};

    SUBCASE("all-zero flows") {
        auto r = dev::revenue_terms(zero, zero, zero, zero, t, 1.0);
        CHECK(r.pv_feed == 0.0);
        CHECK(r.b2g == 0.0);
        CHECK(r.et_net_cost == 0.0);
    }
    SUBCASE("one-sided market buy") {
        std::vector<double> etb{2.0};
        auto r = dev::revenue_terms(zero, zero, zero, etb, t, 1.0);
        CHECK(r.et_net_cost == doctest::Approx(0.6));
    }
    SUBCASE("balanced buy and sell cancel") {
        std::vector<double> both{3.5};
        auto r = dev::revenue_terms(zero, zero, both, both, t, 1.0);
        CHECK(r.et_net_cost == doctest::Approx(0.0));
    }
}

TEST_CASE("feasibility checker pinpoints hand-made violations") {
    Scenario s = load_scenario(testing::fixture("twin2.json"));
    GlobalSolution g = cent::solve_centralized(s);
    REQUIRE(dev::check_feasibility(s, g, 1e-6).empty());

    SUBCASE("market imbalance of one kilowatt") {
        GlobalSolution bad = g;
        bad.communities[0].exchange.at(ExchangeVector::ETS, 2) += 1.0;
        // keep the community side consistent so only the market row trips
        bad.communities[0].p_batd[2] += 1.0;
        bad.communities[0].exchange.at(ExchangeVector::B2G, 2) += 0.0;
        auto v = dev::check_feasibility(s, bad, 0.5);
        // battery recursion also moves; restrict to the market row count
        int market = 0;
        for (const auto& each : v)
            if (each.name.find("market_balance") != std::string::npos) ++market;
        CHECK(market == 1);
    }
    SUBCASE("simultaneous charge and discharge") {
        GlobalSolution bad = g;
        bad.communities[0].p_batc[1] = 1.0;
        bad.communities[0].p_batd[1] = 1.0;
        auto v = dev::check_feasibility(s, bad, 1e-3);
        bool found = false;
        for (const auto& each : v)
            if (each.name.find("complementarity_charge_discharge") != std::string::npos)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("centralized solutions of random small scenarios are feasible") {
    Rng rng(2024);
    for (int k = 0; k < 12; ++k) {
        Scenario s = testing::random_small_scenario(rng);
        CAPTURE(k);
        GlobalSolution g = cent::solve_centralized(s);
        auto v = dev::check_feasibility(s, g, 1e-6);
        if (!v.empty()) {
            CAPTURE(v.front().name);
            CAPTURE(v.front().magnitude);
        }
        CHECK(v.empty());
    }
}

}  // TEST_SUITE
