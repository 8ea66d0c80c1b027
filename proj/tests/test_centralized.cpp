#include "doctest.h"

#include <algorithm>

#include "helpers.hpp"
#include "vstack/centralized.hpp"
#include "vstack/devices.hpp"
#include "vstack/subproblems.hpp"

using namespace vstack;

TEST_SUITE("centralized") {

TEST_CASE("zero-price zero-load instance costs nothing") {
    Scenario s = load_scenario(testing::fixture("zero1.json"));
    GlobalSolution g = cent::solve_centralized(s);
    CHECK(g.total_cost == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(dev::check_feasibility(s, g, 1e-6).empty());
}

TEST_CASE("objective is invariant under community reordering") {
    Scenario s = load_scenario(testing::fixture("twin2.json"));
    // make the two communities distinguishable first
    s.communities[1].series.inflexible_load[3] += 7.0;
    s.communities[1].battery.initial_energy += 5.0;
    GlobalSolution g1 = cent::solve_centralized(s);
    Scenario swapped = s;
    std::swap(swapped.communities[0], swapped.communities[1]);
    GlobalSolution g2 = cent::solve_centralized(swapped);
    CHECK(g1.total_cost == doctest::Approx(g2.total_cost).epsilon(0).scale(0.0).epsilon(1e-9));
    CHECK(std::abs(g1.total_cost - g2.total_cost) < 1e-6);
}

TEST_CASE("single community without network pressure matches the standalone solve") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));  // trading disabled
    GlobalSolution g = cent::solve_centralized(s);
    auto d = sub::solve_community(s, 0, Vec::Zero(5 * s.H()), Vec::Zero(5 * s.H()), 0.0);
    CHECK(g.total_cost == doctest::Approx(d.objective_value).epsilon(2e-4));
}

TEST_CASE("infeasible load is reported as an error") {
    Scenario s = load_scenario(testing::fixture("mini1.json"));
    s.communities[0].limits.grid_max = 1.0;  // load needs ~20 kW, no other path
    s.communities[0].series.pv_available = {0, 0, 0, 0};
    s.communities[0].battery.initial_energy = s.communities[0].battery.capacity_lower;
    CHECK_THROWS_AS(cent::solve_centralized(s), SolveError);
}

TEST_CASE("pattern enumeration dominates the rounding heuristic on tiny instances") {
    Rng rng(991);
    for (int k = 0; k < 6; ++k) {
        Scenario s = testing::random_tiny_scenario(rng, rng.uniform_int(1, 2), 2,
                                                   /*et=*/k % 2 == 0, /*b2g=*/true, /*b2b=*/true,
                                                   /*fixed_ac=*/false);
        CAPTURE(k);
        GlobalSolution oracle = cent::brute_force_oracle(s);
        GlobalSolution heur = cent::solve_centralized(s);
        CHECK(oracle.total_cost <= heur.total_cost + 1e-6);
        double scale = std::max(1.0, std::abs(oracle.total_cost));
        CHECK(heur.total_cost - oracle.total_cost <= 0.02 * scale);
        CHECK(dev::check_feasibility(s, oracle, 1e-6).empty());
    }
}

TEST_CASE("tiny single-community instance with trivial prices is exact") {
    Scenario s = load_scenario(testing::fixture("zero1.json"));
    s.horizon.H = 1;
    auto shrink = [&](std::vector<double>& v) { v.resize(1); };
    auto& c = s.communities[0];
    shrink(c.hvac.power_min);
    shrink(c.hvac.power_max);
    shrink(c.hvac.temp_min);
    shrink(c.hvac.temp_max);
    shrink(c.limits.b2b_max);
    shrink(c.limits.b2g_max);
    shrink(c.series.pv_available);
    shrink(c.series.inflexible_load);
    shrink(c.series.outdoor_temp);
    shrink(c.series.reactive_load);
    shrink(s.tariff.tou_energy_price);
    shrink(s.tariff.feed_in_price);
    shrink(s.tariff.b2g_price);
    shrink(s.tariff.et_price);
    GlobalSolution oracle = cent::brute_force_oracle(s);
    GlobalSolution heur = cent::solve_centralized(s);
    CHECK(oracle.total_cost == doctest::Approx(heur.total_cost).epsilon(1e-9));
}

TEST_CASE("the two exhaustive oracles agree within discretization error") {
    Rng rng(222);
    // ET off keeps the lattice small enough for a fine grid
    Scenario s = testing::random_tiny_scenario(rng, 1, 2, false, true, true);
    GlobalSolution pattern_opt = cent::brute_force_oracle(s);
    auto grid = cent::grid_search_oracle(s, 6);
    REQUIRE(grid.found);
    // every lattice point is feasible for some pattern
    CHECK(pattern_opt.total_cost <= grid.objective + 1e-6);
    CHECK(grid.objective - pattern_opt.total_cost <= 1.5);
}

TEST_CASE("oracle rejects oversized instances") {
    Scenario s = load_scenario(testing::fixture("desk33.json"));
    CHECK_THROWS_AS(cent::brute_force_oracle(s), InputError);
    CHECK_THROWS_AS(cent::grid_search_oracle(s, 5), InputError);
}

TEST_CASE("enabling an extra value stream never raises the optimum") {
    Scenario s = load_scenario(testing::fixture("twin2.json"));
    auto cost = [&](bool b2b, bool b2g, bool et) {
        Scenario v = s;
        v.flags = {b2b, b2g, et};
        return cent::solve_centralized(v).total_cost;
    };
    double none = cost(false, false, false);
    double b2b_only = cost(true, false, false);
    double b2b_b2g = cost(true, true, false);
    double all = cost(true, true, true);
    CHECK(b2b_only <= none + 1e-6);
    CHECK(b2b_b2g <= b2b_only + 1e-6);
    CHECK(all <= b2b_b2g + 1e-6);
}

TEST_CASE("breakdown closure holds on the solved fixture") {
    Scenario s = load_scenario(testing::fixture("twin2.json"));
    GlobalSolution g = cent::solve_centralized(s);
    double recomputed = g.aggregate.grid_cost + g.aggregate.battery_degradation +
                        g.aggregate.et_net_cost - g.aggregate.b2g_revenue -
                        g.aggregate.pv_revenue +
                        (s.include_discomfort ? g.aggregate.discomfort_cost : 0.0);
    CHECK(g.total_cost == doctest::Approx(recomputed).epsilon(1e-12));
}

}  // TEST_SUITE
