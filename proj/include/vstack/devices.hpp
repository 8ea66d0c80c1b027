#pragma once

#include <span>
#include <string>
#include <vector>

#include "vstack/scenario.hpp"
#include "vstack/solution.hpp"

namespace vstack::dev {

/// Stored energy after one slot of charging at p_c and discharging at p_d (kW).
double battery_step(double b_prev, double p_c, double p_d, const BatteryParams& p, double dt);

/// Indoor temperature after one slot, first-order thermal model.
double hvac_step(double t_prev, double t_out, double p_ac, const HvacParams& p, double dt);

/// Quadratic throughput proxy for battery wear, AUD over the horizon.
double degradation_cost(std::span<const double> p_c, std::span<const double> p_d,
                        double degradation_coeff, double dt);

/// Quadratic comfort-band penalty, AUD over the horizon.
double discomfort_cost(std::span<const double> t_in, double t_pref, double discomfort_coeff);

/// Energy (and, under TPT, peak demand) cost of the grid purchase series.
double grid_cost(const Tariff& tariff, std::span<const double> p_grid, double dt);

struct Revenue {
    double pv_feed = 0.0;      // feed-in revenue, AUD
    double b2g = 0.0;          // battery-to-grid revenue, AUD
    double et_net_cost = 0.0;  // market buys minus sells, AUD
};

Revenue revenue_terms(std::span<const double> p_re_feed, std::span<const double> p_b2g,
                      std::span<const double> p_ets, std::span<const double> p_etb,
                      const Tariff& tariff, double dt);

/// One constraint violation found by a feasibility check.
struct Violation {
    std::string name;     // e.g. "community[2].power_balance[t=5]"
    double magnitude = 0; // how far outside the constraint, natural units
};

/// Checks one community's decision against its own constraint set (battery
/// and thermal recursions, boxes, power balance, discharge split, stream
/// limits, and charge/discharge + sell/buy complementarity).
std::vector<Violation> check_community_feasibility(const Scenario& s, int i,
                                                   const CommunityDecision& d, double tol);

/// Checks a whole-system solution against every constraint of the one-shot
/// problem: all community constraints, the per-slot market balance, and the
/// network recursions and boxes. `tol` applies in each constraint's natural
/// units (kW, kWh, degC, p.u.).
std::vector<Violation> check_feasibility(const Scenario& s, const GlobalSolution& g, double tol);

/// Community i's standalone cost (grid + degradation + ET net - B2G - feed-in
/// revenue, plus discomfort when the scenario counts it), recomputed from the
/// decision's raw series.
double community_cost(const Scenario& s, int i, const CommunityDecision& d);

/// Fills g.breakdown / g.aggregate / g.total_cost and every
/// CommunityDecision::objective_value from raw series.
void recompute_costs(const Scenario& s, GlobalSolution& g);

}  // namespace vstack::dev
