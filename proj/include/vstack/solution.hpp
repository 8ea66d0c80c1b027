#pragma once

#include <string>
#include <vector>

#include "vstack/common.hpp"
#include "vstack/network.hpp"

#include "json.hpp"

namespace vstack {

/// The five per-slot quantities a community shares with the grid operator,
/// flattened to length 5H in block order [B2G, ET sell, ET buy, grid, PV feed].
struct ExchangeVector {
    int H = 0;
    Vec flat;  // length 5*H

    static constexpr int kBlocks = 5;
    enum Block { B2G = 0, ETS = 1, ETB = 2, GRID = 3, FEED = 4 };

    ExchangeVector() = default;
    explicit ExchangeVector(int horizon) : H(horizon), flat(Vec::Zero(5 * horizon)) {}

    double& at(Block b, int t) { return flat[b * H + t]; }
    double at(Block b, int t) const { return flat[b * H + t]; }
    Eigen::VectorBlock<Vec> block(Block b) { return flat.segment(b * H, H); }
    Eigen::VectorBlock<const Vec> block(Block b) const { return flat.segment(b * H, H); }
};

/// Per-slot charge/discharge and sell/buy direction indicators.
/// x[t] = 1 allows discharge (charge pinned to zero); y[t] = 1 allows market
/// sells (buys pinned to zero).
struct DirectionPattern {
    std::vector<int> x;
    std::vector<int> y;

    static DirectionPattern zeros(int H) { return {std::vector<int>(H, 0), std::vector<int>(H, 0)}; }
};

/// One community's full dispatch over the horizon.
struct CommunityDecision {
    ExchangeVector exchange;
    std::vector<double> p_re_local;  // kW
    std::vector<double> p_batc;      // kW
    std::vector<double> p_batd;      // kW
    std::vector<double> p_b2b;       // kW
    std::vector<double> p_ac;        // kW
    std::vector<double> t_in;        // degC
    std::vector<double> b_bats;      // kWh
    DirectionPattern pattern;
    double objective_value = 0.0;    // AUD, recomputed from the series
};

/// Whole-system solution: community decisions plus the operator-side network
/// state and the recomputed cost decomposition.
struct GlobalSolution {
    std::vector<CommunityDecision> communities;
    net::NetworkState network;
    double total_cost = 0.0;  // AUD

    // Per-community terms, recomputed from raw series (AUD).
    struct Terms {
        double grid_cost = 0.0;
        double battery_degradation = 0.0;
        double et_net_cost = 0.0;
        double b2g_revenue = 0.0;
        double pv_revenue = 0.0;
        double discomfort_cost = 0.0;
        double total = 0.0;
    };
    std::vector<Terms> breakdown;
    Terms aggregate;
};

struct Scenario;  // scenario.hpp

/// Builds a GlobalSolution from community decisions: network state evaluated
/// from the exchange vectors and every cost term recomputed from raw series.
GlobalSolution assemble_solution(const Scenario& s, std::vector<CommunityDecision> decisions);

/// JSON export of a GlobalSolution (per-community series arrays plus the cost
/// breakdown); `solution_from_json` restores it.
nlohmann::json solution_to_json(const GlobalSolution& g);
GlobalSolution solution_from_json(const nlohmann::json& j);

}  // namespace vstack
