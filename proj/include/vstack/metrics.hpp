#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vstack/scenario.hpp"
#include "vstack/solution.hpp"

namespace vstack::metrics {

/// Per-community and aggregate cost terms, every entry recomputed from raw
/// series (never trusted from a solver objective).
struct CostBreakdown {
    std::vector<GlobalSolution::Terms> per_community;
    GlobalSolution::Terms aggregate;
    bool include_discomfort = true;

    void write_csv(const std::filesystem::path& path) const;
    nlohmann::json to_json() const;
};

CostBreakdown cost_breakdown(const Scenario& s, const GlobalSolution& g);

/// Marginal contribution of one value stream: the share of the total
/// stacking benefit lost when that stream is removed.
struct StreamContribution {
    std::string stream;        // "B2B", "B2G", "ET"
    double cost_full = 0.0;
    double cost_without = 0.0;
    double cost_none = 0.0;
    double contribution_pct = 0.0;
};

struct MarginalReport {
    std::vector<StreamContribution> streams;
    double cost_full = 0.0;
    double cost_none = 0.0;

    void write_csv(const std::filesystem::path& path) const;
    nlohmann::json to_json() const;
};

/// Solver hook: maps a scenario (with some flag combination) to a converged
/// solution's total cost. Lets callers choose the centralized solver or a
/// distributed run.
using SolveFn = std::function<double(const Scenario&)>;

/// Runs the five solves (full, minus-B2B, minus-B2G, minus-ET, none) and
/// fills the report. Streams disabled in the scenario itself contribute 0.
/// When `normalize_by_full_cost` is set the percentages use the full-stack
/// cost as denominator instead of the total stacking benefit.
MarginalReport marginal_contribution(const Scenario& s, const SolveFn& solve,
                                     bool normalize_by_full_cost = false);

/// |cost_dist - cost_bench| / |cost_bench|. Throws InputError when the
/// benchmark cost is zero.
double optimality_gap(double distributed_cost, double benchmark_cost);

}  // namespace vstack::metrics
