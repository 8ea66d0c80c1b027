#pragma once

#include "vstack/qp.hpp"
#include "vstack/scenario.hpp"
#include "vstack/solution.hpp"

namespace vstack::cent {

/// Solves the whole-system cost-minimization problem in one shot: every
/// community's constraint set plus the network and market-balance coupling.
/// Directions are handled by the same relax-fix-resolve scheme as the
/// distributed path. Throws SolveError if the instance is infeasible.
GlobalSolution solve_centralized(const Scenario& s, const qp::SolveOptions& opts = {});

/// Exhaustive baselines for tiny instances (<= 2 communities, H <= 3):
///  - `by_patterns` enumerates every direction pattern and solves the
///    pattern-fixed convex QP exactly, returning the best;
///  - `by_grid` runs a full grid search over a `levels`-point discretization
///    of the decision variables (feasible combinations only).
/// Both throw InputError when the instance exceeds the supported size.
GlobalSolution brute_force_oracle(const Scenario& s, const qp::SolveOptions& opts = {});

struct GridSearchResult {
    double objective = kInf;
    bool found = false;
    long long evaluated = 0;   // feasible points scored
    long long enumerated = 0;  // lattice points visited
};

/// Independent second oracle: discretizes each enumerated decision dimension
/// into `levels` points and scores every feasible lattice point.
/// `max_points` caps the lattice size (throws InputError beyond it).
GridSearchResult grid_search_oracle(const Scenario& s, int levels,
                                    long long max_points = 80'000'000LL);

}  // namespace vstack::cent
