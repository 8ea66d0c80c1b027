#pragma once

#include <optional>
#include <vector>

#include "vstack/qp.hpp"
#include "vstack/scenario.hpp"
#include "vstack/solution.hpp"

namespace vstack::sub {

/// Column layout of one community's QP. All flow variables are kW series of
/// length H; under TPT one epigraph variable and H slack columns are appended
/// for the peak-demand charge.
struct CommunityLayout {
    int H = 0;
    bool tpt = false;
    // Exchange blocks first, in the wire order [B2G, ETS, ETB, GRID, FEED],
    // so columns 0..5H-1 line up with ExchangeVector::flat.
    int b2g = 0, ets = 0, etb = 0, grid = 0, feed = 0;
    int re_local = 0, batc = 0, batd = 0, b2b = 0, ac = 0, t_in = 0, soc = 0, s_pv = 0;
    int z_peak = -1, s_peak = -1;
    int n = 0;

    static CommunityLayout make(int H, bool tpt);
};

// Assembly pieces shared with the whole-system builder; the offsets let a
// caller place a community block anywhere in a larger problem.
void append_community_rows_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                               int row_off, std::vector<Triplet>& trips, Vec& rhs);
void fill_community_bounds_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                               Vec& l, Vec& u);
void apply_pattern_bounds_for(const Scenario& s, int i, const CommunityLayout& lay, int col_off,
                              const DirectionPattern& pat, Vec& l, Vec& u);
void fill_community_objective_for(const Scenario& s, int i, const CommunityLayout& lay,
                                  int col_off, Vec& p_diag, Vec& c_lin, double& constant);
void fill_community_names_for(const CommunityLayout& lay, int col_off, const std::string& prefix,
                              std::vector<std::string>& names);
int community_row_count(const CommunityLayout& lay);

/// Builds community i's sub-problem: its standalone cost plus the dual and
/// proximal coupling terms on the exchange vector, over the community's own
/// constraint set. With `pattern` empty the charge/discharge and sell/buy
/// exclusivity bounds are relaxed to simultaneous boxes.
qp::QuadraticProgram build_community_qp(const Scenario& s, int i, const Vec& duals,
                                        const Vec& aux, double rho,
                                        const std::optional<DirectionPattern>& pattern);

/// Relax-fix-resolve solve of community i's sub-problem: solve the relaxed
/// QP, fix the direction pattern from the relaxed point (discharge wins only
/// if strictly larger; ties keep x=0/y=0), then re-solve with the pattern
/// pinned. The returned decision satisfies exclusivity exactly.
CommunityDecision solve_community(const Scenario& s, int i, const Vec& duals, const Vec& aux,
                                  double rho, const qp::SolveOptions& opts = {});

/// Extracts a CommunityDecision from a solved variable vector laid out per
/// CommunityLayout (shared by the community and centralized paths).
CommunityDecision extract_decision(const Scenario& s, int i, const CommunityLayout& lay,
                                   const Vec& x, int col_offset = 0);

/// Direction fixing rule used by both the distributed and centralized paths.
DirectionPattern fix_pattern(const CommunityLayout& lay, const Vec& x, int col_offset = 0);

/// Incremental interface used by the ADMM loop: one cached solver per
/// community, re-solved each iteration with updated (duals, aux) and
/// re-pinned directions.
class CommunitySolver {
public:
    CommunitySolver(const Scenario& s, int i, double rho, const qp::SolveOptions& opts = {});

    /// Relax-fix-resolve with the current duals and auxiliary targets.
    CommunityDecision solve(const Vec& duals, const Vec& aux);

    /// Re-solve with the exchange vector pinned to `target` (used for the
    /// final consistency pass). Returns nullopt if the pinned problem is
    /// infeasible.
    std::optional<CommunityDecision> solve_pinned(const Vec& duals, const Vec& target);

    const CommunityLayout& layout() const { return lay_; }

private:
    const Scenario& s_;
    int i_;
    double rho_ = 0.1;
    CommunityLayout lay_;
    qp::SolveOptions opts_;
    Vec relaxed_l_, relaxed_u_, rhs_;
    std::optional<qp::Solver> solver_;

    void apply_pattern(Vec& l, Vec& u, const DirectionPattern& pat) const;
};

/// Builds the operator sub-problem: proximal projection of all communities'
/// exchange vectors onto the feeder constraints plus the per-slot market
/// balance. Variable order: [exchange copies, community-major | network block].
qp::QuadraticProgram build_operator_qp(const Scenario& s, const std::vector<Vec>& duals,
                                       const std::vector<Vec>& exchanges, double rho);

/// Cached-factorization operator solver (the constraint matrix never changes
/// across iterations; only the linear cost does).
class OperatorSolver {
public:
    OperatorSolver(const Scenario& s, double rho, const qp::SolveOptions& opts = {});

    /// Returns the auxiliary exchange copies, one length-5H vector per
    /// community, plus the network state at the solution.
    std::vector<Vec> solve(const std::vector<Vec>& duals, const std::vector<Vec>& exchanges);

    /// Network state extracted from the most recent solve.
    const net::NetworkState& network_state() const { return state_; }

private:
    const Scenario& s_;
    double rho_;
    int aux_len_ = 0;
    net::LinearConstraintBlock block_;
    std::optional<qp::Solver> solver_;
    net::NetworkState state_;
};

/// Dual ascent step: duals + rho * (aux - exchange), elementwise.
Vec dual_update(const Vec& duals, const Vec& aux, const Vec& exchange, double rho);

}  // namespace vstack::sub
