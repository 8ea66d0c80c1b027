#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vstack/common.hpp"

namespace vstack::net {

/// One oriented branch of the radial feeder, parent -> child, impedances and
/// flow limits already converted to per-unit.
struct Branch {
    int from = 0;
    int to = 0;
    double r_pu = 0.0;
    double x_pu = 0.0;
    double p_min_pu = -kInf;
    double p_max_pu = kInf;
    double q_min_pu = -kInf;
    double q_max_pu = kInf;

    friend bool operator==(const Branch&, const Branch&) = default;
};

/// Radial distribution feeder rooted at node 0 (the substation). Branches are
/// stored in topological order (parent before child) so the flow and voltage
/// recursions can run as single passes.
struct FeederModel {
    int node_count = 0;
    std::vector<Branch> branches;      // branch b feeds node branches[b].to
    std::vector<int> parent;           // parent[node], -1 at the root
    std::vector<int> branch_into;      // branch index feeding node, -1 at root
    std::vector<int> topo_order;       // nodes, root first
    double v_min = 0.95;
    double v_max = 1.05;
    double v_ref = 1.0;                // substation voltage, p.u.
    double s_base_kva = 1000.0;
    double v_base_kv = 12.66;

    int branch_count() const { return static_cast<int>(branches.size()); }
    double kw_to_pu(double kw) const { return kw / s_base_kva; }

    friend bool operator==(const FeederModel&, const FeederModel&) = default;
};

/// Net nodal withdrawals, in kW / kvar, shape (node_count x H). Positive
/// active entries draw power from the feeder; exports are negative.
struct NodeInjection {
    Eigen::MatrixXd active;    // kW
    Eigen::MatrixXd reactive;  // kvar
};

/// Branch flows and node voltages, per-unit, shapes (branches x H) and
/// (nodes x H). Voltage row 0 is the fixed substation reference.
struct NetworkState {
    Eigen::MatrixXd branch_active;
    Eigen::MatrixXd branch_reactive;
    Eigen::MatrixXd node_voltage;
};

/// Sparse linear description of the feeder physics over a horizon, in the
/// canonical equality + variable-box format consumed by the QP layer.
///
/// Column layout (all per-unit, slot index fastest within an entity):
///   [branch p | branch q | node v (non-root) | node inj_p | node inj_q]
/// Injection columns exist for every non-root node; callers pin the ones
/// they do not drive.
struct LinearConstraintBlock {
    int slot_count = 0;
    int n_cols = 0;
    std::vector<Triplet> rows;  // equality coefficients
    Vec rhs;                    // equality right-hand sides
    Vec col_lower;
    Vec col_upper;

    int off_p = 0, off_q = 0, off_v = 0, off_inj_p = 0, off_inj_q = 0;
    int branch_count = 0, node_count = 0;

    int col_p(int branch, int t) const { return off_p + branch * slot_count + t; }
    int col_q(int branch, int t) const { return off_q + branch * slot_count + t; }
    // `node` is 1..node_count-1 (the root has no voltage variable)
    int col_v(int node, int t) const { return off_v + (node - 1) * slot_count + t; }
    int col_inj_p(int node, int t) const { return off_inj_p + (node - 1) * slot_count + t; }
    int col_inj_q(int node, int t) const { return off_inj_q + (node - 1) * slot_count + t; }
    int row_count() const { return static_cast<int>(rhs.size()); }
};

/// Parses a feeder topology CSV (`from,to,r_ohm,x_ohm,pmax_kw,qmax_kvar`),
/// validates that the graph is a tree rooted at node 0, and converts
/// impedances and limits to per-unit.
FeederModel load_feeder(const std::filesystem::path& path, double s_base_kva = 1000.0,
                        double v_base_kv = 12.66, double v_min = 0.95, double v_max = 1.05,
                        double v_ref = 1.0);

/// Orients branches away from node 0 and recomputes parent/topological data,
/// validating that the graph is a tree (throws InputError otherwise).
FeederModel rebuild_tree(FeederModel f);

/// Evaluates branch flows by subtree aggregation and node voltages by the
/// root-to-leaf linear recursion. Pure evaluation; no bounds are enforced.
NetworkState solve_flow(const FeederModel& f, const NodeInjection& inj);

/// Emits the flow/voltage recursion equalities and the branch/voltage boxes
/// for `slot_count` slots.
LinearConstraintBlock network_constraints(const FeederModel& f, int slot_count);

}  // namespace vstack::net
