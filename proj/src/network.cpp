#include "vstack/network.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>

namespace vstack::net {

namespace fs = std::filesystem;

FeederModel rebuild_tree(FeederModel f) {
    const int n = f.node_count;
    const int nb = f.branch_count();
    if (n < 1) throw InputError("feeder", "no nodes");

    // per-branch defects first (self-loops, duplicates), then the tree shape
    std::set<std::pair<int, int>> seen;
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));  // (neighbor, branch)
    for (int bidx = 0; bidx < nb; ++bidx) {
        const Branch& br = f.branches[static_cast<size_t>(bidx)];
        if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
            throw InputError("feeder", "branch " + std::to_string(bidx) + ": node out of range");
        if (br.from == br.to)
            throw InputError("feeder", "branch " + std::to_string(bidx) + ": cycle detected (" +
                                           std::to_string(br.from) + "->" +
                                           std::to_string(br.to) + ")");
        auto key = std::minmax(br.from, br.to);
        if (!seen.insert({key.first, key.second}).second)
            throw InputError("feeder", "duplicate branch between nodes " +
                                           std::to_string(key.first) + " and " +
                                           std::to_string(key.second));
        adj[static_cast<size_t>(br.from)].push_back({br.to, bidx});
        adj[static_cast<size_t>(br.to)].push_back({br.from, bidx});
    }
    if (nb != n - 1)
        throw InputError("feeder", "a tree on " + std::to_string(n) + " nodes needs " +
                                       std::to_string(n - 1) + " branches, got " +
                                       std::to_string(nb));

    f.parent.assign(static_cast<size_t>(n), -1);
    f.branch_into.assign(static_cast<size_t>(n), -1);
    f.topo_order.clear();
    std::vector<char> visited(static_cast<size_t>(n), 0);
    std::deque<int> queue{0};
    visited[0] = 1;
    while (!queue.empty()) {
        int node = queue.front();
        queue.pop_front();
        f.topo_order.push_back(node);
        for (auto [next, bidx] : adj[static_cast<size_t>(node)]) {
            if (visited[static_cast<size_t>(next)]) {
                if (next != f.parent[static_cast<size_t>(node)])
                    throw InputError("feeder", "cycle detected through node " +
                                                   std::to_string(next));
                continue;
            }
            visited[static_cast<size_t>(next)] = 1;
            f.parent[static_cast<size_t>(next)] = node;
            f.branch_into[static_cast<size_t>(next)] = bidx;
            // Orient the stored branch parent -> child.
            Branch& br = f.branches[static_cast<size_t>(bidx)];
            if (br.from != node) std::swap(br.from, br.to);
            queue.push_back(next);
        }
    }
    for (int v = 0; v < n; ++v)
        if (!visited[static_cast<size_t>(v)])
            throw InputError("feeder", "node " + std::to_string(v) + " is disconnected");
    return f;
}

FeederModel load_feeder(const fs::path& path, double s_base_kva, double v_base_kv, double v_min,
                        double v_max, double v_ref) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string(), "cannot open feeder file");
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string(), "empty feeder file");
    auto header = split_csv_line(line);
    const std::vector<std::string> expected{"from", "to", "r_ohm", "x_ohm", "pmax_kw",
                                            "qmax_kvar"};
    if (header != expected)
        throw InputError(path.string(), "expected header 'from,to,r_ohm,x_ohm,pmax_kw,qmax_kvar'");

    FeederModel f;
    f.s_base_kva = s_base_kva;
    f.v_base_kv = v_base_kv;
    f.v_min = v_min;
    f.v_max = v_max;
    f.v_ref = v_ref;
    if (!(s_base_kva > 0) || !(v_base_kv > 0))
        throw InputError(path.string(), "per-unit bases must be positive");
    // z_base in ohms from kV and kVA bases
    const double z_base = 1000.0 * v_base_kv * v_base_kv / s_base_kva;

    int max_node = 0;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        auto cells = split_csv_line(line);
        if (cells.size() != 6)
            throw InputError(path.string(), "row " + std::to_string(row) + ": expected 6 columns");
        Branch br;
        try {
            br.from = std::stoi(cells[0]);
            br.to = std::stoi(cells[1]);
            br.r_pu = std::stod(cells[2]) / z_base;
            br.x_pu = std::stod(cells[3]) / z_base;
            double pmax = std::stod(cells[4]);
            double qmax = std::stod(cells[5]);
            br.p_max_pu = pmax / s_base_kva;
            br.p_min_pu = -br.p_max_pu;
            br.q_max_pu = qmax / s_base_kva;
            br.q_min_pu = -br.q_max_pu;
        } catch (const std::exception&) {
            throw InputError(path.string(), "row " + std::to_string(row) + ": not numeric");
        }
        max_node = std::max({max_node, br.from, br.to});
        f.branches.push_back(br);
    }
    f.node_count = max_node + 1;
    return rebuild_tree(std::move(f));
}

NetworkState solve_flow(const FeederModel& f, const NodeInjection& inj) {
    const int n = f.node_count;
    const int nb = f.branch_count();
    if (inj.active.rows() != n || inj.reactive.rows() != n)
        throw InputError("injections", "expected " + std::to_string(n) + " node rows");
    const int H = static_cast<int>(inj.active.cols());
    if (inj.reactive.cols() != H) throw InputError("injections", "active/reactive slot mismatch");

    NetworkState st;
    st.branch_active = Eigen::MatrixXd::Zero(nb, H);
    st.branch_reactive = Eigen::MatrixXd::Zero(nb, H);
    st.node_voltage = Eigen::MatrixXd::Constant(n, H, f.v_ref);

    // Subtree aggregation: walk nodes leaf-to-root, adding each node's own
    // withdrawal plus its children's branch flows onto the branch above it.
    for (auto it = f.topo_order.rbegin(); it != f.topo_order.rend(); ++it) {
        int node = *it;
        int bidx = f.branch_into[static_cast<size_t>(node)];
        if (bidx < 0) continue;  // root
        st.branch_active.row(bidx) += inj.active.row(node) / f.s_base_kva;
        st.branch_reactive.row(bidx) += inj.reactive.row(node) / f.s_base_kva;
        int up = f.branch_into[static_cast<size_t>(f.parent[static_cast<size_t>(node)])];
        if (up >= 0) {
            st.branch_active.row(up) += st.branch_active.row(bidx);
            st.branch_reactive.row(up) += st.branch_reactive.row(bidx);
        }
    }

    // Voltage drop accumulates root-to-leaf.
    for (int node : f.topo_order) {
        int bidx = f.branch_into[static_cast<size_t>(node)];
        if (bidx < 0) continue;
        const Branch& br = f.branches[static_cast<size_t>(bidx)];
        int parent = f.parent[static_cast<size_t>(node)];
        st.node_voltage.row(node) =
            st.node_voltage.row(parent) -
            (br.r_pu * st.branch_active.row(bidx) + br.x_pu * st.branch_reactive.row(bidx)) /
                f.v_ref;
    }
    return st;
}

LinearConstraintBlock network_constraints(const FeederModel& f, int slot_count) {
    const int n = f.node_count;
    const int nb = f.branch_count();
    const int H = slot_count;

    LinearConstraintBlock blk;
    blk.slot_count = H;
    blk.branch_count = nb;
    blk.node_count = n;
    blk.off_p = 0;
    blk.off_q = nb * H;
    blk.off_v = 2 * nb * H;
    blk.off_inj_p = blk.off_v + (n - 1) * H;
    blk.off_inj_q = blk.off_inj_p + (n - 1) * H;
    blk.n_cols = blk.off_inj_q + (n - 1) * H;

    blk.col_lower = Vec::Constant(blk.n_cols, -kInf);
    blk.col_upper = Vec::Constant(blk.n_cols, kInf);
    for (int b = 0; b < nb; ++b) {
        const Branch& br = f.branches[static_cast<size_t>(b)];
        for (int t = 0; t < H; ++t) {
            blk.col_lower[blk.col_p(b, t)] = br.p_min_pu;
            blk.col_upper[blk.col_p(b, t)] = br.p_max_pu;
            blk.col_lower[blk.col_q(b, t)] = br.q_min_pu;
            blk.col_upper[blk.col_q(b, t)] = br.q_max_pu;
        }
    }
    for (int node = 1; node < n; ++node)
        for (int t = 0; t < H; ++t) {
            blk.col_lower[blk.col_v(node, t)] = f.v_min;
            blk.col_upper[blk.col_v(node, t)] = f.v_max;
        }

    // Children of each node, for the flow-conservation rows.
    std::vector<std::vector<int>> child_branches(static_cast<size_t>(n));
    for (int node = 1; node < n; ++node)
        child_branches[static_cast<size_t>(f.parent[static_cast<size_t>(node)])].push_back(
            f.branch_into[static_cast<size_t>(node)]);

    // Rows: for every branch b feeding node j and slot t,
    //   p_b - sum_{c in children(j)} p_c - inj_p_j = 0        (and same for q)
    //   v_j - v_parent(j) + (R_b p_b + X_b q_b)/v_ref = 0
    const int rows = 3 * nb * H;
    blk.rhs = Vec::Zero(rows);
    int r = 0;
    auto add = [&](int row, int col, double coef) { blk.rows.emplace_back(row, col, coef); };
    for (int b = 0; b < nb; ++b) {
        const Branch& br = f.branches[static_cast<size_t>(b)];
        int j = br.to;
        for (int t = 0; t < H; ++t) {
            add(r, blk.col_p(b, t), 1.0);
            for (int c : child_branches[static_cast<size_t>(j)]) add(r, blk.col_p(c, t), -1.0);
            add(r, blk.col_inj_p(j, t), -1.0);
            ++r;
        }
    }
    for (int b = 0; b < nb; ++b) {
        const Branch& br = f.branches[static_cast<size_t>(b)];
        int j = br.to;
        for (int t = 0; t < H; ++t) {
            add(r, blk.col_q(b, t), 1.0);
            for (int c : child_branches[static_cast<size_t>(j)]) add(r, blk.col_q(c, t), -1.0);
            add(r, blk.col_inj_q(j, t), -1.0);
            ++r;
        }
    }
    for (int b = 0; b < nb; ++b) {
        const Branch& br = f.branches[static_cast<size_t>(b)];
        int j = br.to;
        int parent = br.from;
        for (int t = 0; t < H; ++t) {
            add(r, blk.col_v(j, t), 1.0);
            if (parent != 0)
                add(r, blk.col_v(parent, t), -1.0);
            else
                blk.rhs[r] += f.v_ref;
            add(r, blk.col_p(b, t), br.r_pu / f.v_ref);
            add(r, blk.col_q(b, t), br.x_pu / f.v_ref);
            ++r;
        }
    }
    return blk;
}

}  // namespace vstack::net
