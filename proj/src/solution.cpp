#include "vstack/solution.hpp"

#include "vstack/devices.hpp"
#include "vstack/scenario.hpp"

namespace vstack {

using nlohmann::json;
using EV = ExchangeVector;

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = j.size();
    const auto cols = rows ? j.at(0).size() : 0;
    Eigen::MatrixXd m(rows, cols);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                j.at(r).at(c).get<double>();
    return m;
}

json terms_json(const GlobalSolution::Terms& t) {
    return {{"grid_cost", t.grid_cost},
            {"battery_degradation", t.battery_degradation},
            {"et_net_cost", t.et_net_cost},
            {"b2g_revenue", t.b2g_revenue},
            {"pv_revenue", t.pv_revenue},
            {"discomfort_cost", t.discomfort_cost},
            {"total", t.total}};
}

GlobalSolution::Terms terms_from(const json& j) {
    GlobalSolution::Terms t;
    t.grid_cost = j.at("grid_cost").get<double>();
    t.battery_degradation = j.at("battery_degradation").get<double>();
    t.et_net_cost = j.at("et_net_cost").get<double>();
    t.b2g_revenue = j.at("b2g_revenue").get<double>();
    t.pv_revenue = j.at("pv_revenue").get<double>();
    t.discomfort_cost = j.at("discomfort_cost").get<double>();
    t.total = j.at("total").get<double>();
    return t;
}

}  // namespace

GlobalSolution assemble_solution(const Scenario& s, std::vector<CommunityDecision> decisions) {
    GlobalSolution g;
    g.communities = std::move(decisions);
    const int H = s.H();
    net::NodeInjection inj;
    inj.active = Eigen::MatrixXd::Zero(s.feeder.node_count, H);
    inj.reactive = Eigen::MatrixXd::Zero(s.feeder.node_count, H);
    for (size_t i = 0; i < g.communities.size(); ++i) {
        const auto& ex = g.communities[i].exchange;
        const auto& c = s.communities[i];
        for (int t = 0; t < H; ++t) {
            inj.active(c.node_id, t) += ex.at(EV::GRID, t) + ex.at(EV::ETB, t) -
                                        ex.at(EV::ETS, t) - ex.at(EV::B2G, t) - ex.at(EV::FEED, t);
            inj.reactive(c.node_id, t) += c.series.reactive_load[static_cast<size_t>(t)];
        }
    }
    g.network = net::solve_flow(s.feeder, inj);
    dev::recompute_costs(s, g);
    return g;
}

json solution_to_json(const GlobalSolution& g) {
    json j;
    j["total_cost"] = g.total_cost;
    j["aggregate"] = terms_json(g.aggregate);
    json comms = json::array();
    for (size_t i = 0; i < g.communities.size(); ++i) {
        const CommunityDecision& d = g.communities[i];
        json jc;
        jc["series"] = {{"p_b2g", vec_json(d.exchange.block(EV::B2G))},
                        {"p_ets", vec_json(d.exchange.block(EV::ETS))},
                        {"p_etb", vec_json(d.exchange.block(EV::ETB))},
                        {"p_grid", vec_json(d.exchange.block(EV::GRID))},
                        {"p_re_feed", vec_json(d.exchange.block(EV::FEED))},
                        {"p_re_local", json(d.p_re_local)},
                        {"p_batc", json(d.p_batc)},
                        {"p_batd", json(d.p_batd)},
                        {"p_b2b", json(d.p_b2b)},
                        {"p_ac", json(d.p_ac)},
                        {"t_in", json(d.t_in)},
                        {"b_bats", json(d.b_bats)}};
        jc["x"] = json(d.pattern.x);
        jc["y"] = json(d.pattern.y);
        jc["objective_value"] = d.objective_value;
        if (i < g.breakdown.size()) jc["breakdown"] = terms_json(g.breakdown[i]);
        comms.push_back(jc);
    }
    j["communities"] = comms;
    j["network"] = {{"branch_active_pu", matrix_json(g.network.branch_active)},
                    {"branch_reactive_pu", matrix_json(g.network.branch_reactive)},
                    {"node_voltage_pu", matrix_json(g.network.node_voltage)}};
    return j;
}

GlobalSolution solution_from_json(const json& j) {
    GlobalSolution g;
    g.total_cost = j.at("total_cost").get<double>();
    g.aggregate = terms_from(j.at("aggregate"));
    for (const auto& jc : j.at("communities")) {
        CommunityDecision d;
        const json& js = jc.at("series");
        auto vec = [&](const char* key) { return js.at(key).get<std::vector<double>>(); };
        auto grid = vec("p_grid");
        const int H = static_cast<int>(grid.size());
        d.exchange = ExchangeVector(H);
        auto fill = [&](EV::Block blk, const char* key) {
            auto v = js.at(key).get<std::vector<double>>();
            for (int t = 0; t < H; ++t) d.exchange.at(blk, t) = v[static_cast<size_t>(t)];
        };
        fill(EV::B2G, "p_b2g");
        fill(EV::ETS, "p_ets");
        fill(EV::ETB, "p_etb");
        fill(EV::GRID, "p_grid");
        fill(EV::FEED, "p_re_feed");
        d.p_re_local = vec("p_re_local");
        d.p_batc = vec("p_batc");
        d.p_batd = vec("p_batd");
        d.p_b2b = vec("p_b2b");
        d.p_ac = vec("p_ac");
        d.t_in = vec("t_in");
        d.b_bats = vec("b_bats");
        d.pattern.x = jc.at("x").get<std::vector<int>>();
        d.pattern.y = jc.at("y").get<std::vector<int>>();
        d.objective_value = jc.at("objective_value").get<double>();
        if (jc.contains("breakdown")) g.breakdown.push_back(terms_from(jc.at("breakdown")));
        g.communities.push_back(std::move(d));
    }
    const json& jn = j.at("network");
    g.network.branch_active = matrix_from(jn.at("branch_active_pu"));
    g.network.branch_reactive = matrix_from(jn.at("branch_reactive_pu"));
    g.network.node_voltage = matrix_from(jn.at("node_voltage_pu"));
    return g;
}

}  // namespace vstack
