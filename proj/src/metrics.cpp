#include "vstack/metrics.hpp"

#include <cmath>
#include <fstream>

#include "vstack/devices.hpp"

namespace vstack::metrics {

using nlohmann::json;

namespace {

json terms_json(const GlobalSolution::Terms& t) {
    return {{"grid_cost", t.grid_cost},
            {"battery_degradation", t.battery_degradation},
            {"et_net_cost", t.et_net_cost},
            {"b2g_revenue", t.b2g_revenue},
            {"pv_revenue", t.pv_revenue},
            {"discomfort_cost", t.discomfort_cost},
            {"total", t.total}};
}

void terms_row(std::ofstream& out, const std::string& label, const GlobalSolution::Terms& t) {
    out << label << ',' << fmt_g(t.grid_cost) << ',' << fmt_g(t.battery_degradation) << ','
        << fmt_g(t.et_net_cost) << ',' << fmt_g(t.b2g_revenue) << ',' << fmt_g(t.pv_revenue) << ','
        << fmt_g(t.discomfort_cost) << ',' << fmt_g(t.total) << "\n";
}

}  // namespace

CostBreakdown cost_breakdown(const Scenario& s, const GlobalSolution& g) {
    // gross-infeasibility guard; finite-tolerance distributed solutions pass
    auto violations = dev::check_feasibility(s, g, 0.5);
    if (!violations.empty())
        throw InputError(violations.front().name,
                         "cost_breakdown called on an infeasible solution");
    GlobalSolution fresh = g;
    dev::recompute_costs(s, fresh);
    CostBreakdown b;
    b.per_community = fresh.breakdown;
    b.aggregate = fresh.aggregate;
    b.include_discomfort = s.include_discomfort;
    return b;
}

void CostBreakdown::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "community,grid_cost,battery_degradation,et_net_cost,b2g_revenue,pv_revenue,"
           "discomfort_cost,total\n";
    for (size_t i = 0; i < per_community.size(); ++i)
        terms_row(out, std::to_string(i), per_community[i]);
    terms_row(out, "total", aggregate);
}

json CostBreakdown::to_json() const {
    json j;
    json arr = json::array();
    for (const auto& t : per_community) arr.push_back(terms_json(t));
    j["per_community"] = arr;
    j["aggregate"] = terms_json(aggregate);
    j["include_discomfort"] = include_discomfort;
    return j;
}

MarginalReport marginal_contribution(const Scenario& s, const SolveFn& solve,
                                     bool normalize_by_full_cost) {
    MarginalReport report;
    report.cost_full = solve(s);

    Scenario none = s;
    none.flags = {false, false, false};
    report.cost_none = solve(none);

    struct Toggle {
        const char* name;
        bool StreamFlags::* member;
    };
    const Toggle toggles[] = {{"B2B", &StreamFlags::enable_b2b},
                              {"B2G", &StreamFlags::enable_b2g},
                              {"ET", &StreamFlags::enable_et}};
    for (const auto& tg : toggles) {
        StreamContribution sc;
        sc.stream = tg.name;
        sc.cost_full = report.cost_full;
        sc.cost_none = report.cost_none;
        if (!(s.flags.*(tg.member))) {
            // stream already absent from the scenario: removing it changes nothing
            sc.cost_without = report.cost_full;
        } else {
            Scenario without = s;
            without.flags.*(tg.member) = false;
            sc.cost_without = solve(without);
        }
        double denom = normalize_by_full_cost ? std::abs(report.cost_full)
                                              : report.cost_none - report.cost_full;
        sc.contribution_pct =
            denom > 1e-9 ? 100.0 * (sc.cost_without - report.cost_full) / denom : 0.0;
        report.streams.push_back(std::move(sc));
    }
    return report;
}

void MarginalReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "stream,cost_full,cost_without,cost_none,contribution_pct\n";
    for (const auto& sc : streams)
        out << sc.stream << ',' << fmt_g(sc.cost_full) << ',' << fmt_g(sc.cost_without) << ','
            << fmt_g(sc.cost_none) << ',' << fmt_g(sc.contribution_pct) << "\n";
}

json MarginalReport::to_json() const {
    json arr = json::array();
    for (const auto& sc : streams)
        arr.push_back({{"stream", sc.stream},
                       {"cost_full", sc.cost_full},
                       {"cost_without", sc.cost_without},
                       {"cost_none", sc.cost_none},
                       {"contribution_pct", sc.contribution_pct}});
    return {{"streams", arr}, {"cost_full", cost_full}, {"cost_none", cost_none}};
}

double optimality_gap(double distributed_cost, double benchmark_cost) {
    if (benchmark_cost == 0.0) throw InputError("optimality_gap", "zero benchmark cost");
    return std::abs(distributed_cost - benchmark_cost) / std::abs(benchmark_cost);
}

}  // namespace vstack::metrics
