#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "vstack/admm.hpp"
#include "vstack/centralized.hpp"
#include "vstack/metrics.hpp"
#include "vstack/scenario.hpp"

namespace fs = std::filesystem;
using namespace vstack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct CommonOpts {
    std::string scenario_path;
    std::string out_dir;
    double rho = 0.1;
    double eps1 = 0.01;
    double eps2 = 0.01;
    int max_iter = 500;
    std::uint64_t seed = 0;
    std::string latency = "none";
};

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

admm::AdmmOptions make_admm_options(const CommonOpts& o, admm::Mode mode) {
    admm::AdmmOptions a;
    a.rho = o.rho;
    a.eps1 = o.eps1;
    a.eps2 = o.eps2;
    a.max_iter = o.max_iter;
    a.mode = mode;
    a.seed = o.seed;
    return a;
}

int cmd_run(const CommonOpts& o, const std::string& solver_name) {
    Scenario s = load_scenario(o.scenario_path);
    fs::create_directories(o.out_dir);
    const fs::path out(o.out_dir);

    nlohmann::json meta;
    meta["scenario"] = o.scenario_path;
    meta["solver"] = solver_name;

    if (solver_name == "centralized") {
        GlobalSolution g = cent::solve_centralized(s);
        meta["converged"] = true;
        nlohmann::json j = solution_to_json(g);
        j["meta"] = meta;
        write_json(out / "solution.json", j);
        metrics::cost_breakdown(s, g).write_csv(out / "breakdown.csv");
        return kExitOk;
    }

    admm::Mode mode = admm::mode_from_string(solver_name);
    admm::LatencyModel lat = admm::LatencyModel::parse(o.latency, s.community_count(), o.seed);
    if (mode != admm::Mode::Sync && lat.kind() == admm::LatencyModel::Kind::None &&
        mode == admm::Mode::SyncLatency)
        std::cerr << "note: sync-latency with latency 'none' behaves like sync\n";
    admm::RunTrace trace = admm::run(s, make_admm_options(o, mode), lat);

    meta["converged"] = trace.converged;
    meta["iterations"] = trace.iterations_used;
    meta["rho"] = o.rho;
    meta["eps1"] = o.eps1;
    meta["eps2"] = o.eps2;
    meta["seed"] = o.seed;
    meta["latency"] = o.latency;
    nlohmann::json j = solution_to_json(trace.solution);
    j["meta"] = meta;
    write_json(out / "solution.json", j);
    metrics::cost_breakdown(s, trace.solution).write_csv(out / "breakdown.csv");
    trace.write_csv(out / "trace.csv");
    write_json(out / "trace.json", trace.to_json());
    return trace.converged ? kExitOk : kExitNotConverged;
}

int cmd_compare(const CommonOpts& o) {
    Scenario s = load_scenario(o.scenario_path);
    fs::create_directories(o.out_dir);
    admm::LatencyModel lat = admm::LatencyModel::parse(o.latency, s.community_count(), o.seed);

    admm::RunTrace sync = admm::run(s, make_admm_options(o, admm::Mode::Sync),
                                    admm::LatencyModel::none());
    admm::RunTrace synclat = admm::run(s, make_admm_options(o, admm::Mode::SyncLatency), lat);
    admm::RunTrace async = admm::run(s, make_admm_options(o, admm::Mode::Async), lat);

    const size_t rows = std::max(
        {sync.iterations.size(), synclat.iterations.size(), async.iterations.size()});
    std::ofstream out(fs::path(o.out_dir) / "compare.csv");
    out << "iter,sync_r_primal,sync_r_dual,synclat_r_primal,synclat_r_dual,async_r_primal,"
           "async_r_dual\n";
    auto cell = [](const admm::RunTrace& tr, size_t k, bool dual) {
        if (k >= tr.iterations.size()) return std::string();
        return fmt_full(dual ? tr.iterations[k].r_dual : tr.iterations[k].r_primal);
    };
    for (size_t k = 0; k < rows; ++k)
        out << k << ',' << cell(sync, k, false) << ',' << cell(sync, k, true) << ','
            << cell(synclat, k, false) << ',' << cell(synclat, k, true) << ','
            << cell(async, k, false) << ',' << cell(async, k, true) << "\n";

    nlohmann::json j;
    for (auto [name, tr] : {std::pair<const char*, const admm::RunTrace*>{"sync", &sync},
                            {"sync-latency", &synclat},
                            {"async", &async}})
        j[name] = {{"converged", tr->converged},
                   {"iterations", tr->iterations_used},
                   {"total_cost", tr->solution.total_cost}};
    write_json(fs::path(o.out_dir) / "compare_summary.json", j);
    return kExitOk;
}

int cmd_marginal(const CommonOpts& o, const std::string& tariff_kind) {
    Scenario s = load_scenario(o.scenario_path);
    if (tariff_kind == "tou")
        s.tariff.kind = TariffKind::TOU;
    else if (tariff_kind == "tpt")
        s.tariff.kind = TariffKind::TPT;
    else
        throw InputError("tariff", "expected 'tou' or 'tpt'");
    fs::create_directories(o.out_dir);

    metrics::SolveFn solve = [](const Scenario& sc) {
        return cent::solve_centralized(sc).total_cost;
    };
    metrics::MarginalReport report = metrics::marginal_contribution(s, solve);
    report.write_csv(fs::path(o.out_dir) / "marginal.csv");
    write_json(fs::path(o.out_dir) / "marginal.json", report.to_json());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Community-battery value-stacking simulator and solver suite"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string solver_name = "centralized";
    std::string tariff_kind = "tou";

    CLI::App* run = app.add_subcommand("run", "Solve one scenario and write solution artifacts");
    run->add_option("--scenario", o.scenario_path, "scenario bundle (JSON)")->required();
    run->add_option("--solver", solver_name, "centralized | sync | sync-latency | async");
    run->add_option("--rho", o.rho, "consensus penalty");
    run->add_option("--eps1", o.eps1, "primal threshold");
    run->add_option("--eps2", o.eps2, "dual threshold");
    run->add_option("--max-iter", o.max_iter, "iteration cap");
    run->add_option("--seed", o.seed, "latency seed");
    run->add_option("--latency", o.latency, "none | bernoulli:<p> | fixed:<d,...> | trace:<file>");
    run->add_option("--out", o.out_dir, "output directory")->required();

    CLI::App* compare =
        app.add_subcommand("compare", "Run sync, sync-latency and async on one arrival schedule");
    compare->add_option("--scenario", o.scenario_path, "scenario bundle (JSON)")->required();
    compare->add_option("--latency", o.latency, "latency spec for the delayed modes")->required();
    compare->add_option("--rho", o.rho, "consensus penalty");
    compare->add_option("--eps1", o.eps1, "primal threshold");
    compare->add_option("--eps2", o.eps2, "dual threshold");
    compare->add_option("--max-iter", o.max_iter, "iteration cap");
    compare->add_option("--seed", o.seed, "latency seed");
    compare->add_option("--out", o.out_dir, "output directory")->required();

    CLI::App* marginal =
        app.add_subcommand("marginal", "Marginal contribution of each value stream");
    marginal->add_option("--scenario", o.scenario_path, "scenario bundle (JSON)")->required();
    marginal->add_option("--tariff", tariff_kind, "tou | tpt")->required();
    marginal->add_option("--out", o.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    try {
        if (run->parsed()) return cmd_run(o, solver_name);
        if (compare->parsed()) return cmd_compare(o);
        if (marginal->parsed()) return cmd_marginal(o, tariff_kind);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const SolveError& e) {
        std::cerr << "solve error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
