#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vstack/qp.hpp"
#include "vstack/scenario.hpp"
#include "vstack/solution.hpp"

namespace vstack::admm {

enum class Mode { Sync, SyncLatency, Async };

Mode mode_from_string(const std::string& name);
const char* to_string(Mode m);

struct AdmmOptions {
    double rho = 0.1;       // consensus penalty
    double eps1 = 0.01;     // primal threshold, kW
    double eps2 = 0.01;     // dual threshold
    int max_iter = 500;
    Mode mode = Mode::Sync;
    std::uint64_t seed = 0;
    bool warm_start = true;  // init aux copies from standalone solves
    qp::SolveOptions qp_opts{};
};

/// Decides which communities' messages arrive each iteration. Deliveries are
/// a pure function of (seed, iteration, community), so the same model object
/// produces identical arrival schedules across runs and across modes.
class LatencyModel {
public:
    enum class Kind { None, Bernoulli, FixedDelay, Trace };

    static LatencyModel none();
    static LatencyModel bernoulli(double p_delay, std::uint64_t seed);
    static LatencyModel fixed_delay(std::vector<int> delays);
    /// Reads an arrival schedule CSV (`iter,community_id`). The schedule is
    /// replayed cyclically past its last iteration. Every community must
    /// appear at least once every `window` iterations.
    static LatencyModel from_trace(const std::filesystem::path& path, int community_count,
                                   int window = 10);
    /// Parses the CLI mini-grammar: none | bernoulli:<p> | fixed:<d1,d2,...>
    /// | trace:<file>.
    static LatencyModel parse(const std::string& spec, int community_count,
                              std::uint64_t seed);

    bool delivers(int iter, int community) const;
    Kind kind() const { return kind_; }

private:
    Kind kind_ = Kind::None;
    double p_delay_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<int> delays_;
    std::vector<std::set<int>> trace_;  // arrivals[iter] = set of communities
    int period_ = 0;
};

struct IterationRecord {
    int iter = 0;
    double r_primal = 0.0;
    double r_dual = 0.0;
    double objective = 0.0;       // sum of community costs at current decisions
    std::vector<int> active;      // communities whose update arrived
    double wall_time_s = 0.0;     // cumulative
};

struct RunTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    int iterations_used = 0;
    double final_r_primal = 0.0;
    double final_r_dual = 0.0;
    GlobalSolution solution;
    double rebalance_residual = 0.0;  // market imbalance left after repair, kW

    void write_csv(const std::filesystem::path& path) const;
    nlohmann::json to_json() const;
};

/// Runs distributed consensus iterations until both residual thresholds are
/// met or max_iter is reached. Sync updates every community each iteration;
/// Async reuses the last received exchange vector for delayed communities;
/// SyncLatency substitutes zero for them.
RunTrace run(const Scenario& s, const AdmmOptions& opts, const LatencyModel& latency);

/// Residual pair used for termination: max-norm exchange disagreement and the
/// scaled drift of the operator's auxiliary copies.
std::pair<double, double> residuals(const std::vector<Vec>& aux,
                                    const std::vector<Vec>& aux_prev,
                                    const std::vector<Vec>& exchange, double rho);

}  // namespace vstack::admm
