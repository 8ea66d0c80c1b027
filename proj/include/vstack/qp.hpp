#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vstack/common.hpp"

namespace vstack::qp {

/// Canonical convex QP:
///   minimize    1/2 x'Px + c'x  (+ objective_constant)
///   subject to  Ax = b,  l <= x <= u
/// P must be symmetric positive semidefinite; entries of l/u may be -inf/+inf.
struct QuadraticProgram {
    int n = 0;
    int m = 0;
    SpMat P;  // n x n, upper part is enough; symmetrized internally
    Vec c;
    SpMat A;  // m x n
    Vec b;
    Vec l;
    Vec u;
    double objective_constant = 0.0;
    std::vector<std::string> var_names;  // optional debug labels

    /// Checks dimensions and l <= u; throws InputError on violation.
    void check() const;

    double objective(const Vec& x) const {
        return 0.5 * x.dot(P.selfadjointView<Eigen::Upper>() * x) + c.dot(x) + objective_constant;
    }

    /// Text dump (dimensions plus triplets) for external cross-checking.
    void dump(const std::filesystem::path& path) const;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible };

struct QpSolution {
    Vec x;  // primal
    Vec y;  // equality duals
    Vec z;  // bound duals (z>0 upper-active, z<0 lower-active)
    SolveStatus status = SolveStatus::MaxIter;
    int iterations = 0;
    double primal_residual = 0.0;  // max(||Ax-b||_inf, box violation)
    double dual_residual = 0.0;    // ||Px + c + A'y + z||_inf
    double objective = 0.0;
    bool polished = false;
};

struct SolveOptions {
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 20000;
    double rho_qp = 0.1;     // initial splitting penalty
    double sigma = 1e-6;     // primal regularization
    double alpha = 1.6;      // over-relaxation
    bool adaptive_rho = true;
    bool polish = true;
    int check_interval = 10;
};

const char* to_string(SolveStatus s);

/// Operator-splitting QP solver with a cached sparse LDL' factorization of
/// the KKT system. The factorization depends only on the sparsity of (P, A),
/// so the linear cost and the bounds can be changed between solves without
/// refactorizing; warm starts carry over automatically.
class Solver {
public:
    Solver(QuadraticProgram qp, SolveOptions opts = {});
    ~Solver();
    Solver(Solver&&) noexcept;
    Solver& operator=(Solver&&) noexcept;

    /// Replace the linear cost (and optionally the constant) before re-solving.
    void update_cost(const Vec& c_new, double constant = 0.0);
    /// Adjust termination accuracy / polish / iteration cap without refactorizing.
    void set_tolerances(double eps_abs, double eps_rel, bool polish, int max_iter = -1);
    /// Replace equality right-hand sides and/or variable bounds.
    void update_bounds(const Vec& b_new, const Vec& l_new, const Vec& u_new);

    QpSolution solve();

    /// Discard the warm-start state (iterates restart from zero).
    void reset_warm_start();

    const QuadraticProgram& problem() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper.
QpSolution solve_qp(const QuadraticProgram& qp, const SolveOptions& opts = {});

/// KKT residuals of a candidate solution (used by tests and by the polish
/// acceptance logic): stationarity, equality residual, box violation and
/// worst complementary-slackness defect.
struct KktReport {
    double stationarity = 0.0;
    double equality = 0.0;
    double box = 0.0;
    double complementarity = 0.0;
    double max_residual() const;
};

KktReport kkt_report(const QuadraticProgram& qp, const Vec& x, const Vec& y, const Vec& z);

}  // namespace vstack::qp
