#include "doctest.h"

#include <fstream>

#include "helpers.hpp"
#include "vstack/qp.hpp"

using namespace vstack;

namespace {

qp::QuadraticProgram diag_qp(std::vector<double> pdiag, std::vector<double> c,
                             std::vector<double> l, std::vector<double> u) {
    qp::QuadraticProgram p;
    p.n = static_cast<int>(pdiag.size());
    p.m = 0;
    std::vector<Triplet> t;
    for (int j = 0; j < p.n; ++j)
        if (pdiag[static_cast<size_t>(j)] != 0.0)
            t.emplace_back(j, j, pdiag[static_cast<size_t>(j)]);
    p.P = SpMat(p.n, p.n);
    p.P.setFromTriplets(t.begin(), t.end());
    p.c = Eigen::Map<Vec>(c.data(), p.n);
    p.A = SpMat(0, p.n);
    p.b = Vec(0);
    p.l = Eigen::Map<Vec>(l.data(), p.n);
    p.u = Eigen::Map<Vec>(u.data(), p.n);
    return p;
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("active lower bound: min x^2 subject to x >= 1") {
    auto p = diag_qp({2.0}, {0.0}, {1.0}, {kInf});
    auto s = qp::solve_qp(p);
    REQUIRE(s.status == qp::SolveStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.z[0] == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("already-feasible target: projection onto a zero-sum plane") {
    qp::QuadraticProgram p;
    p.n = 2;
    p.m = 1;
    std::vector<Triplet> t{{0, 0, 1.0}, {1, 1, 1.0}};
    p.P = SpMat(2, 2);
    p.P.setFromTriplets(t.begin(), t.end());
    p.c = Vec(2);
    p.c << -1.0, 1.0;  // distance to the point (1, -1)
    std::vector<Triplet> a{{0, 0, 1.0}, {0, 1, 1.0}};
    p.A = SpMat(1, 2);
    p.A.setFromTriplets(a.begin(), a.end());
    p.b = Vec::Zero(1);
    p.l = Vec::Constant(2, -kInf);
    p.u = Vec::Constant(2, kInf);
    auto s = qp::solve_qp(p);
    REQUIRE(s.status == qp::SolveStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.x[1] == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("matches the dense KKT oracle on random equality-constrained QPs") {
    Rng rng(101);
    for (int k = 0; k < 20; ++k) {
        auto p = testing::random_eq_qp(rng, 40, false);
        CAPTURE(k);
        auto s = qp::solve_qp(p);
        REQUIRE(s.status == qp::SolveStatus::Optimal);
        auto [x_ref, y_ref] = testing::dense_kkt_solve(p);
        CHECK((s.x - x_ref).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("KKT conditions hold on bounded solves") {
    Rng rng(202);
    for (int k = 0; k < 30; ++k) {
        auto p = testing::random_eq_qp(rng, 30, true);
        CAPTURE(k);
        auto s = qp::solve_qp(p);
        if (s.status != qp::SolveStatus::Optimal) continue;  // some draws are infeasible
        auto rep = qp::kkt_report(p, s.x, s.y, s.z);
        CHECK(rep.stationarity < 1e-5);
        CHECK(rep.equality < 1e-6);
        CHECK(rep.box < 1e-6);
        CHECK(rep.complementarity < 1e-5);
    }
}

TEST_CASE("argmin is invariant under positive objective rescaling") {
    Rng rng(303);
    auto p = testing::random_eq_qp(rng, 25, true);
    auto s1 = qp::solve_qp(p);
    REQUIRE(s1.status == qp::SolveStatus::Optimal);
    qp::QuadraticProgram scaled = p;
    const double lambda = 37.5;
    scaled.P = SpMat(lambda * p.P);
    scaled.c = lambda * p.c;
    auto s2 = qp::solve_qp(scaled);
    REQUIRE(s2.status == qp::SolveStatus::Optimal);
    CHECK((s1.x - s2.x).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("objective at the solution beats random feasible probes") {
    Rng rng(404);
    auto p = testing::random_eq_qp(rng, 20, true);
    // drop equality rows so probes are easy to project (box-only problem)
    p.m = 0;
    p.A = SpMat(0, p.n);
    p.b = Vec(0);
    auto s = qp::solve_qp(p);
    REQUIRE(s.status == qp::SolveStatus::Optimal);
    for (int k = 0; k < 100; ++k) {
        Vec probe(p.n);
        for (int j = 0; j < p.n; ++j) {
            double lo = std::isfinite(p.l[j]) ? p.l[j] : -5.0;
            double hi = std::isfinite(p.u[j]) ? p.u[j] : 5.0;
            probe[j] = rng.uniform(lo, hi);
        }
        CHECK(p.objective(s.x) <= p.objective(probe) + 1e-9);
    }
}

TEST_CASE("contradictory equalities produce an infeasibility certificate") {
    qp::QuadraticProgram p;
    p.n = 2;
    p.m = 2;
    std::vector<Triplet> t{{0, 0, 1.0}, {1, 1, 1.0}};
    p.P = SpMat(2, 2);
    p.P.setFromTriplets(t.begin(), t.end());
    p.c = Vec::Zero(2);
    std::vector<Triplet> a{{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}};
    p.A = SpMat(2, 2);
    p.A.setFromTriplets(a.begin(), a.end());
    p.b = Vec(2);
    p.b << 1.0, 2.0;  // x1+x2 = 1 and = 2
    p.l = Vec::Constant(2, -kInf);
    p.u = Vec::Constant(2, kInf);
    auto s = qp::solve_qp(p);
    CHECK(s.status == qp::SolveStatus::Infeasible);
}

TEST_CASE("bound-versus-equality conflicts are detected as infeasible") {
    qp::QuadraticProgram p;
    p.n = 2;
    p.m = 1;
    std::vector<Triplet> t{{0, 0, 2.0}, {1, 1, 2.0}};
    p.P = SpMat(2, 2);
    p.P.setFromTriplets(t.begin(), t.end());
    p.c = Vec::Zero(2);
    std::vector<Triplet> a{{0, 0, 1.0}, {0, 1, 1.0}};
    p.A = SpMat(1, 2);
    p.A.setFromTriplets(a.begin(), a.end());
    p.b = Vec::Constant(1, 5.0);
    p.l = Vec::Zero(2);
    p.u = Vec::Ones(2);  // max feasible sum is 2 < 5
    auto s = qp::solve_qp(p);
    CHECK(s.status == qp::SolveStatus::Infeasible);
}

TEST_CASE("an inverted box is rejected at construction") {
    auto p = diag_qp({1.0}, {0.0}, {2.0}, {1.0});
    CHECK_THROWS_AS(qp::solve_qp(p), InputError);
}

TEST_CASE("iteration cap reports MaxIter") {
    Rng rng(505);
    auto p = testing::random_eq_qp(rng, 40, true);
    qp::SolveOptions o;
    o.max_iter = 3;
    o.polish = false;
    o.check_interval = 1;
    auto s = qp::solve_qp(p, o);
    CHECK(s.status == qp::SolveStatus::MaxIter);
    CHECK(s.iterations == 3);
}

TEST_CASE("warm-started re-solves after cost and bound updates stay correct") {
    Rng rng(606);
    auto p = testing::random_eq_qp(rng, 20, true);
    qp::Solver solver(p);
    auto s1 = solver.solve();
    REQUIRE(s1.status == qp::SolveStatus::Optimal);
    // shift the cost and re-solve; compare against a fresh solve
    qp::QuadraticProgram p2 = p;
    for (int j = 0; j < p.n; ++j) p2.c[j] += rng.uniform(-1.0, 1.0);
    solver.update_cost(p2.c);
    auto s2 = solver.solve();
    auto fresh = qp::solve_qp(p2);
    REQUIRE(s2.status == qp::SolveStatus::Optimal);
    CHECK(std::abs(s2.objective - fresh.objective) < 1e-6);

    // tighten a bound and compare again
    qp::QuadraticProgram p3 = p2;
    p3.u[0] = std::min(p3.u[0], s2.x[0] - 0.1);
    if (p3.u[0] > p3.l[0]) {
        solver.update_bounds(p3.b, p3.l, p3.u);
        auto s3 = solver.solve();
        auto fresh3 = qp::solve_qp(p3);
        if (fresh3.status == qp::SolveStatus::Optimal) {
            REQUIRE(s3.status == qp::SolveStatus::Optimal);
            CHECK(std::abs(s3.objective - fresh3.objective) < 1e-6);
        }
    }
}

TEST_CASE("debug dump writes a parseable triplet file") {
    Rng rng(707);
    auto p = testing::random_eq_qp(rng, 6, true);
    auto path = std::filesystem::temp_directory_path() / "qp_dump.txt";
    p.dump(path);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "n " + std::to_string(p.n));
    std::filesystem::remove(path);
}

}  // TEST_SUITE
