#include "vstack/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

namespace vstack::qp {

namespace {

constexpr double kEpsPinf = 1e-5;   // primal infeasibility certificate tolerance
constexpr double kEpsDinf = 1e-5;   // dual infeasibility certificate tolerance
constexpr double kRhoEqScale = 1e3; // penalty boost for equality-like rows
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kPolishDelta = 1e-7;

SpMat symmetrized(const SpMat& P) {
    SpMat upper = P.triangularView<Eigen::Upper>();
    SpMat full = SpMat(upper.transpose()) + upper;
    // the diagonal was added twice
    for (int k = 0; k < full.outerSize(); ++k)
        for (SpMat::InnerIterator it(full, k); it; ++it)
            if (it.row() == it.col()) it.valueRef() *= 0.5;
    return full;
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

void QuadraticProgram::check() const {
    if (P.rows() != n || P.cols() != n) throw InputError("qp.P", "dimension mismatch");
    if (c.size() != n) throw InputError("qp.c", "dimension mismatch");
    if (A.rows() != m || (m > 0 && A.cols() != n)) throw InputError("qp.A", "dimension mismatch");
    if (b.size() != m) throw InputError("qp.b", "dimension mismatch");
    if (l.size() != n || u.size() != n) throw InputError("qp.bounds", "dimension mismatch");
    for (int j = 0; j < n; ++j)
        if (l[j] > u[j])
            throw InputError("qp.bounds", "variable " + std::to_string(j) +
                                              (var_names.size() == static_cast<size_t>(n)
                                                   ? " (" + var_names[static_cast<size_t>(j)] + ")"
                                                   : std::string()) +
                                              ": lower bound exceeds upper bound");
}

void QuadraticProgram::dump(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "n " << n << "\nm " << m << "\nconstant " << fmt_full(objective_constant) << "\n";
    out << "P_triplets\n";
    for (int k = 0; k < P.outerSize(); ++k)
        for (SpMat::InnerIterator it(P, k); it; ++it)
            out << it.row() << " " << it.col() << " " << fmt_full(it.value()) << "\n";
    out << "c\n";
    for (int j = 0; j < n; ++j) out << fmt_full(c[j]) << "\n";
    out << "A_triplets\n";
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
            out << it.row() << " " << it.col() << " " << fmt_full(it.value()) << "\n";
    out << "b\n";
    for (int i = 0; i < m; ++i) out << fmt_full(b[i]) << "\n";
    out << "bounds\n";
    for (int j = 0; j < n; ++j) out << fmt_full(l[j]) << " " << fmt_full(u[j]) << "\n";
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::MaxIter: return "MaxIter";
        case SolveStatus::Infeasible: return "Infeasible";
    }
    return "?";
}

double KktReport::max_residual() const {
    return std::max({stationarity, equality, box, complementarity});
}

KktReport kkt_report(const QuadraticProgram& qp, const Vec& x, const Vec& y, const Vec& z) {
    KktReport r;
    SpMat Pfull = symmetrized(qp.P);
    Vec station = Pfull * x + qp.c + z;
    if (qp.m > 0) station += qp.A.transpose() * y;
    r.stationarity = inf_norm(station);
    if (qp.m > 0) r.equality = inf_norm(qp.A * x - qp.b);
    for (int j = 0; j < qp.n; ++j) {
        r.box = std::max({r.box, qp.l[j] - x[j], x[j] - qp.u[j]});
        if (z[j] != 0.0) {
            // a bound force is only allowed when the variable sits on a bound
            double lo_gap = qp.l[j] == -kInf ? kInf : std::abs(x[j] - qp.l[j]);
            double hi_gap = qp.u[j] == kInf ? kInf : std::abs(qp.u[j] - x[j]);
            r.complementarity =
                std::max(r.complementarity, std::min(std::abs(z[j]), std::min(lo_gap, hi_gap)));
        }
    }
    r.box = std::max(r.box, 0.0);
    return r;
}

// ---------------------------------------------------------------------------

struct Solver::Impl {
    QuadraticProgram orig;  // P stored symmetrized full
    SolveOptions opts;
    int n = 0, m = 0, mc = 0;  // mc = m + n constraint rows [A; I]

    // Ruiz equilibration: x = D*x_s, constraint rows scaled by E, cost by gamma.
    Vec d_scale, e_scale;
    double gamma = 1.0;

    SpMat Ps, Cs;          // scaled P and stacked constraints [A; I]
    Vec cs, lo_s, hi_s;    // scaled cost and row bounds
    Vec lo_raw, hi_raw;    // unscaled row bounds [b; l..u]
    std::vector<char> eq_row;

    double rho_bar = 0.1;
    Vec rho_vec, rho_inv;

    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool factorized = false;

    Vec xs, zs, ys;  // scaled iterates
    Vec ys_prev_iter, xs_prev_iter;
    int pinf_streak = 0, dinf_streak = 0;

    explicit Impl(QuadraticProgram qp, SolveOptions o) : orig(std::move(qp)), opts(o) {
        orig.check();
        orig.P = symmetrized(orig.P);
        n = orig.n;
        m = orig.m;
        mc = m + n;
        rho_bar = opts.rho_qp;
        setup();
    }

    void setup() {
        // stacked constraint matrix [A; I]
        std::vector<Triplet> trips;
        trips.reserve(static_cast<size_t>(orig.A.nonZeros()) + static_cast<size_t>(n));
        for (int k = 0; k < orig.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(orig.A, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                   it.value());
        for (int j = 0; j < n; ++j) trips.emplace_back(m + j, j, 1.0);
        SpMat C(mc, n);
        C.setFromTriplets(trips.begin(), trips.end());

        lo_raw = Vec(mc);
        hi_raw = Vec(mc);
        lo_raw.head(m) = orig.b;
        hi_raw.head(m) = orig.b;
        lo_raw.tail(n) = orig.l;
        hi_raw.tail(n) = orig.u;

        eq_row.assign(static_cast<size_t>(mc), 0);
        for (int i = 0; i < m; ++i) eq_row[static_cast<size_t>(i)] = 1;
        for (int j = 0; j < n; ++j)
            if (orig.l[j] == orig.u[j]) eq_row[static_cast<size_t>(m + j)] = 1;

        equilibrate(C);

        rho_vec = Vec(mc);
        update_rho_vec();

        xs = Vec::Zero(n);
        zs = Vec::Zero(mc);
        ys = Vec::Zero(mc);
        pinf_streak = dinf_streak = 0;
        factorize();
    }

    void equilibrate(const SpMat& C) {
        d_scale = Vec::Ones(n);
        e_scale = Vec::Ones(mc);
        gamma = 1.0;
        Ps = orig.P;
        Cs = C;
        cs = orig.c;

        for (int pass = 0; pass < 10; ++pass) {
            Vec col_norm = Vec::Zero(n);
            Vec row_norm = Vec::Zero(mc);
            for (int k = 0; k < Ps.outerSize(); ++k)
                for (SpMat::InnerIterator it(Ps, k); it; ++it) {
                    double a = std::abs(it.value());
                    col_norm[it.col()] = std::max(col_norm[it.col()], a);
                }
            for (int k = 0; k < Cs.outerSize(); ++k)
                for (SpMat::InnerIterator it(Cs, k); it; ++it) {
                    double a = std::abs(it.value());
                    col_norm[it.col()] = std::max(col_norm[it.col()], a);
                    row_norm[it.row()] = std::max(row_norm[it.row()], a);
                }
            Vec d = col_norm.unaryExpr(
                [](double v) { return v < 1e-12 ? 1.0 : 1.0 / std::sqrt(v); });
            Vec e = row_norm.unaryExpr(
                [](double v) { return v < 1e-12 ? 1.0 : 1.0 / std::sqrt(v); });
            Ps = d.asDiagonal() * Ps * d.asDiagonal();
            Cs = e.asDiagonal() * Cs * d.asDiagonal();
            cs = cs.cwiseProduct(d);
            d_scale = d_scale.cwiseProduct(d);
            e_scale = e_scale.cwiseProduct(e);

            // cost scaling
            Vec pcol = Vec::Zero(n);
            for (int k = 0; k < Ps.outerSize(); ++k)
                for (SpMat::InnerIterator it(Ps, k); it; ++it)
                    pcol[it.col()] = std::max(pcol[it.col()], std::abs(it.value()));
            double denom = std::max(pcol.size() ? pcol.mean() : 0.0, inf_norm(cs));
            double g = denom < 1e-12 ? 1.0 : 1.0 / denom;
            Ps *= g;
            cs *= g;
            gamma *= g;
        }
        refresh_scaled_bounds();
    }

    void refresh_scaled_bounds() {
        lo_s = Vec(mc);
        hi_s = Vec(mc);
        for (int i = 0; i < mc; ++i) {
            lo_s[i] = std::isfinite(lo_raw[i]) ? lo_raw[i] * e_scale[i] : lo_raw[i];
            hi_s[i] = std::isfinite(hi_raw[i]) ? hi_raw[i] * e_scale[i] : hi_raw[i];
        }
    }

    void update_rho_vec() {
        for (int i = 0; i < mc; ++i)
            rho_vec[i] = eq_row[static_cast<size_t>(i)] ? rho_bar * kRhoEqScale : rho_bar;
        rho_vec = rho_vec.cwiseMax(kRhoMin).cwiseMin(kRhoMax * kRhoEqScale);
        rho_inv = rho_vec.cwiseInverse();
    }

    void factorize() {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<size_t>(Ps.nonZeros() + Cs.nonZeros() + n + mc));
        for (int k = 0; k < Ps.outerSize(); ++k)
            for (SpMat::InnerIterator it(Ps, k); it; ++it)
                if (it.row() <= it.col())
                    trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                       it.value());
        for (int j = 0; j < n; ++j) trips.emplace_back(j, j, opts.sigma);
        for (int k = 0; k < Cs.outerSize(); ++k)
            for (SpMat::InnerIterator it(Cs, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()),
                                   it.value());
        for (int i = 0; i < mc; ++i) trips.emplace_back(n + i, n + i, -rho_inv[i]);
        SpMat K(n + mc, n + mc);
        K.setFromTriplets(trips.begin(), trips.end());

        if (!factorized) {
            ldlt.analyzePattern(K.selfadjointView<Eigen::Upper>());
        }
        ldlt.factorize(K.selfadjointView<Eigen::Upper>());
        if (ldlt.info() != Eigen::Success)
            throw SolveError("qp: KKT factorization failed");
        factorized = true;
    }

    // Unscaled primal/dual views of the current iterate.
    Vec x_unscaled() const { return d_scale.cwiseProduct(xs); }
    Vec y_unscaled() const { return e_scale.cwiseProduct(ys) / gamma; }

    struct Residuals {
        double prim_eq = 0, prim_box = 0, dual = 0, dual_scale = 1;
    };

    Residuals residuals(const Vec& x, const Vec& yfull) const {
        Residuals r;
        Vec Px = orig.P * x;
        Vec z = yfull.tail(n);
        Vec station = Px + orig.c + z;
        double aty_norm = 0.0;
        if (m > 0) {
            Vec Aty = orig.A.transpose() * yfull.head(m);
            station += Aty;
            aty_norm = inf_norm(Aty);
            r.prim_eq = inf_norm(orig.A * x - orig.b);
        }
        for (int j = 0; j < n; ++j)
            r.prim_box =
                std::max({r.prim_box, orig.l[j] - x[j], x[j] - orig.u[j]});
        r.prim_box = std::max(r.prim_box, 0.0);
        r.dual = inf_norm(station);
        r.dual_scale =
            std::max({inf_norm(Px), inf_norm(orig.c), aty_norm, inf_norm(z), 1.0});
        return r;
    }

    bool primal_infeasibility_certificate(const Vec& dy) const {
        if (inf_norm(dy) < 1e-14) return false;
        Vec dyu = e_scale.cwiseProduct(dy);
        Vec ct = orig.A.rows() > 0 ? Vec(orig.A.transpose() * dyu.head(m)) : Vec(Vec::Zero(n));
        ct += dyu.tail(n);
        double nu = inf_norm(dyu);
        if (nu < 1e-14) return false;
        if (inf_norm(ct) > kEpsPinf * nu) return false;
        double support = 0.0;
        for (int i = 0; i < mc; ++i) {
            double v = dyu[i];
            if (v > 0) {
                if (!std::isfinite(hi_raw[i])) {
                    if (v > kEpsPinf * nu) return false;
                } else {
                    support += hi_raw[i] * v;
                }
            } else if (v < 0) {
                if (!std::isfinite(lo_raw[i])) {
                    if (-v > kEpsPinf * nu) return false;
                } else {
                    support += lo_raw[i] * v;
                }
            }
        }
        return support <= -kEpsPinf * nu;
    }

    bool dual_infeasibility_certificate(const Vec& dx) const {
        Vec dxu = d_scale.cwiseProduct(dx);
        double nrm = inf_norm(dxu);
        if (nrm < 1e-14) return false;
        if (inf_norm(orig.P * dxu) > kEpsDinf * nrm) return false;
        if (orig.c.dot(dxu) > -kEpsDinf * nrm) return false;
        Vec cdx(mc);
        if (m > 0) cdx.head(m) = orig.A * dxu;
        cdx.tail(n) = dxu;
        for (int i = 0; i < mc; ++i) {
            bool lo_fin = std::isfinite(lo_raw[i]);
            bool hi_fin = std::isfinite(hi_raw[i]);
            double v = cdx[i];
            if (lo_fin && hi_fin) {
                if (std::abs(v) > kEpsDinf * nrm) return false;
            } else if (hi_fin) {
                if (v > kEpsDinf * nrm) return false;
            } else if (lo_fin) {
                if (v < -kEpsDinf * nrm) return false;
            }
        }
        return true;
    }

    // Direct solve of the reduced KKT system on the guessed active set;
    // returns true (and overwrites the unscaled solution) when the polished
    // point has smaller worst-case KKT residual.
    bool polish(Vec& x, Vec& y, Vec& z, KktReport& report) const {
        // Active bounds guessed from primal proximity (dual signs at this
        // accuracy are too noisy to trust on their own); a wrong guess gets
        // rejected by the residual comparison below.
        std::vector<int> low, up;
        for (int j = 0; j < n; ++j) {
            if (orig.l[j] == orig.u[j]) {
                low.push_back(j);
                continue;
            }
            const double span = 100.0 * opts.eps_abs;
            bool near_low = std::isfinite(orig.l[j]) &&
                            x[j] - orig.l[j] <= span * (1.0 + std::abs(orig.l[j]));
            bool near_up = std::isfinite(orig.u[j]) &&
                           orig.u[j] - x[j] <= span * (1.0 + std::abs(orig.u[j]));
            if (near_low && near_up) {
                if (z[j] >= 0) up.push_back(j);
                else low.push_back(j);
            } else if (near_low) {
                low.push_back(j);
            } else if (near_up) {
                up.push_back(j);
            }
        }
        const int nl = static_cast<int>(low.size());
        const int nu = static_cast<int>(up.size());
        const int dim = n + m + nl + nu;

        std::vector<Triplet> trips;
        for (int k = 0; k < orig.P.outerSize(); ++k)
            for (SpMat::InnerIterator it(orig.P, k); it; ++it)
                if (it.row() <= it.col())
                    trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                       it.value());
        for (int j = 0; j < n; ++j) trips.emplace_back(j, j, kPolishDelta);
        for (int k = 0; k < orig.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(orig.A, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()),
                                   it.value());
        for (int r = 0; r < nl; ++r) trips.emplace_back(low[static_cast<size_t>(r)], n + m + r, 1.0);
        for (int r = 0; r < nu; ++r)
            trips.emplace_back(up[static_cast<size_t>(r)], n + m + nl + r, 1.0);
        for (int i = 0; i < m + nl + nu; ++i) trips.emplace_back(n + i, n + i, -kPolishDelta);

        SpMat K(dim, dim);
        K.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<SpMat> fact;
        fact.compute(K.selfadjointView<Eigen::Upper>());
        if (fact.info() != Eigen::Success) return false;

        Vec rhs(dim);
        rhs.head(n) = -orig.c;
        rhs.segment(n, m) = orig.b;
        for (int r = 0; r < nl; ++r) rhs[n + m + r] = orig.l[low[static_cast<size_t>(r)]];
        for (int r = 0; r < nu; ++r) rhs[n + m + nl + r] = orig.u[up[static_cast<size_t>(r)]];

        // iterative refinement against the unregularized system
        auto apply_exact = [&](const Vec& s) {
            Vec out = Vec::Zero(dim);
            Vec xv = s.head(n);
            out.head(n) += orig.P.selfadjointView<Eigen::Upper>() * xv;
            if (m > 0) {
                out.head(n) += orig.A.transpose() * s.segment(n, m);
                out.segment(n, m) = orig.A * xv;
            }
            for (int r = 0; r < nl; ++r) {
                int j = low[static_cast<size_t>(r)];
                out[j] += s[n + m + r];
                out[n + m + r] = xv[j];
            }
            for (int r = 0; r < nu; ++r) {
                int j = up[static_cast<size_t>(r)];
                out[j] += s[n + m + nl + r];
                out[n + m + nl + r] = xv[j];
            }
            return out;
        };

        Vec sol = fact.solve(rhs);
        for (int pass = 0; pass < 3; ++pass) {
            Vec resid = rhs - apply_exact(sol);
            sol += fact.solve(resid);
        }

        Vec x_pol = sol.head(n);
        Vec y_pol = sol.segment(n, m);
        Vec z_pol = Vec::Zero(n);
        for (int r = 0; r < nl; ++r) z_pol[low[static_cast<size_t>(r)]] = sol[n + m + r];
        for (int r = 0; r < nu; ++r) z_pol[up[static_cast<size_t>(r)]] = sol[n + m + nl + r];

        // Accept only when the polished point is at least as good on every
        // KKT measure and does not raise the objective materially (a wrong
        // active-set guess pins variables away from the optimum and fails
        // this; a slightly infeasible iterate legitimately reports a lower
        // objective than the exact optimum, hence the headroom).
        KktReport rep = kkt_report(orig, x_pol, y_pol, z_pol);
        double obj_iter = orig.objective(x);
        double obj_pol = orig.objective(x_pol);
        bool good = rep.max_residual() <= std::max(report.max_residual(), 1e-9) &&
                    obj_pol <= obj_iter + 1e-4 * (1.0 + std::abs(obj_iter));
        if (good) {
            x = x_pol;
            y = y_pol;
            z = z_pol;
            report = rep;
            return true;
        }
        return false;
    }

    QpSolution run() {
        const double alpha = opts.alpha;
        QpSolution out;
        int it = 0;
        bool converged = false;
        bool primal_infeasible = false;
        int since_rho_update = 0;
        int polish_cooldown = 0;
        struct Final {
            Vec x, y, z;
        };
        std::optional<Final> early;

        Vec rhs(n + mc), sol(n + mc), xtilde(n), ztilde(mc), zcand(mc);
        while (it < opts.max_iter) {
            ++it;
            ++since_rho_update;
            const bool will_check = it % opts.check_interval == 0 || it == opts.max_iter;
            if (will_check) {
                xs_prev_iter = xs;
                ys_prev_iter = ys;
            }
            rhs.head(n) = opts.sigma * xs - cs;
            rhs.tail(mc) = zs - rho_inv.cwiseProduct(ys);
            sol = ldlt.solve(rhs);
            xtilde = sol.head(n);
            ztilde = zs + rho_inv.cwiseProduct(sol.tail(mc) - ys);

            xs = alpha * xtilde + (1.0 - alpha) * xs;
            zcand = alpha * ztilde + (1.0 - alpha) * zs;  // pre-projection point
            zs = (zcand + rho_inv.cwiseProduct(ys)).cwiseMax(lo_s).cwiseMin(hi_s);
            ys += rho_vec.cwiseProduct(zcand - zs);

            if (it % opts.check_interval != 0 && it != opts.max_iter) continue;

            Vec x = x_unscaled();
            Vec yfull = y_unscaled();
            Residuals r = residuals(x, yfull);
            double prim = std::max(r.prim_eq, r.prim_box);
            double dual_tol = opts.eps_abs + opts.eps_rel * r.dual_scale;
            if (getenv("VSTACK_QP_TRACE") && it % 200 == 0)
                fprintf(stderr, "  it=%d prim=%g dual=%g(scale %g) rho=%g\n", it, prim, r.dual,
                        r.dual_scale, rho_bar);
            if (prim <= opts.eps_abs && r.dual <= dual_tol) {
                converged = true;
                break;
            }

            // A direct active-set solve from a moderately accurate iterate
            // usually lands on the exact optimum; when it does, stop early.
            --polish_cooldown;
            if (opts.polish && polish_cooldown <= 0 &&
                prim <= std::max(100.0 * opts.eps_abs, 1e-4) &&
                r.dual <= 100.0 * dual_tol) {
                Vec xp = x;
                Vec yp = m > 0 ? Vec(yfull.head(m)) : Vec(0);
                Vec zp = yfull.tail(n);
                KktReport rep = kkt_report(orig, xp, yp, zp);
                if (polish(xp, yp, zp, rep)) {
                    Vec yf(mc);
                    yf.head(m) = yp;
                    yf.tail(n) = zp;
                    Residuals rp = residuals(xp, yf);
                    if (std::max(rp.prim_eq, rp.prim_box) <= opts.eps_abs &&
                        rp.dual <= opts.eps_abs + opts.eps_rel * rp.dual_scale) {
                        early = Final{std::move(xp), std::move(yp), std::move(zp)};
                        converged = true;
                        break;
                    }
                }
                polish_cooldown = 20;  // checks between attempts
            }

            if (!xs.allFinite() || !ys.allFinite())
                throw SolveError("qp: iterates diverged (non-finite values)");

            // one-iteration deltas; two consecutive positives declare a certificate
            pinf_streak = primal_infeasibility_certificate(ys - ys_prev_iter) ? pinf_streak + 1 : 0;
            if (pinf_streak >= 2) {
                primal_infeasible = true;
                break;
            }
            dinf_streak = dual_infeasibility_certificate(xs - xs_prev_iter) ? dinf_streak + 1 : 0;
            if (dinf_streak >= 2)
                throw SolveError("qp: dual infeasibility certificate (objective unbounded)");

            if (opts.adaptive_rho && since_rho_update >= 400) {
                double prim_scale = std::max({m > 0 ? inf_norm(orig.A * x) : 0.0, inf_norm(x), 1.0});
                double prim_rel = prim / prim_scale;
                double dual_rel = r.dual / r.dual_scale;
                if (prim_rel > 1e-14 && dual_rel > 1e-14) {
                    double ratio = std::clamp(std::sqrt(prim_rel / dual_rel), 0.1, 10.0);
                    if (ratio > 5.0 || ratio < 0.2) {
                        rho_bar = std::clamp(rho_bar * ratio, kRhoMin, kRhoMax);
                        update_rho_vec();
                        factorize();
                        since_rho_update = 0;
                    }
                }
            }
        }

        Vec x = early ? early->x : x_unscaled();
        Vec yfull = y_unscaled();
        Vec y = early ? early->y : (m > 0 ? Vec(yfull.head(m)) : Vec(0));
        Vec z = early ? early->z : Vec(yfull.tail(n));

        out.iterations = it;
        if (primal_infeasible) {
            out.status = SolveStatus::Infeasible;
            out.x = x;
            out.y = y;
            out.z = z;
            return out;
        }

        if (early) {
            out.polished = true;
        } else if (opts.polish) {
            KktReport rep = kkt_report(orig, x, y, z);
            out.polished = polish(x, y, z, rep);
        }

        Residuals r = residuals(x, [&] {
            Vec yf(mc);
            yf.head(m) = y;
            yf.tail(n) = z;
            return yf;
        }());
        out.primal_residual = std::max(r.prim_eq, r.prim_box);
        out.dual_residual = r.dual;
        double dual_tol = opts.eps_abs + opts.eps_rel * r.dual_scale;
        out.status = (out.primal_residual <= opts.eps_abs && out.dual_residual <= dual_tol)
                         ? SolveStatus::Optimal
                         : SolveStatus::MaxIter;
        out.x = x;
        out.y = y;
        out.z = z;
        out.objective = orig.objective(x);
        return out;
    }
};

Solver::Solver(QuadraticProgram qp, SolveOptions opts)
    : impl_(std::make_unique<Impl>(std::move(qp), opts)) {}
Solver::~Solver() = default;
Solver::Solver(Solver&&) noexcept = default;
Solver& Solver::operator=(Solver&&) noexcept = default;

void Solver::set_tolerances(double eps_abs, double eps_rel, bool polish, int max_iter) {
    impl_->opts.eps_abs = eps_abs;
    impl_->opts.eps_rel = eps_rel;
    impl_->opts.polish = polish;
    if (max_iter > 0) impl_->opts.max_iter = max_iter;
}

void Solver::update_cost(const Vec& c_new, double constant) {
    if (c_new.size() != impl_->n) throw InputError("qp.c", "dimension mismatch");
    impl_->orig.c = c_new;
    impl_->orig.objective_constant = constant;
    impl_->cs = impl_->gamma * impl_->d_scale.cwiseProduct(c_new);
}

void Solver::update_bounds(const Vec& b_new, const Vec& l_new, const Vec& u_new) {
    Impl& im = *impl_;
    if (b_new.size() != im.m || l_new.size() != im.n || u_new.size() != im.n)
        throw InputError("qp.bounds", "dimension mismatch");
    for (int j = 0; j < im.n; ++j)
        if (l_new[j] > u_new[j]) throw InputError("qp.bounds", "lower bound exceeds upper bound");
    im.orig.b = b_new;
    im.orig.l = l_new;
    im.orig.u = u_new;
    im.lo_raw.head(im.m) = b_new;
    im.hi_raw.head(im.m) = b_new;
    im.lo_raw.tail(im.n) = l_new;
    im.hi_raw.tail(im.n) = u_new;
    im.refresh_scaled_bounds();
}

QpSolution Solver::solve() { return impl_->run(); }

void Solver::reset_warm_start() {
    impl_->xs.setZero();
    impl_->zs.setZero();
    impl_->ys.setZero();
    impl_->pinf_streak = impl_->dinf_streak = 0;
}

const QuadraticProgram& Solver::problem() const { return impl_->orig; }

QpSolution solve_qp(const QuadraticProgram& qp, const SolveOptions& opts) {
    Solver solver(qp, opts);
    return solver.solve();
}

}  // namespace vstack::qp
