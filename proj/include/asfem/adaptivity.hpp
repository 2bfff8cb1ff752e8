#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "asfem/estimators.hpp"

namespace asfem {

/// Bulk-chasing mark set: the minimal prefix of the descending-sorted
/// indicators covering at least theta of the total.
struct MarkSet {
    std::vector<int> elements;
    double theta = 0.0;
    double covered_fraction = 0.0;
};

inline MarkSet dorfler_mark(const IndicatorField& ind, double theta) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("dorfler_mark: theta must be in (0,1]");
    double total = ind.total();
    if (!(total > 0.0)) throw std::runtime_error("dorfler_mark: nothing to mark");

    std::vector<int> order(ind.eta.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (ind.eta[a] != ind.eta[b]) return ind.eta[a] > ind.eta[b];
        return a < b;
    });

    MarkSet out;
    out.theta = theta;
    double cum = 0.0;
    for (int t : order) {
        if (ind.eta[t] <= 0.0) break;
        out.elements.push_back(t);
        cum += ind.eta[t];
        if (cum >= theta * total) break;
    }
    out.covered_fraction = cum / total;
    return out;
}

/// One adaptive level of the convergence history. The orthogonality columns
/// store relative residuals of the discrete identities (scaled by the
/// largest participating magnitude).
struct ConvergenceRecord {
    int level = 0;
    int n_V = 0;
    int n_U = 0;
    long ndofs = 0;
    int nelems = 0;
    double estimate = 0.0;
    double qoi_uh = 0.0;
    double qoi_udg = std::numeric_limits<double>::quiet_NaN();
    double rel_err = std::numeric_limits<double>::quiet_NaN();
    double ortho_a = std::numeric_limits<double>::quiet_NaN();
    double ortho_b = std::numeric_limits<double>::quiet_NaN();
    double ortho_c = std::numeric_limits<double>::quiet_NaN();
    double ortho_d = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0.0;
};

/// Extra per-level diagnostics (not part of the CSV contract).
struct LevelDiagnostics {
    bool full = false; // both u_dg/v_dg* and eps* were computed
    double chain_qoi_vs_inner = std::numeric_limits<double>::quiet_NaN();
    double chain_inner_vs_lh = std::numeric_limits<double>::quiet_NaN();
    double cmin_residual = std::numeric_limits<double>::quiet_NaN();
    double sat_err_udg = std::numeric_limits<double>::quiet_NaN(); // |q(u)-q(u_dg)|
    double sat_err_uh = std::numeric_limits<double>::quiet_NaN();  // |q(u)-q(u_h)|
    double eps_norm = 0.0;                // ||eps_h||_{V_h}
    double eps_star_norm = 0.0;           // ||eps*||_{V_h}
    double vdg_minus_v_norm = 0.0;        // ||v_dg* - v*||_{V_h}
    double udg_gap_norm = 0.0;            // ||u_dg - C u_h||_{V_h}
    double primal_residual = 0.0;         // worst saddle block residual
    double adjoint_residual_rel = 0.0;
};

struct ConvergenceHistory {
    std::vector<ConvergenceRecord> records;
    std::vector<LevelDiagnostics> diagnostics;
    std::string status; // completed | estimator-exhausted | ndof-cap | solver-error: ...
};

struct AdaptiveOptions {
    long ndof_cap = 300000;
    long diagnostics_ndof_limit = 50000;
    bool square_goa_indicators = false;
    // Called after each solved level with the level mesh and its indicators.
    std::function<void(int, const Mesh&, const IndicatorField&)> level_observer;
};

namespace detail {

inline double rel_to(double value, double scale) {
    return std::abs(value) / std::max(scale, 1e-300);
}

} // namespace detail

/// The adaptive loop: SOLVE -> ESTIMATE -> MARK -> REFINE. Each level solves
/// the primal and adjoint saddle points (one factorization), the auxiliary
/// dG/Riesz problems required by the estimator kind, records estimates and
/// identity diagnostics, then bisects the marked elements.
inline ConvergenceHistory run_adaptive(const ProblemDef& prob, EstimatorKind kind, int p,
                                       int delta_p, double theta, int max_levels,
                                       Mesh mesh, const AdaptiveOptions& opts = {}) {
    if (p < 1) throw std::invalid_argument("run_adaptive: p must be >= 1");
    if (delta_p != 0 && delta_p != 1)
        throw std::invalid_argument("run_adaptive: delta_p must be 0 or 1");
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("run_adaptive: theta must be in (0,1]");
    if (max_levels < 1) throw std::invalid_argument("run_adaptive: max_levels must be >= 1");
    validate(prob);

    ConvergenceHistory history;
    history.status = "completed";

    for (int level = 0; level < max_levels; ++level) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            DofMap cg = build_space(mesh, p, Continuity::Continuous);
            DofMap dg = build_space(mesh, p + delta_p, Continuity::Broken);
            long ndofs = static_cast<long>(cg.n_dofs) + dg.n_dofs;
            if (ndofs > opts.ndof_cap) {
                history.status = "ndof-cap";
                break;
            }
            Skeleton skel = skeleton(mesh);
            SparseMatrix C = embedding_matrix(cg, dg);
            SparseMatrix B = assemble_bh(mesh, skel, dg, prob);
            SparseMatrix G = assemble_gram(mesh, skel, dg, prob);
            Vector L = assemble_lh(mesh, skel, dg, prob);
            Vector q_V = assemble_qoi(mesh, dg, prob.omega0);
            Vector q_U = assemble_qoi(mesh, cg, prob.omega0);

            SaddleSystem sys(G, B, C);
            PrimalSolution primal = sys.solve_primal(L);
            AdjointSolution adjoint = sys.solve_adjoint(q_U);
            GramSolver gram(G);

            const bool full_diag = ndofs <= opts.diagnostics_ndof_limit;
            const bool need_dg =
                full_diag || kind == EstimatorKind::GoaAdjointDg;
            const bool need_eps_star =
                full_diag || kind == EstimatorKind::GoaAdjointResidual;

            Vector u_dg, v_dg_star, eps_star, vdg_gap;
            if (need_dg) {
                DgSolver dgs(B);
                u_dg = dgs.solve(L);
                v_dg_star = dgs.solve_transposed(q_V);
                vdg_gap = v_dg_star - adjoint.v_star;
            }
            if (need_eps_star)
                eps_star = adjoint_residual(gram, B, adjoint.v_star, q_V);

            const Vector* aux = nullptr;
            if (kind == EstimatorKind::GoaAdjointDg) aux = &vdg_gap;
            else if (kind == EstimatorKind::GoaAdjointResidual) aux = &eps_star;

            IndicatorField indicators = element_indicators(
                kind, mesh, skel, dg, prob, primal.eps_h, aux, opts.square_goa_indicators);

            ConvergenceRecord rec;
            rec.level = level;
            rec.n_V = dg.n_dofs;
            rec.n_U = cg.n_dofs;
            rec.ndofs = ndofs;
            rec.nelems = mesh.n_triangles();
            rec.estimate = global_estimate(kind, G, primal.eps_h,
                                           aux ? *aux : primal.eps_h);
            rec.qoi_uh = q_U.dot(primal.u_h);
            if (prob.exact_qoi)
                rec.rel_err = std::abs(*prob.exact_qoi - rec.qoi_uh) /
                              std::abs(*prob.exact_qoi);

            LevelDiagnostics diag;
            diag.full = need_dg && need_eps_star;
            diag.primal_residual =
                std::max(primal.report.block1_residual, primal.report.block2_residual);
            diag.adjoint_residual_rel =
                std::max(adjoint.report.block1_residual, adjoint.report.block2_residual);
            diag.eps_norm = std::sqrt(std::max(primal.eps_h.dot(G * primal.eps_h), 0.0));
            if (need_eps_star)
                diag.eps_star_norm = std::sqrt(std::max(eps_star.dot(G * eps_star), 0.0));

            // Discrete orthogonality and QoI identity diagnostics.
            {
                double b_ortho = adjoint.v_star.dot(G * primal.eps_h);
                double b_scale = std::sqrt(std::max(adjoint.v_star.dot(G * adjoint.v_star), 0.0)) *
                                 diag.eps_norm;
                rec.ortho_b = detail::rel_to(b_ortho, b_scale);

                double qu = rec.qoi_uh;
                double lv = L.dot(adjoint.v_star);
                rec.ortho_c = detail::rel_to(qu - lv, std::max(std::abs(qu), std::abs(lv)));
            }
            if (need_dg) {
                rec.qoi_udg = q_V.dot(u_dg);
                Vector bcu = sys.constraint() * primal.u_h;
                double a_ortho = vdg_gap.dot(bcu);
                rec.ortho_a = detail::rel_to(a_ortho, vdg_gap.norm() * bcu.norm());

                Vector gap_u = u_dg - C * primal.u_h;
                Vector bgap = B * gap_u;
                double d_ortho = adjoint.v_star.dot(bgap);
                rec.ortho_d =
                    detail::rel_to(d_ortho, adjoint.v_star.norm() * bgap.norm());

                diag.vdg_minus_v_norm = std::sqrt(std::max(vdg_gap.dot(G * vdg_gap), 0.0));
                diag.udg_gap_norm = std::sqrt(std::max(gap_u.dot(G * gap_u), 0.0));

                double x1 = rec.qoi_udg - rec.qoi_uh;
                double x2 = primal.eps_h.dot(G * vdg_gap);
                double x3 = L.dot(vdg_gap);
                double chain_scale = std::max({std::abs(rec.qoi_udg), std::abs(rec.qoi_uh),
                                               std::abs(x2), std::abs(x3)});
                diag.chain_qoi_vs_inner = detail::rel_to(x1 - x2, chain_scale);
                diag.chain_inner_vs_lh = detail::rel_to(x2 - x3, chain_scale);

                double cmin_num = adjoint.v_star.dot(G * vdg_gap);
                double v_norm =
                    std::sqrt(std::max(adjoint.v_star.dot(G * adjoint.v_star), 0.0));
                diag.cmin_residual =
                    detail::rel_to(cmin_num, v_norm * diag.vdg_minus_v_norm);

                if (prob.exact_qoi) {
                    diag.sat_err_udg = std::abs(*prob.exact_qoi - rec.qoi_udg);
                    diag.sat_err_uh = std::abs(*prob.exact_qoi - rec.qoi_uh);
                }
            }

            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            history.records.push_back(rec);
            history.diagnostics.push_back(diag);
            if (opts.level_observer) opts.level_observer(level, mesh, indicators);

            // Exhaustion scale: the dual norm of the load bounds ||eps_h||, so
            // the estimate is compared against it (squared for the energy kind,
            // times ||aux|| for the goal-oriented kinds).
            double dual_sq = std::max(gram.solve(L).dot(L), 0.0);
            double exhaustion_scale =
                kind == EstimatorKind::Energy
                    ? dual_sq
                    : std::sqrt(dual_sq) *
                          std::sqrt(std::max(aux->dot(G * (*aux)), 0.0));
            if (rec.estimate < 1e-15 * exhaustion_scale || indicators.total() <= 0.0) {
                history.status = "estimator-exhausted";
                break;
            }
            if (level + 1 == max_levels) break;

            MarkSet marks = dorfler_mark(indicators, theta);
            mesh = bisect(mesh, marks.elements);
        } catch (const std::exception& ex) {
            history.status = std::string("solver-error: ") + ex.what();
            break;
        }
    }
    return history;
}

/// Least-squares slope of log(y) against log(x); pairs with nonpositive
/// entries are skipped. Returns NaN with fewer than two usable points.
inline double fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
        double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / denom;
}

inline const char* kHistoryHeader =
    "level,ndofs,nelems,estimate,qoi_uh,qoi_udg,rel_err,ortho_a,ortho_b,ortho_c,ortho_d,wall_ms";

inline void write_history(const ConvergenceHistory& history, std::ostream& os) {
    os << kHistoryHeader << "\n";
    char buf[512];
    for (const auto& r : history.records) {
        std::snprintf(buf, sizeof buf,
                      "%d,%ld,%d,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g\n",
                      r.level, r.ndofs, r.nelems, r.estimate, r.qoi_uh, r.qoi_udg,
                      r.rel_err, r.ortho_a, r.ortho_b, r.ortho_c, r.ortho_d, r.wall_ms);
        os << buf;
    }
}

inline std::vector<ConvergenceRecord> read_history(std::istream& is) {
    std::vector<ConvergenceRecord> records;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_history: empty stream");
    if (line != kHistoryHeader) throw std::runtime_error("read_history: unexpected header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 12) throw std::runtime_error("read_history: malformed row");
        ConvergenceRecord r;
        r.level = static_cast<int>(vals[0]);
        r.ndofs = static_cast<long>(vals[1]);
        r.nelems = static_cast<int>(vals[2]);
        r.estimate = vals[3];
        r.qoi_uh = vals[4];
        r.qoi_udg = vals[5];
        r.rel_err = vals[6];
        r.ortho_a = vals[7];
        r.ortho_b = vals[8];
        r.ortho_c = vals[9];
        r.ortho_d = vals[10];
        r.wall_ms = vals[11];
        records.push_back(r);
    }
    return records;
}

} // namespace asfem
