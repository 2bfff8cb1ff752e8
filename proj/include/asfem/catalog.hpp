#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "asfem/problem.hpp"
#include "asfem/mesh.hpp"
#include "asfem/quadrature.hpp"

namespace asfem {

/// Mean of f over a rectangle by composite tensor Gauss quadrature
/// (11 points per direction, exact to degree 21), subdividing 2^k x 2^k
/// until two successive levels agree to the requested relative tolerance.
inline double mean_over_rect_oracle(const ScalarField& f, Rect r, double rel_tol = 1e-10) {
    EdgeRule g = edge_rule(21);
    const int ng = static_cast<int>(g.points.size());
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k <= 12; ++k) {
        const int cells = 1 << k;
        const double hx = r.width() / cells, hy = r.height() / cells;
        double sum = 0.0;
        for (int ci = 0; ci < cells; ++ci) {
            for (int cj = 0; cj < cells; ++cj) {
                double x0 = r.x0 + ci * hx, y0 = r.y0 + cj * hy;
                for (int i = 0; i < ng; ++i)
                    for (int j = 0; j < ng; ++j)
                        sum += g.weights[i] * g.weights[j] *
                               f({x0 + g.points[i] * hx, y0 + g.points[j] * hy});
            }
        }
        double mean = sum * hx * hy / r.area();
        if (k > 0 && std::abs(mean - prev) <= rel_tol * std::max(std::abs(mean), 1e-300))
            return mean;
        prev = mean;
    }
    throw std::runtime_error("mean_over_rect_oracle: no convergence");
}

/// Exact solution of the advection-reaction benchmark: a mild and a sharp
/// tanh layer transported along the constant velocity (3,1).
inline double advection_exact_solution(Vec2 p) {
    return 2.0 + std::tanh(10.0 * (p.y - p.x / 3.0 - 0.25)) +
           std::tanh(1000.0 * (p.y - p.x / 3.0 - 0.75));
}

struct ProblemCatalogEntry {
    std::string name;
    std::string summary;
    int default_levels = 14;
    // gamma given as NaN selects the problem default.
    std::function<ProblemDef(int epsilon, double gamma)> make_problem;
    std::function<Mesh()> make_mesh;
    std::function<double(double gamma)> regime_r; // r in the NDOFs^{-(p+r)} target
};

inline ProblemDef make_cross_diffusion_problem(int epsilon) {
    ProblemDef prob;
    prob.kappa = 1.0;
    prob.gamma = 0.0;
    prob.source = [](Vec2) { return 1.0; };
    prob.dirichlet = nullptr;
    prob.epsilon = epsilon;
    prob.omega0 = Rect{1.2, 0.2, 1.4, 0.4};
    prob.set_beta(0.0);
    prob.domain_scale = 2.0 * std::sqrt(2.0); // largest inscribed circle of the cross
    prob.exact_qoi = 0.407617863684;
    return prob;
}

inline ProblemDef make_advection_reaction_problem(int epsilon, double gamma) {
    if (!(gamma >= 0.0)) gamma = 0.0;
    ProblemDef prob;
    prob.kappa = 0.0;
    prob.velocity = [](Vec2) { return Vec2{3.0, 1.0}; };
    prob.gamma = gamma;
    prob.source = [gamma](Vec2 p) { return gamma * advection_exact_solution(p); };
    prob.dirichlet = [](Vec2 p) { return advection_exact_solution(p); };
    prob.epsilon = epsilon;
    prob.omega0 = Rect{0.7, 0.3, 0.8, 0.5};
    prob.set_beta(std::sqrt(10.0));
    prob.domain_scale = 1.0;
    prob.exact_solution = advection_exact_solution;
    prob.exact_qoi = mean_over_rect_oracle(advection_exact_solution, prob.omega0);
    return prob;
}

/// Constant-coefficient problem on the unit square with user-supplied data
/// and a fixed QoI region.
inline ProblemDef make_generic_problem(double kappa, double bx, double by, double gamma,
                                       double f_const, int epsilon,
                                       Rect omega0 = Rect{0.25, 0.25, 0.5, 0.5}) {
    ProblemDef prob;
    prob.kappa = kappa;
    if (bx != 0.0 || by != 0.0)
        prob.velocity = [bx, by](Vec2) { return Vec2{bx, by}; };
    prob.gamma = gamma;
    prob.source = [f_const](Vec2) { return f_const; };
    prob.epsilon = epsilon;
    prob.omega0 = omega0;
    prob.set_beta(std::hypot(bx, by));
    prob.domain_scale = 1.0;
    return prob;
}

inline const std::vector<ProblemCatalogEntry>& catalog() {
    static const std::vector<ProblemCatalogEntry> entries = [] {
        std::vector<ProblemCatalogEntry> v;
        {
            ProblemCatalogEntry e;
            e.name = "cross_diffusion";
            e.summary = "pure diffusion on the cross-shaped domain, f = 1";
            e.default_levels = 14;
            e.make_problem = [](int eps, double) { return make_cross_diffusion_problem(eps); };
            e.make_mesh = [] { return build_cross_mesh(); };
            e.regime_r = [](double) { return 0.0; };
            v.push_back(e);
        }
        {
            ProblemCatalogEntry e;
            e.name = "advection_reaction";
            e.summary = "advection-reaction on the unit square, tanh-layer solution";
            e.default_levels = 18;
            e.make_problem = [](int eps, double gamma) {
                return make_advection_reaction_problem(eps, gamma);
            };
            e.make_mesh = [] { return build_square_mesh(4, Rect{0.7, 0.3, 0.8, 0.5}); };
            e.regime_r = [](double gamma) { return gamma > 0.0 ? 1.0 : 0.5; };
            v.push_back(e);
        }
        {
            ProblemCatalogEntry e;
            e.name = "adr_generic";
            e.summary = "constant-coefficient problem on the unit square";
            e.default_levels = 10;
            e.make_problem = [](int eps, double gamma) {
                return make_generic_problem(1.0, 0.0, 0.0, gamma >= 0.0 ? gamma : 0.0, 1.0, eps);
            };
            e.make_mesh = [] { return build_square_mesh(2, Rect{0.25, 0.25, 0.5, 0.5}); };
            e.regime_r = [](double) { return 0.0; };
            v.push_back(e);
        }
        return v;
    }();
    return entries;
}

inline const ProblemCatalogEntry* find_problem(const std::string& name) {
    for (const auto& e : catalog())
        if (e.name == name) return &e;
    return nullptr;
}

} // namespace asfem
