#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

#include "asfem/geometry.hpp"

namespace asfem {

using ScalarField = std::function<double(Vec2)>;
using VectorField = std::function<Vec2(Vec2)>;

/// Advection-diffusion-reaction problem data:
///   -div(kappa grad u) + b . grad u + gamma u = f  in Omega,  u = g_D on the boundary,
/// with the quantity of interest q(u) = mean of u over omega0.
struct ProblemDef {
    double kappa = 0.0;
    VectorField velocity;  // null means zero field
    double gamma = 0.0;
    ScalarField source;    // f; null means zero
    ScalarField dirichlet; // g_D; null means zero
    int epsilon = -1;      // -1 symmetric penalty, +1 nonsymmetric
    Rect omega0{};

    double beta = 0.0;         // sup |b|_2 over the domain
    double domain_scale = 1.0; // L: diameter of the largest inscribed circle
    double beta_l = 0.0;       // 1/beta if beta > 0, else 0

    ScalarField exact_solution;           // optional oracle
    std::optional<double> exact_qoi;      // optional oracle

    Vec2 velocity_at(Vec2 x) const { return velocity ? velocity(x) : Vec2{0.0, 0.0}; }
    double source_at(Vec2 x) const { return source ? source(x) : 0.0; }
    double dirichlet_at(Vec2 x) const { return dirichlet ? dirichlet(x) : 0.0; }

    /// Derives beta_l from beta.
    void set_beta(double b) {
        beta = b;
        beta_l = b > 0.0 ? 1.0 / b : 0.0;
    }
};

inline void validate(const ProblemDef& prob) {
    if (prob.epsilon != -1 && prob.epsilon != 1)
        throw std::invalid_argument("ProblemDef: epsilon must be -1 or +1");
    if (prob.kappa < 0.0 || prob.gamma < 0.0 || prob.beta < 0.0)
        throw std::invalid_argument("ProblemDef: coefficients must be nonnegative");
    if (prob.domain_scale <= 0.0)
        throw std::invalid_argument("ProblemDef: domain scale must be positive");
    bool bl_ok = prob.beta > 0.0 ? std::abs(prob.beta_l * prob.beta - 1.0) < 1e-12
                                 : prob.beta_l == 0.0;
    if (!bl_ok) throw std::invalid_argument("ProblemDef: beta_l inconsistent with beta");
}

} // namespace asfem
