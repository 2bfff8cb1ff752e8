#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "asfem/geometry.hpp"

namespace asfem {

/// Quadrature on the reference triangle {x,y >= 0, x+y <= 1}.
struct TriangleRule {
    std::vector<Vec2> points;
    std::vector<double> weights;
};

/// Quadrature on the reference edge [0,1].
struct EdgeRule {
    std::vector<double> points;
    std::vector<double> weights;
};

namespace detail {

/// Gauss-Legendre nodes/weights on [0,1] (n-point rule, exact to degree 2n-1).
inline void gauss_legendre_01(int n, std::vector<double>& points,
                              std::vector<double>& weights) {
    points.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        // Newton iteration from the Chebyshev initial guess on [-1,1].
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
}

} // namespace detail

constexpr int kMaxQuadratureExactness = 40;

/// Rule integrating bivariate polynomials up to the given total degree
/// exactly over the reference triangle. Built by collapsing a tensor
/// Gauss-Legendre rule; all weights are positive.
inline TriangleRule triangle_rule(int exactness) {
    if (exactness < 0 || exactness > kMaxQuadratureExactness)
        throw std::invalid_argument("triangle_rule: unsupported exactness degree");
    int n = (exactness + 3) / 2; // 2n-1 >= exactness + 1 covers the collapse factor
    std::vector<double> gp, gw;
    detail::gauss_legendre_01(n, gp, gw);
    TriangleRule rule;
    rule.points.reserve(static_cast<size_t>(n) * n);
    rule.weights.reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double x = gp[i];
            double y = gp[j] * (1.0 - x);
            rule.points.push_back({x, y});
            rule.weights.push_back(gw[i] * gw[j] * (1.0 - x));
        }
    }
    return rule;
}

/// Gauss-Legendre rule on [0,1] exact for polynomials of the given degree.
inline EdgeRule edge_rule(int exactness) {
    if (exactness < 0 || exactness > kMaxQuadratureExactness)
        throw std::invalid_argument("edge_rule: unsupported exactness degree");
    int n = exactness / 2 + 1;
    EdgeRule rule;
    detail::gauss_legendre_01(n, rule.points, rule.weights);
    return rule;
}

} // namespace asfem
