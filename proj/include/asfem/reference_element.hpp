#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "asfem/geometry.hpp"

namespace asfem {

constexpr int kMaxDegree = 4;

/// Lagrange basis on the reference triangle with vertices (0,0), (1,0), (0,1)
/// and equispaced nodes. Nodes are the lattice points (i/p, j/p), i+j <= p,
/// ordered j-major; the first three lattice corners coincide with the local
/// vertices 0, 1, 2.
class ReferenceElement {
public:
    explicit ReferenceElement(int degree) : degree_(degree) {
        if (degree < 1 || degree > kMaxDegree)
            throw std::invalid_argument("ReferenceElement: degree must be in [1,4]");
        for (int j = 0; j <= degree; ++j)
            for (int i = 0; i + j <= degree; ++i) {
                nodes_.push_back({double(i) / degree, double(j) / degree});
                lattice_.push_back({i, j});
            }
        for (int t = 0; t <= degree; ++t)
            for (int a = t; a >= 0; --a) monomials_.push_back({a, t - a});

        const int n = size();
        Eigen::MatrixXd vander(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                vander(r, c) = mono(monomials_[c], nodes_[r]);
        coeff_ = vander.fullPivLu().inverse();
        coeff_ += coeff_ * (Eigen::MatrixXd::Identity(n, n) - vander * coeff_);
    }

    int degree() const { return degree_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<Vec2>& nodes() const { return nodes_; }
    const std::vector<std::array<int, 2>>& lattice() const { return lattice_; }

    /// Values of all basis functions at a reference point.
    void eval(Vec2 p, double* out) const {
        const int n = size();
        for (int i = 0; i < n; ++i) out[i] = 0.0;
        for (int m = 0; m < n; ++m) {
            double v = mono(monomials_[m], p);
            for (int i = 0; i < n; ++i) out[i] += coeff_(m, i) * v;
        }
    }

    /// Reference-coordinate gradients of all basis functions at a point.
    void grad(Vec2 p, Vec2* out) const {
        const int n = size();
        for (int i = 0; i < n; ++i) out[i] = {0.0, 0.0};
        for (int m = 0; m < n; ++m) {
            Vec2 g = mono_grad(monomials_[m], p);
            for (int i = 0; i < n; ++i) out[i] += coeff_(m, i) * g;
        }
    }

    double eval_one(int i, Vec2 p) const {
        double v = 0.0;
        for (int m = 0; m < size(); ++m) v += coeff_(m, i) * mono(monomials_[m], p);
        return v;
    }

private:
    static double ipow(double x, int k) {
        double r = 1.0;
        for (int i = 0; i < k; ++i) r *= x;
        return r;
    }
    static double mono(std::array<int, 2> ab, Vec2 p) {
        return ipow(p.x, ab[0]) * ipow(p.y, ab[1]);
    }
    static Vec2 mono_grad(std::array<int, 2> ab, Vec2 p) {
        auto [a, b] = ab;
        double gx = a > 0 ? a * ipow(p.x, a - 1) * ipow(p.y, b) : 0.0;
        double gy = b > 0 ? b * ipow(p.x, a) * ipow(p.y, b - 1) : 0.0;
        return {gx, gy};
    }

    int degree_;
    std::vector<Vec2> nodes_;
    std::vector<std::array<int, 2>> lattice_;
    std::vector<std::array<int, 2>> monomials_;
    Eigen::MatrixXd coeff_;
};

inline const ReferenceElement& reference_element(int degree) {
    static const std::vector<ReferenceElement> cache = [] {
        std::vector<ReferenceElement> v;
        for (int p = 1; p <= kMaxDegree; ++p) v.emplace_back(p);
        return v;
    }();
    if (degree < 1 || degree > kMaxDegree)
        throw std::invalid_argument("reference_element: degree must be in [1,4]");
    return cache[degree - 1];
}

} // namespace asfem
