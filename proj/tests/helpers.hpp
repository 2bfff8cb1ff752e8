#pragma once

#include <random>

#include "asfem/assembly.hpp"
#include "asfem/catalog.hpp"
#include "asfem/dofmap.hpp"
#include "asfem/mesh.hpp"
#include "asfem/skeleton.hpp"

namespace asfem::testing {

inline Mesh two_triangle_square() {
    Mesh mesh;
    mesh.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    Triangle t0, t1;
    t0.v = {0, 1, 2};
    t1.v = {0, 2, 3};
    mesh.triangles = {t0, t1};
    for (auto& t : mesh.triangles) t.refinement_edge = detail::longest_edge(mesh, t);
    return mesh;
}

/// Broken nodal interpolant of a scalar function.
inline Vector broken_interpolant(const Mesh& mesh, const DofMap& dg, const ScalarField& f) {
    const ReferenceElement& ref = reference_element(dg.degree);
    Vector out(dg.n_dofs);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        auto c = mesh.corners(t);
        auto dofs = dg.dofs(t);
        for (int i = 0; i < ref.size(); ++i) {
            Vec2 node = ref.nodes()[i];
            Vec2 x = c[0] + node.x * (c[1] - c[0]) + node.y * (c[2] - c[0]);
            out[dofs[i]] = f(x);
        }
    }
    return out;
}

/// Continuous nodal interpolant (later element writes win; values agree on
/// shared dofs for continuous functions).
inline Vector continuous_interpolant(const Mesh& mesh, const DofMap& cg, const ScalarField& f) {
    const ReferenceElement& ref = reference_element(cg.degree);
    Vector out = Vector::Zero(cg.n_dofs);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        auto c = mesh.corners(t);
        auto dofs = cg.dofs(t);
        for (int i = 0; i < ref.size(); ++i) {
            Vec2 node = ref.nodes()[i];
            Vec2 x = c[0] + node.x * (c[1] - c[0]) + node.y * (c[2] - c[0]);
            out[dofs[i]] = f(x);
        }
    }
    return out;
}

inline Vector random_vector(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = uni(rng);
    return v;
}

inline ProblemDef pure_diffusion(int epsilon = -1) {
    ProblemDef prob;
    prob.kappa = 1.0;
    prob.epsilon = epsilon;
    prob.set_beta(0.0);
    prob.domain_scale = 1.0;
    prob.omega0 = Rect{0.25, 0.25, 0.5, 0.5};
    return prob;
}

inline ProblemDef constant_adr(double kappa, Vec2 b, double gamma, int epsilon = -1) {
    ProblemDef prob;
    prob.kappa = kappa;
    if (b.x != 0.0 || b.y != 0.0) prob.velocity = [b](Vec2) { return b; };
    prob.gamma = gamma;
    prob.epsilon = epsilon;
    prob.set_beta(norm(b));
    prob.domain_scale = 1.0;
    prob.omega0 = Rect{0.25, 0.25, 0.5, 0.5};
    return prob;
}

} // namespace asfem::testing
