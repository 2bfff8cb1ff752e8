#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "asfem/dofmap.hpp"
#include "asfem/problem.hpp"
#include "asfem/quadrature.hpp"
#include "asfem/skeleton.hpp"

namespace asfem {

namespace detail {

/// Affine map data of one element: x = c0 + J*ref, grad = J^{-T} ref_grad.
struct ElemGeom {
    Vec2 c0;
    double j00, j01, j10, j11; // J columns: (c1-c0), (c2-c0)
    double det;
    double it00, it01, it10, it11; // J^{-T}

    Vec2 phys(Vec2 r) const {
        return {c0.x + j00 * r.x + j01 * r.y, c0.y + j10 * r.x + j11 * r.y};
    }
    Vec2 grad(Vec2 g) const {
        return {it00 * g.x + it01 * g.y, it10 * g.x + it11 * g.y};
    }
};

inline ElemGeom elem_geom(const Mesh& mesh, int t) {
    auto c = mesh.corners(t);
    ElemGeom g;
    g.c0 = c[0];
    g.j00 = c[1].x - c[0].x;
    g.j10 = c[1].y - c[0].y;
    g.j01 = c[2].x - c[0].x;
    g.j11 = c[2].y - c[0].y;
    g.det = g.j00 * g.j11 - g.j01 * g.j10;
    // J^{-T} = (1/det) [[j11, -j10], [-j01, j00]]
    g.it00 = g.j11 / g.det;
    g.it01 = -g.j10 / g.det;
    g.it10 = -g.j01 / g.det;
    g.it11 = g.j00 / g.det;
    return g;
}

/// Basis values and reference gradients tabulated at volume quadrature points.
struct VolumeBasis {
    TriangleRule rule;
    Eigen::MatrixXd val;        // nq x nl
    std::vector<Vec2> ref_grad; // nq * nl, point-major

    VolumeBasis(const ReferenceElement& ref, int exactness) : rule(triangle_rule(exactness)) {
        const int nq = static_cast<int>(rule.points.size());
        const int nl = ref.size();
        val.resize(nq, nl);
        ref_grad.resize(static_cast<size_t>(nq) * nl);
        std::vector<double> v(nl);
        std::vector<Vec2> g(nl);
        for (int q = 0; q < nq; ++q) {
            ref.eval(rule.points[q], v.data());
            ref.grad(rule.points[q], g.data());
            for (int i = 0; i < nl; ++i) {
                val(q, i) = v[i];
                ref_grad[static_cast<size_t>(q) * nl + i] = g[i];
            }
        }
    }
};

/// Basis traces along a reference-element edge, tabulated per ordered local
/// vertex pair. The trace at edge parameter t corresponds to the reference
/// point (1-t)*node(la) + t*node(lb).
struct EdgeTraceTable {
    EdgeRule rule;
    const ReferenceElement& ref;
    Eigen::MatrixXd val[3][3];
    std::vector<Vec2> ref_grad[3][3];

    EdgeTraceTable(const ReferenceElement& r, int exactness)
        : rule(edge_rule(exactness)), ref(r) {}

    void ensure(int la, int lb) {
        if (val[la][lb].size() > 0) return;
        static const Vec2 corners[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
        const int nq = static_cast<int>(rule.points.size());
        const int nl = ref.size();
        val[la][lb].resize(nq, nl);
        ref_grad[la][lb].resize(static_cast<size_t>(nq) * nl);
        std::vector<double> v(nl);
        std::vector<Vec2> g(nl);
        for (int q = 0; q < nq; ++q) {
            double t = rule.points[q];
            Vec2 p = (1.0 - t) * corners[la] + t * corners[lb];
            ref.eval(p, v.data());
            ref.grad(p, g.data());
            for (int i = 0; i < nl; ++i) {
                val[la][lb](q, i) = v[i];
                ref_grad[la][lb][static_cast<size_t>(q) * nl + i] = g[i];
            }
        }
    }
};

inline int local_vertex_index(const Triangle& tri, int v) {
    for (int k = 0; k < 3; ++k)
        if (tri.v[k] == v) return k;
    throw std::logic_error("local_vertex_index: vertex not in triangle");
}

/// max(-x, 0), the negative part.
inline double neg_part(double x) { return x < 0.0 ? -x : 0.0; }

/// Per-quad-point trace data of one edge side.
struct SideTrace {
    const Eigen::MatrixXd* val = nullptr;
    const std::vector<Vec2>* ref_grad = nullptr;
    ElemGeom geom;
    std::span<const int> dofs;
};

inline SideTrace side_trace(const Mesh& mesh, const DofMap& dm, EdgeTraceTable& table,
                            int t, const Edge& edge) {
    SideTrace s;
    int la = local_vertex_index(mesh.triangles[t], edge.v[0]);
    int lb = local_vertex_index(mesh.triangles[t], edge.v[1]);
    table.ensure(la, lb);
    s.val = &table.val[la][lb];
    s.ref_grad = &table.ref_grad[la][lb];
    s.geom = elem_geom(mesh, t);
    s.dofs = dm.dofs(t);
    return s;
}

} // namespace detail

/// Which terms of the V_h inner product to assemble.
enum class GramParts { Full, DiffusionOnly };

/// Gram matrix of the V_h inner product: diffusion volume + penalty jumps,
/// reaction/advective-scaling mass, streamline term, and upwind jump terms.
/// Interior edges carry jumps; boundary edges carry plain traces.
inline SparseMatrix assemble_gram(const Mesh& mesh, const Skeleton& skel, const DofMap& dg,
                                  const ProblemDef& prob, GramParts parts = GramParts::Full) {
    validate(prob);
    if (dg.continuity != Continuity::Broken)
        throw std::invalid_argument("assemble_gram: test space must be broken");
    if (parts == GramParts::Full && prob.kappa == 0.0 && prob.gamma == 0.0 && prob.beta == 0.0)
        throw std::invalid_argument("assemble_gram: degenerate norm (kappa, gamma, beta all zero)");

    const ReferenceElement& ref = reference_element(dg.degree);
    const int nl = ref.size();
    const int exact = 2 * dg.degree + 2;
    detail::VolumeBasis vb(ref, exact);
    detail::EdgeTraceTable et(ref, exact);
    const bool full = parts == GramParts::Full;
    const double mass_coef = prob.gamma + prob.beta / prob.domain_scale;

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::MatrixXd loc(nl, nl);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        auto g = detail::elem_geom(mesh, t);
        double h_t = mesh.diameter(t);
        loc.setZero();
        const int nq = static_cast<int>(vb.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double w = vb.rule.weights[q] * std::abs(g.det);
            Vec2 x = g.phys(vb.rule.points[q]);
            Vec2 b = prob.velocity_at(x);
            for (int i = 0; i < nl; ++i) {
                Vec2 gi = g.grad(vb.ref_grad[static_cast<size_t>(q) * nl + i]);
                double bi = dot(b, gi);
                for (int j = 0; j < nl; ++j) {
                    Vec2 gj = g.grad(vb.ref_grad[static_cast<size_t>(q) * nl + j]);
                    double val = prob.kappa * dot(gi, gj);
                    if (full) {
                        val += mass_coef * vb.val(q, i) * vb.val(q, j);
                        val += prob.beta_l * h_t * bi * dot(b, gj);
                    }
                    loc(i, j) += w * val;
                }
            }
        }
        auto dofs = dg.dofs(t);
        for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
                if (loc(i, j) != 0.0) trips.emplace_back(dofs[i], dofs[j], loc(i, j));
    }

    for (size_t e = 0; e < skel.edges.size(); ++e) {
        const Edge& edge = skel.edges[e];
        double eta = eta_e(mesh, skel, static_cast<int>(e), dg.degree);
        auto left = detail::side_trace(mesh, dg, et, edge.left, edge);
        detail::SideTrace right;
        if (edge.interior()) right = detail::side_trace(mesh, dg, et, edge.right, edge);
        const int nd = edge.interior() ? 2 * nl : nl;
        Eigen::MatrixXd eloc = Eigen::MatrixXd::Zero(nd, nd);
        std::vector<double> jump(nd);
        Vec2 a = mesh.vertices[edge.v[0]], bvert = mesh.vertices[edge.v[1]];
        const int nq = static_cast<int>(et.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double tpar = et.rule.points[q];
            double w = et.rule.weights[q] * edge.length;
            Vec2 x = (1.0 - tpar) * a + tpar * bvert;
            double coef = prob.kappa * eta;
            if (full) coef += 0.5 * std::abs(dot(prob.velocity_at(x), edge.normal));
            for (int i = 0; i < nl; ++i) jump[i] = (*left.val)(q, i);
            if (edge.interior())
                for (int i = 0; i < nl; ++i) jump[nl + i] = -(*right.val)(q, i);
            for (int i = 0; i < nd; ++i)
                for (int j = 0; j < nd; ++j) eloc(i, j) += w * coef * jump[i] * jump[j];
        }
        std::vector<int> dofs(nd);
        for (int i = 0; i < nl; ++i) dofs[i] = left.dofs[i];
        if (edge.interior())
            for (int i = 0; i < nl; ++i) dofs[nl + i] = right.dofs[i];
        for (int i = 0; i < nd; ++i)
            for (int j = 0; j < nd; ++j)
                if (eloc(i, j) != 0.0) trips.emplace_back(dofs[i], dofs[j], eloc(i, j));
    }

    SparseMatrix G(dg.n_dofs, dg.n_dofs);
    G.setFromTriplets(trips.begin(), trips.end());
    G.makeCompressed();
    return G;
}

/// dG operator of the discrete bilinear form: B(i,j) = b_h(phi_j, phi_i)
/// (trial index j, test index i). Diffusion part: volume gradients, penalty
/// jumps over all edges and consistency terms with the epsilon switch.
/// Advection-reaction part: volume terms, inflow boundary term and interior
/// upwind terms. Boundary edges use the trace convention for jump/average.
inline SparseMatrix assemble_bh(const Mesh& mesh, const Skeleton& skel, const DofMap& dg,
                                const ProblemDef& prob) {
    validate(prob);
    if (dg.continuity != Continuity::Broken)
        throw std::invalid_argument("assemble_bh: test space must be broken");

    const ReferenceElement& ref = reference_element(dg.degree);
    const int nl = ref.size();
    const int exact = 2 * dg.degree + 2;
    detail::VolumeBasis vb(ref, exact);
    detail::EdgeTraceTable et(ref, exact);

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::MatrixXd loc(nl, nl);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        auto g = detail::elem_geom(mesh, t);
        loc.setZero();
        const int nq = static_cast<int>(vb.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double w = vb.rule.weights[q] * std::abs(g.det);
            Vec2 x = g.phys(vb.rule.points[q]);
            Vec2 b = prob.velocity_at(x);
            for (int j = 0; j < nl; ++j) {
                Vec2 gj = g.grad(vb.ref_grad[static_cast<size_t>(q) * nl + j]);
                double adv_j = dot(b, gj) + prob.gamma * vb.val(q, j);
                for (int i = 0; i < nl; ++i) {
                    Vec2 gi = g.grad(vb.ref_grad[static_cast<size_t>(q) * nl + i]);
                    loc(i, j) += w * (prob.kappa * dot(gj, gi) + adv_j * vb.val(q, i));
                }
            }
        }
        auto dofs = dg.dofs(t);
        for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
                if (loc(i, j) != 0.0) trips.emplace_back(dofs[i], dofs[j], loc(i, j));
    }

    std::vector<double> jump, mean, grad_n;
    for (size_t e = 0; e < skel.edges.size(); ++e) {
        const Edge& edge = skel.edges[e];
        double eta = eta_e(mesh, skel, static_cast<int>(e), dg.degree);
        auto left = detail::side_trace(mesh, dg, et, edge.left, edge);
        detail::SideTrace right;
        const bool interior = edge.interior();
        if (interior) right = detail::side_trace(mesh, dg, et, edge.right, edge);
        const int nd = interior ? 2 * nl : nl;
        Eigen::MatrixXd eloc = Eigen::MatrixXd::Zero(nd, nd);
        jump.assign(nd, 0.0);
        mean.assign(nd, 0.0);
        grad_n.assign(nd, 0.0); // {kappa grad phi} . n_e
        Vec2 a = mesh.vertices[edge.v[0]], bvert = mesh.vertices[edge.v[1]];
        const int nq = static_cast<int>(et.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double tpar = et.rule.points[q];
            double w = et.rule.weights[q] * edge.length;
            Vec2 x = (1.0 - tpar) * a + tpar * bvert;
            double bn = dot(prob.velocity_at(x), edge.normal);
            double side_factor = interior ? 0.5 : 1.0;
            for (int i = 0; i < nl; ++i) {
                double v = (*left.val)(q, i);
                Vec2 gr = left.geom.grad((*left.ref_grad)[static_cast<size_t>(q) * nl + i]);
                jump[i] = v;
                mean[i] = side_factor * v;
                grad_n[i] = side_factor * prob.kappa * dot(gr, edge.normal);
            }
            if (interior) {
                for (int i = 0; i < nl; ++i) {
                    double v = (*right.val)(q, i);
                    Vec2 gr = right.geom.grad((*right.ref_grad)[static_cast<size_t>(q) * nl + i]);
                    jump[nl + i] = -v;
                    mean[nl + i] = 0.5 * v;
                    grad_n[nl + i] = 0.5 * prob.kappa * dot(gr, edge.normal);
                }
            }
            for (int j = 0; j < nd; ++j) {
                for (int i = 0; i < nd; ++i) {
                    double val = prob.kappa * eta * jump[j] * jump[i];
                    val += -grad_n[j] * jump[i] + prob.epsilon * jump[j] * grad_n[i];
                    if (interior)
                        val += -bn * jump[j] * mean[i] + 0.5 * std::abs(bn) * jump[j] * jump[i];
                    else
                        val += detail::neg_part(bn) * jump[j] * jump[i];
                    eloc(i, j) += w * val;
                }
            }
        }
        std::vector<int> dofs(nd);
        for (int i = 0; i < nl; ++i) dofs[i] = left.dofs[i];
        if (interior)
            for (int i = 0; i < nl; ++i) dofs[nl + i] = right.dofs[i];
        for (int i = 0; i < nd; ++i)
            for (int j = 0; j < nd; ++j)
                if (eloc(i, j) != 0.0) trips.emplace_back(dofs[i], dofs[j], eloc(i, j));
    }

    SparseMatrix B(dg.n_dofs, dg.n_dofs);
    B.setFromTriplets(trips.begin(), trips.end());
    B.makeCompressed();
    return B;
}

/// Discrete load: volume source plus weakly imposed Dirichlet data through
/// the inflow and penalty boundary terms.
inline Vector assemble_lh(const Mesh& mesh, const Skeleton& skel, const DofMap& dg,
                          const ProblemDef& prob) {
    validate(prob);
    const ReferenceElement& ref = reference_element(dg.degree);
    const int nl = ref.size();
    const int exact = 2 * dg.degree + 2;
    detail::VolumeBasis vb(ref, exact);
    detail::EdgeTraceTable et(ref, exact);

    Vector L = Vector::Zero(dg.n_dofs);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        auto g = detail::elem_geom(mesh, t);
        auto dofs = dg.dofs(t);
        const int nq = static_cast<int>(vb.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double w = vb.rule.weights[q] * std::abs(g.det);
            double f = prob.source_at(g.phys(vb.rule.points[q]));
            if (f == 0.0) continue;
            for (int i = 0; i < nl; ++i) L[dofs[i]] += w * f * vb.val(q, i);
        }
    }

    for (size_t e = 0; e < skel.edges.size(); ++e) {
        const Edge& edge = skel.edges[e];
        if (edge.interior()) continue;
        double eta = eta_e(mesh, skel, static_cast<int>(e), dg.degree);
        auto side = detail::side_trace(mesh, dg, et, edge.left, edge);
        Vec2 a = mesh.vertices[edge.v[0]], bvert = mesh.vertices[edge.v[1]];
        const int nq = static_cast<int>(et.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double tpar = et.rule.points[q];
            double w = et.rule.weights[q] * edge.length;
            Vec2 x = (1.0 - tpar) * a + tpar * bvert;
            double gd = prob.dirichlet_at(x);
            if (gd == 0.0) continue;
            double bn_neg = detail::neg_part(dot(prob.velocity_at(x), edge.normal));
            for (int i = 0; i < nl; ++i) {
                double v = (*side.val)(q, i);
                Vec2 gr = side.geom.grad((*side.ref_grad)[static_cast<size_t>(q) * nl + i]);
                double val = prob.epsilon * prob.kappa * dot(gr, edge.normal) * gd;
                val += (bn_neg + prob.kappa * eta) * gd * v;
                L[side.dofs[i]] += w * val;
            }
        }
    }
    return L;
}

/// QoI functional: q(phi_i) = mean of phi_i over omega0. Requires the mesh
/// to resolve omega0 exactly (tagged triangles tile it).
inline Vector assemble_qoi(const Mesh& mesh, const DofMap& dm, Rect omega0) {
    if (!omega0.valid()) throw std::invalid_argument("assemble_qoi: invalid omega0");
    double tagged = mesh.omega0_area();
    if (std::abs(tagged - omega0.area()) > 1e-9 * omega0.area())
        throw std::runtime_error("assemble_qoi: mesh does not conform to omega0");

    const ReferenceElement& ref = reference_element(dm.degree);
    const int nl = ref.size();
    detail::VolumeBasis vb(ref, 2 * dm.degree + 2);
    Vector q = Vector::Zero(dm.n_dofs);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (!mesh.triangles[t].in_omega0) continue;
        auto g = detail::elem_geom(mesh, t);
        auto dofs = dm.dofs(t);
        const int nq = static_cast<int>(vb.rule.points.size());
        for (int q2 = 0; q2 < nq; ++q2) {
            double w = vb.rule.weights[q2] * std::abs(g.det);
            for (int i = 0; i < nl; ++i) q[dofs[i]] += w * vb.val(q2, i);
        }
    }
    q /= omega0.area();
    return q;
}

namespace detail {

/// Shared worker for the element-local pairing. Accumulates, per element,
/// the volume and boundary-trace terms plus the half-weighted interior jump
/// terms, evaluated on two broken coefficient vectors.
inline void accumulate_local_pairings(const Mesh& mesh, const Skeleton& skel,
                                      const DofMap& dg, const ProblemDef& prob,
                                      const Vector& w, const Vector& v,
                                      std::vector<double>& out, int only_element = -1) {
    validate(prob);
    const ReferenceElement& ref = reference_element(dg.degree);
    const int nl = ref.size();
    const int exact = 2 * dg.degree + 2;
    VolumeBasis vbas(ref, exact);
    EdgeTraceTable et(ref, exact);
    const double mass_coef = prob.gamma + prob.beta / prob.domain_scale;

    auto local_value = [&](const Eigen::MatrixXd& val, std::span<const int> dofs,
                           const Vector& coef, int q) {
        double s = 0.0;
        for (int i = 0; i < nl; ++i) s += val(q, i) * coef[dofs[i]];
        return s;
    };

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (only_element >= 0 && t != only_element) continue;
        auto g = elem_geom(mesh, t);
        auto dofs = dg.dofs(t);
        double h_t = mesh.diameter(t);
        double acc = 0.0;
        const int nq = static_cast<int>(vbas.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double wq = vbas.rule.weights[q] * std::abs(g.det);
            Vec2 x = g.phys(vbas.rule.points[q]);
            Vec2 b = prob.velocity_at(x);
            double wv = 0.0, vv = 0.0, wbg = 0.0, vbg = 0.0;
            Vec2 wg{0, 0}, vg{0, 0};
            for (int i = 0; i < nl; ++i) {
                Vec2 gi = g.grad(vbas.ref_grad[static_cast<size_t>(q) * nl + i]);
                wv += vbas.val(q, i) * w[dofs[i]];
                vv += vbas.val(q, i) * v[dofs[i]];
                wg += w[dofs[i]] * gi;
                vg += v[dofs[i]] * gi;
            }
            wbg = dot(b, wg);
            vbg = dot(b, vg);
            acc += wq * (prob.kappa * dot(wg, vg) + mass_coef * wv * vv +
                         prob.beta_l * h_t * wbg * vbg);
        }
        out[t] += acc;
    }

    for (size_t e = 0; e < skel.edges.size(); ++e) {
        const Edge& edge = skel.edges[e];
        if (only_element >= 0 && edge.left != only_element &&
            (!edge.interior() || edge.right != only_element))
            continue;
        double eta = eta_e(mesh, skel, static_cast<int>(e), dg.degree);
        auto left = side_trace(mesh, dg, et, edge.left, edge);
        SideTrace right;
        const bool interior = edge.interior();
        if (interior) right = side_trace(mesh, dg, et, edge.right, edge);
        Vec2 a = mesh.vertices[edge.v[0]], bvert = mesh.vertices[edge.v[1]];
        double acc = 0.0;
        const int nq = static_cast<int>(et.rule.points.size());
        for (int q = 0; q < nq; ++q) {
            double tpar = et.rule.points[q];
            double wq = et.rule.weights[q] * edge.length;
            Vec2 x = (1.0 - tpar) * a + tpar * bvert;
            double coef = prob.kappa * eta +
                          0.5 * std::abs(dot(prob.velocity_at(x), edge.normal));
            double wj = local_value(*left.val, left.dofs, w, q);
            double vj = local_value(*left.val, left.dofs, v, q);
            if (interior) {
                wj -= local_value(*right.val, right.dofs, w, q);
                vj -= local_value(*right.val, right.dofs, v, q);
            }
            acc += wq * coef * wj * vj;
        }
        if (interior) {
            if (only_element < 0 || edge.left == only_element) out[edge.left] += 0.5 * acc;
            if (only_element < 0 || edge.right == only_element) out[edge.right] += 0.5 * acc;
        } else {
            out[edge.left] += acc;
        }
    }
}

} // namespace detail

/// Element-local inner product (w, v)_T: volume and boundary-trace terms of T
/// plus half of each interior-edge jump term of its edges. Summing over all
/// elements reproduces w^T G v.
inline double local_pairing(const Mesh& mesh, const Skeleton& skel, const DofMap& dg,
                            const ProblemDef& prob, const Vector& w, const Vector& v,
                            int element) {
    if (element < 0 || element >= mesh.n_triangles())
        throw std::invalid_argument("local_pairing: element index out of range");
    std::vector<double> out(mesh.n_triangles(), 0.0);
    detail::accumulate_local_pairings(mesh, skel, dg, prob, w, v, out, element);
    return out[element];
}

/// All element-local pairings in one sweep.
inline std::vector<double> local_pairing_all(const Mesh& mesh, const Skeleton& skel,
                                             const DofMap& dg, const ProblemDef& prob,
                                             const Vector& w, const Vector& v) {
    std::vector<double> out(mesh.n_triangles(), 0.0);
    detail::accumulate_local_pairings(mesh, skel, dg, prob, w, v, out);
    return out;
}

} // namespace asfem
