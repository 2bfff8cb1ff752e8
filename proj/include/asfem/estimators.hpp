#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "asfem/assembly.hpp"
#include "asfem/linear_solve.hpp"

namespace asfem {

enum class EstimatorKind { Energy, GoaAdjointDg, GoaAdjointResidual };

inline const char* to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Energy: return "energy";
        case EstimatorKind::GoaAdjointDg: return "goa-dg";
        case EstimatorKind::GoaAdjointResidual: return "goa-residual";
    }
    return "?";
}

/// Per-element refinement indicators with the matching global estimate.
struct IndicatorField {
    EstimatorKind kind = EstimatorKind::Energy;
    std::vector<double> eta; // nonnegative, one per element
    double global = 0.0;

    double total() const {
        double s = 0.0;
        for (double e : eta) s += e;
        return s;
    }
};

/// Adjoint residual representative: eps* = G^{-1} (q_V - B^T v*).
inline Vector adjoint_residual(const GramSolver& gram, const SparseMatrix& B,
                               const Vector& v_star, const Vector& q_V) {
    return gram.solve(q_V - B.transpose() * v_star);
}

inline Vector adjoint_residual(const SparseMatrix& G, const SparseMatrix& B,
                               const Vector& v_star, const Vector& q_V) {
    return adjoint_residual(GramSolver(G), B, v_star, q_V);
}

/// Global error estimate: |(eps_h, aux)_{V_h}| for the goal-oriented kinds,
/// (eps_h, eps_h)_{V_h} for the energy kind.
inline double global_estimate(EstimatorKind kind, const SparseMatrix& G,
                              const Vector& eps_h, const Vector& aux) {
    if (kind == EstimatorKind::Energy) return eps_h.dot(G * eps_h);
    return std::abs(eps_h.dot(G * aux));
}

/// Element indicators via the localized inner product: (eps,eps)_T for the
/// energy kind (squared local norm), ||eps||_T ||aux||_T products for the
/// goal-oriented kinds. `aux` is v_dg*-v* or eps* depending on the kind;
/// `square_goa` squares the products instead (experimentation knob).
inline IndicatorField element_indicators(EstimatorKind kind, const Mesh& mesh,
                                         const Skeleton& skel, const DofMap& dg,
                                         const ProblemDef& prob, const Vector& eps_h,
                                         const Vector* aux = nullptr,
                                         bool square_goa = false) {
    IndicatorField field;
    field.kind = kind;
    auto eps_local = local_pairing_all(mesh, skel, dg, prob, eps_h, eps_h);
    if (kind == EstimatorKind::Energy) {
        field.eta.resize(eps_local.size());
        double total = 0.0;
        for (size_t t = 0; t < eps_local.size(); ++t) {
            field.eta[t] = std::max(eps_local[t], 0.0);
            total += field.eta[t];
        }
        field.global = total;
        return field;
    }
    if (aux == nullptr)
        throw std::invalid_argument("element_indicators: goal-oriented kind needs aux vector");
    auto aux_local = local_pairing_all(mesh, skel, dg, prob, *aux, *aux);
    auto cross_local = local_pairing_all(mesh, skel, dg, prob, eps_h, *aux);
    field.eta.resize(eps_local.size());
    double global = 0.0;
    for (size_t t = 0; t < eps_local.size(); ++t) {
        double prod = std::sqrt(std::max(eps_local[t], 0.0)) *
                      std::sqrt(std::max(aux_local[t], 0.0));
        field.eta[t] = square_goa ? prod * prod : prod;
        global += cross_local[t];
    }
    field.global = std::abs(global);
    return field;
}

} // namespace asfem
