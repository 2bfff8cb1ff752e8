#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Sparse>

#include "asfem/mesh.hpp"
#include "asfem/reference_element.hpp"

namespace asfem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class Continuity { Continuous, Broken };

/// Element-to-global index table for a piecewise polynomial space.
struct DofMap {
    Continuity continuity = Continuity::Broken;
    int degree = 1;
    int n_dofs = 0;
    int n_local = 0;
    int n_elements = 0;
    int n_mesh_vertices = 0;
    std::vector<int> table;         // n_elements * n_local, element-major
    std::vector<int> boundary_dofs; // continuous spaces only, informational

    std::span<const int> dofs(int element) const {
        return {table.data() + static_cast<size_t>(element) * n_local,
                static_cast<size_t>(n_local)};
    }
};

namespace detail {

inline int continuous_vertex_dof(std::vector<int>& vertex_dof, int v, int& next) {
    if (vertex_dof[v] < 0) vertex_dof[v] = next++;
    return vertex_dof[v];
}

inline int continuous_edge_dof(std::map<std::tuple<int, int, int>, int>& edge_dof,
                               int va, int vb, int step, int p, int& next) {
    // `step` counts lattice steps from va towards vb; positions are stored
    // relative to the smaller vertex index so both sides agree.
    int pos = va < vb ? step : p - step;
    auto key = std::make_tuple(std::min(va, vb), std::max(va, vb), pos);
    auto [it, inserted] = edge_dof.emplace(key, next);
    if (inserted) ++next;
    return it->second;
}

} // namespace detail

/// Builds the dof map of the broken space P^p(mesh) or of the continuous
/// Lagrange subspace of the same degree.
inline DofMap build_space(const Mesh& mesh, int degree, Continuity continuity) {
    if (degree < 1) throw std::invalid_argument("build_space: degree must be >= 1");
    if (degree > kMaxDegree)
        throw std::invalid_argument("build_space: degree must be <= 4");

    const ReferenceElement& ref = reference_element(degree);
    DofMap dm;
    dm.continuity = continuity;
    dm.degree = degree;
    dm.n_local = ref.size();
    dm.n_elements = mesh.n_triangles();
    dm.n_mesh_vertices = mesh.n_vertices();
    dm.table.resize(static_cast<size_t>(dm.n_elements) * dm.n_local);

    if (continuity == Continuity::Broken) {
        for (size_t k = 0; k < dm.table.size(); ++k) dm.table[k] = static_cast<int>(k);
        dm.n_dofs = static_cast<int>(dm.table.size());
        return dm;
    }

    const int p = degree;
    std::vector<int> vertex_dof(mesh.n_vertices(), -1);
    std::map<std::tuple<int, int, int>, int> edge_dof; // (min v, max v, position)
    int next = 0;

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tv = mesh.triangles[t].v;
        for (int loc = 0; loc < ref.size(); ++loc) {
            auto [i, j] = ref.lattice()[loc];
            int g = -1;
            if (i == 0 && j == 0) g = detail::continuous_vertex_dof(vertex_dof, tv[0], next);
            else if (i == p && j == 0) g = detail::continuous_vertex_dof(vertex_dof, tv[1], next);
            else if (i == 0 && j == p) g = detail::continuous_vertex_dof(vertex_dof, tv[2], next);
            else if (j == 0) g = detail::continuous_edge_dof(edge_dof, tv[0], tv[1], i, p, next);
            else if (i == 0) g = detail::continuous_edge_dof(edge_dof, tv[0], tv[2], j, p, next);
            else if (i + j == p) g = detail::continuous_edge_dof(edge_dof, tv[1], tv[2], j, p, next);
            else g = next++;
            dm.table[static_cast<size_t>(t) * dm.n_local + loc] = g;
        }
    }
    dm.n_dofs = next;

    // Boundary dofs: those keyed to boundary vertices or boundary edges.
    std::map<std::pair<int, int>, int> edge_count;
    for (int t = 0; t < mesh.n_triangles(); ++t)
        for (int e = 0; e < 3; ++e) {
            auto [a, b] = mesh.edge_vertices(t, e);
            ++edge_count[detail::sorted_pair(a, b)];
        }
    std::vector<bool> vertex_on_boundary(mesh.n_vertices(), false);
    std::vector<bool> is_boundary(dm.n_dofs, false);
    for (const auto& [key, count] : edge_count) {
        if (count != 1) continue;
        vertex_on_boundary[key.first] = vertex_on_boundary[key.second] = true;
        for (int pos = 1; pos < p; ++pos) {
            auto it = edge_dof.find({key.first, key.second, pos});
            if (it != edge_dof.end()) is_boundary[it->second] = true;
        }
    }
    for (int v = 0; v < mesh.n_vertices(); ++v)
        if (vertex_on_boundary[v] && vertex_dof[v] >= 0) is_boundary[vertex_dof[v]] = true;
    for (int d = 0; d < dm.n_dofs; ++d)
        if (is_boundary[d]) dm.boundary_dofs.push_back(d);
    return dm;
}

/// Conforming embedding: for a coefficient vector w over the continuous
/// space, C*w holds the broken-space coefficients of the same function
/// (elementwise nodal interpolation, exact since the spaces are nested).
inline SparseMatrix embedding_matrix(const DofMap& cg, const DofMap& dg) {
    if (cg.continuity != Continuity::Continuous || dg.continuity != Continuity::Broken)
        throw std::invalid_argument("embedding_matrix: expects (continuous, broken)");
    if (cg.degree > dg.degree)
        throw std::invalid_argument("embedding_matrix: continuous degree exceeds broken degree");
    if (cg.n_elements != dg.n_elements || cg.n_mesh_vertices != dg.n_mesh_vertices)
        throw std::invalid_argument("embedding_matrix: mismatched meshes");

    const ReferenceElement& ref_cg = reference_element(cg.degree);
    const ReferenceElement& ref_dg = reference_element(dg.degree);

    // Values of the continuous basis at the broken nodes; Kronecker pattern
    // entries are exact in exact arithmetic, so snap them.
    Eigen::MatrixXd vals(ref_dg.size(), ref_cg.size());
    std::vector<double> row(ref_cg.size());
    for (int i = 0; i < ref_dg.size(); ++i) {
        ref_cg.eval(ref_dg.nodes()[i], row.data());
        for (int j = 0; j < ref_cg.size(); ++j) {
            double v = row[j];
            if (std::abs(v) < 5e-14) v = 0.0;
            else if (std::abs(v - 1.0) < 5e-14) v = 1.0;
            vals(i, j) = v;
        }
    }

    std::vector<Eigen::Triplet<double>> trips;
    for (int t = 0; t < dg.n_elements; ++t) {
        auto di = dg.dofs(t);
        auto cj = cg.dofs(t);
        for (int i = 0; i < ref_dg.size(); ++i)
            for (int j = 0; j < ref_cg.size(); ++j)
                if (vals(i, j) != 0.0) trips.emplace_back(di[i], cj[j], vals(i, j));
    }
    SparseMatrix C(dg.n_dofs, cg.n_dofs);
    C.setFromTriplets(trips.begin(), trips.end());
    C.makeCompressed();
    return C;
}

} // namespace asfem
