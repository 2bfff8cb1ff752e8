#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "asfem/mesh.hpp"

namespace asfem {

/// One oriented mesh edge. For interior edges the normal points from the
/// left triangle (T+) to the right one (T-); on the boundary it is the
/// outward normal of the domain. T+ is the adjacent triangle with the
/// smaller index.
struct Edge {
    std::array<int, 2> v{};
    int left = -1;
    int right = -1; // -1 on boundary edges
    Vec2 normal{};
    double length = 0.0;

    bool interior() const { return right >= 0; }
};

struct Skeleton {
    std::vector<Edge> edges;
    std::vector<std::array<int, 3>> tri_edges; // edge index opposite local vertex k
    int n_interior = 0;
    int n_boundary = 0;
};

/// Extracts the skeleton of a conforming mesh. Throws if any geometric edge
/// has more than two incident triangles or a triangle has non-positive area.
inline Skeleton skeleton(const Mesh& mesh) {
    Skeleton skel;
    skel.tri_edges.assign(mesh.n_triangles(), {-1, -1, -1});

    std::map<std::pair<int, int>, int> index;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (mesh.area(t) <= 0.0)
            throw std::runtime_error("skeleton: non-positive triangle area");
        for (int e = 0; e < 3; ++e) {
            auto [a, b] = mesh.edge_vertices(t, e);
            auto key = detail::sorted_pair(a, b);
            auto [it, inserted] = index.emplace(key, static_cast<int>(skel.edges.size()));
            if (inserted) {
                Edge edge;
                edge.v = {a, b};
                edge.left = t;
                edge.length = norm(mesh.vertices[b] - mesh.vertices[a]);
                skel.edges.push_back(edge);
            } else {
                Edge& edge = skel.edges[it->second];
                if (edge.right >= 0)
                    throw std::runtime_error("skeleton: edge shared by more than 2 triangles");
                edge.right = t;
                if (edge.right < edge.left) std::swap(edge.left, edge.right);
            }
            skel.tri_edges[t][e] = it->second;
        }
    }

    for (auto& edge : skel.edges) {
        Vec2 a = mesh.vertices[edge.v[0]], b = mesh.vertices[edge.v[1]];
        Vec2 n = perp(b - a);
        n = n * (1.0 / norm(n));
        Vec2 mid = 0.5 * (a + b);
        if (dot(n, mid - mesh.centroid(edge.left)) < 0.0) n = {-n.x, -n.y};
        edge.normal = n;
        edge.interior() ? ++skel.n_interior : ++skel.n_boundary;
    }
    return skel;
}

/// Stabilization weight of the interior-penalty form: (p_t+1)(p_t+d)/d times
/// the perimeter/area ratio of the adjacent triangle(s), averaged across
/// interior edges.
inline double eta_e(const Mesh& mesh, const Skeleton& skel, int edge, int p_t, int d = 2) {
    if (d != 2) throw std::invalid_argument("eta_e: only d = 2 is supported");
    if (p_t < 1) throw std::invalid_argument("eta_e: p_t must be >= 1");
    auto ratio = [&](int t) {
        auto c = mesh.corners(t);
        double per = norm(c[1] - c[0]) + norm(c[2] - c[1]) + norm(c[0] - c[2]);
        double area = signed_area(c[0], c[1], c[2]);
        if (area <= 0.0) throw std::runtime_error("eta_e: degenerate triangle");
        return per / area;
    };
    const Edge& e = skel.edges[edge];
    double factor = static_cast<double>((p_t + 1) * (p_t + d)) / d;
    if (e.interior()) return factor * 0.5 * (ratio(e.left) + ratio(e.right));
    return factor * ratio(e.left);
}

} // namespace asfem
