#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "asfem/geometry.hpp"

namespace asfem {

/// Local edge k of a triangle is the edge opposite local vertex k:
/// edge 0 = (v1,v2), edge 1 = (v2,v0), edge 2 = (v0,v1).
struct Triangle {
    std::array<int, 3> v{};
    int refinement_edge = 0; // local edge index in {0,1,2}
    int generation = 0;
    bool in_omega0 = false;
};

/// Conforming 2D triangulation. Immutable after construction; refinement
/// produces a new mesh value.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<Triangle> triangles;
    Rect omega0{};       // QoI subregion the mesh conforms to (if any)
    bool has_omega0 = false;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }

    std::array<Vec2, 3> corners(int t) const {
        const auto& tri = triangles[t];
        return {vertices[tri.v[0]], vertices[tri.v[1]], vertices[tri.v[2]]};
    }

    double area(int t) const {
        auto c = corners(t);
        return signed_area(c[0], c[1], c[2]);
    }

    /// h_T: triangle diameter, i.e. the longest edge length.
    double diameter(int t) const {
        auto c = corners(t);
        return std::max({norm(c[1] - c[0]), norm(c[2] - c[1]), norm(c[0] - c[2])});
    }

    Vec2 centroid(int t) const {
        auto c = corners(t);
        return {(c[0].x + c[1].x + c[2].x) / 3.0, (c[0].y + c[1].y + c[2].y) / 3.0};
    }

    double total_area() const {
        double a = 0.0;
        for (int t = 0; t < n_triangles(); ++t) a += area(t);
        return a;
    }

    double omega0_area() const {
        double a = 0.0;
        for (int t = 0; t < n_triangles(); ++t)
            if (triangles[t].in_omega0) a += area(t);
        return a;
    }

    /// Endpoints (as vertex indices) of local edge e of triangle t.
    std::array<int, 2> edge_vertices(int t, int e) const {
        const auto& tv = triangles[t].v;
        return {tv[(e + 1) % 3], tv[(e + 2) % 3]};
    }
};

namespace detail {

inline std::pair<int, int> sorted_pair(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

/// Longest edge of a triangle, ties broken by the sorted global vertex pair
/// so that the choice induces a strict total order on mesh edges.
inline int longest_edge(const Mesh& mesh, const Triangle& tri) {
    int best = 0;
    double best_len = -1.0;
    std::pair<int, int> best_key{-1, -1};
    for (int e = 0; e < 3; ++e) {
        int a = tri.v[(e + 1) % 3], b = tri.v[(e + 2) % 3];
        double len = norm(mesh.vertices[a] - mesh.vertices[b]);
        auto key = sorted_pair(a, b);
        if (len > best_len || (len == best_len && key > best_key)) {
            best = e;
            best_len = len;
            best_key = key;
        }
    }
    return best;
}

/// Triangulates the axis-aligned cells of a breakpoint grid, keeping cells
/// whose center lies inside the domain (per the `inside` predicate), and
/// tags triangles contained in omega0.
template <typename InsideFn>
Mesh triangulate_grid(const std::vector<double>& xs, const std::vector<double>& ys,
                      InsideFn inside, Rect omega0) {
    Mesh mesh;
    mesh.omega0 = omega0;
    mesh.has_omega0 = true;

    const int nx = static_cast<int>(xs.size());
    const int ny = static_cast<int>(ys.size());
    std::vector<int> vid(static_cast<size_t>(nx) * ny, -1);
    auto vertex = [&](int i, int j) {
        int& id = vid[static_cast<size_t>(j) * nx + i];
        if (id < 0) {
            id = mesh.n_vertices();
            mesh.vertices.push_back({xs[i], ys[j]});
        }
        return id;
    };

    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            Vec2 center{0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])};
            if (!inside(center)) continue;
            int v00 = vertex(i, j), v10 = vertex(i + 1, j);
            int v11 = vertex(i + 1, j + 1), v01 = vertex(i, j + 1);
            bool tagged = omega0.contains(center);
            for (auto tv : {std::array<int, 3>{v00, v10, v11},
                            std::array<int, 3>{v00, v11, v01}}) {
                Triangle tri;
                tri.v = tv;
                tri.in_omega0 = tagged;
                mesh.triangles.push_back(tri);
            }
        }
    }
    for (auto& tri : mesh.triangles) tri.refinement_edge = longest_edge(mesh, tri);
    return mesh;
}

inline std::vector<double> merged_breaks(double lo, double hi, int n,
                                         std::initializer_list<double> extra) {
    std::vector<double> b;
    for (int i = 0; i <= n; ++i) b.push_back(lo + (hi - lo) * i / n);
    for (double x : extra)
        if (x > lo && x < hi) b.push_back(x);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(),
                        [](double a, double c) { return std::abs(a - c) < 1e-12; }),
            b.end());
    return b;
}

} // namespace detail

/// Initial mesh of the cross-shaped domain (-2,2)x(-1,1) u (-1,1)x(-2,2),
/// conforming to the QoI region (1.2,1.4)x(0.2,0.4).
inline Mesh build_cross_mesh() {
    Rect omega0{1.2, 0.2, 1.4, 0.4};
    std::vector<double> xs{-2.0, -1.0, 0.0, 1.0, 1.2, 1.4, 2.0};
    std::vector<double> ys{-2.0, -1.0, 0.0, 0.2, 0.4, 1.0, 2.0};
    auto inside = [](Vec2 p) {
        bool horiz = p.x > -2 && p.x < 2 && p.y > -1 && p.y < 1;
        bool vert = p.x > -1 && p.x < 1 && p.y > -2 && p.y < 2;
        return horiz || vert;
    };
    return detail::triangulate_grid(xs, ys, inside, omega0);
}

/// Mesh of the unit square with n x n base cells, refined so that grid lines
/// pass through the omega0 rectangle boundary.
inline Mesh build_square_mesh(int n, Rect omega0) {
    if (n < 1) throw std::invalid_argument("build_square_mesh: n must be >= 1");
    if (!omega0.valid() || omega0.x0 <= 0.0 || omega0.y0 <= 0.0 ||
        omega0.x1 >= 1.0 || omega0.y1 >= 1.0)
        throw std::invalid_argument(
            "build_square_mesh: omega0 must lie strictly inside the unit square");
    auto xs = detail::merged_breaks(0.0, 1.0, n, {omega0.x0, omega0.x1});
    auto ys = detail::merged_breaks(0.0, 1.0, n, {omega0.y0, omega0.y1});
    auto inside = [](Vec2) { return true; };
    return detail::triangulate_grid(xs, ys, inside, omega0);
}

/// Newest-vertex bisection of the marked triangles with conformity closure.
/// Children take the parent's non-refinement edges as their refinement edges
/// (the edge opposite the newly created midpoint vertex).
inline Mesh bisect(const Mesh& mesh, const std::vector<int>& marked) {
    if (mesh.n_triangles() == 0) throw std::invalid_argument("bisect: empty mesh");
    for (int t : marked)
        if (t < 0 || t >= mesh.n_triangles())
            throw std::invalid_argument("bisect: marked index out of range");
    if (marked.empty()) return mesh;

    using EdgeKey = std::pair<int, int>;
    auto edge_key = [&](int t, int e) {
        auto [a, b] = mesh.edge_vertices(t, e);
        return detail::sorted_pair(a, b);
    };

    // Closure on the set of split edges: a triangle with any split edge must
    // also split its refinement edge.
    std::map<EdgeKey, int> split; // edge -> midpoint vertex id (-1 until created)
    std::map<EdgeKey, std::vector<int>> incident;
    for (int t = 0; t < mesh.n_triangles(); ++t)
        for (int e = 0; e < 3; ++e) incident[edge_key(t, e)].push_back(t);

    // Seed with the refinement edges of the marked triangles, then propagate.
    std::vector<EdgeKey> queue;
    for (int t : marked) queue.push_back(edge_key(t, mesh.triangles[t].refinement_edge));
    while (!queue.empty()) {
        EdgeKey key = queue.back();
        queue.pop_back();
        if (!split.emplace(key, -1).second) continue;
        for (int t : incident[key]) {
            EdgeKey ref = edge_key(t, mesh.triangles[t].refinement_edge);
            if (!split.count(ref)) queue.push_back(ref);
        }
    }

    Mesh out;
    out.vertices = mesh.vertices;
    out.omega0 = mesh.omega0;
    out.has_omega0 = mesh.has_omega0;
    for (auto& [key, mid] : split) {
        mid = out.n_vertices();
        out.vertices.push_back(0.5 * (mesh.vertices[key.first] + mesh.vertices[key.second]));
    }

    auto tag = [&](const Triangle& tri) {
        Vec2 c = (out.vertices[tri.v[0]] + out.vertices[tri.v[1]] + out.vertices[tri.v[2]]) * (1.0 / 3.0);
        return out.has_omega0 && out.omega0.contains(c);
    };

    // Bisect tri through its refinement edge; children may need one further
    // bisection when an inherited parent edge is also split.
    auto emit = [&](const Triangle& tri, auto&& self) -> void {
        int r = tri.refinement_edge;
        auto key = detail::sorted_pair(tri.v[(r + 1) % 3], tri.v[(r + 2) % 3]);
        auto it = split.find(key);
        if (it == split.end()) {
            Triangle t = tri;
            t.in_omega0 = tag(t);
            out.triangles.push_back(t);
            return;
        }
        int mid = it->second;
        int peak = tri.v[r], a = tri.v[(r + 1) % 3], b = tri.v[(r + 2) % 3];
        Triangle c1, c2;
        c1.v = {peak, a, mid};   // refinement edge opposite mid: (peak, a)
        c2.v = {peak, mid, b};   // refinement edge opposite mid: (b, peak)
        c1.refinement_edge = 2;
        c2.refinement_edge = 1;
        c1.generation = c2.generation = tri.generation + 1;
        self(c1, self);
        self(c2, self);
    };
    for (const auto& tri : mesh.triangles) emit(tri, emit);
    return out;
}

/// Plain-text mesh dump: header `nv nt`, then `x y` per vertex, then
/// `i j k tag indicator` per triangle. `indicator` is the latest per-element
/// estimate (0 when none is available).
inline void write_mesh_dump(const Mesh& mesh, const std::vector<double>& indicators,
                            std::ostream& os) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d %d\n", mesh.n_vertices(), mesh.n_triangles());
    os << buf;
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "%.15g %.15g\n", v.x, v.y);
        os << buf;
    }
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double ind = t < static_cast<int>(indicators.size()) ? indicators[t] : 0.0;
        std::snprintf(buf, sizeof buf, "%d %d %d %d %.15g\n", tri.v[0], tri.v[1],
                      tri.v[2], tri.in_omega0 ? 1 : 0, ind);
        os << buf;
    }
}

} // namespace asfem
