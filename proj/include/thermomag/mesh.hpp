#pragma once

// Tensor-grid triangulations of an outer box with an embedded rectangular
// magnet, nested red refinement, and the magnet-boundary edge set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "thermomag/error.hpp"

namespace thermomag {

using Vec2 = Eigen::Vector2d;

struct Rect {
    double xmin = 0.0;
    double xmax = 1.0;
    double ymin = 0.0;
    double ymax = 1.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    double perimeter() const { return 2.0 * (width() + height()); }
    bool valid() const { return xmin < xmax && ymin < ymax; }
    bool contains(const Vec2& p) const {
        return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
    }
    bool strictly_contains(const Rect& r) const {
        return r.xmin > xmin && r.xmax < xmax && r.ymin > ymin && r.ymax < ymax;
    }
    bool on_boundary(const Vec2& p) const {
        return contains(p) && (p.x() == xmin || p.x() == xmax || p.y() == ymin || p.y() == ymax);
    }
    friend bool operator==(const Rect&, const Rect&) = default;
};

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    double length = 0.0;
};

using Element = std::array<int, 3>;

/// Conforming triangulation of the outer box. Elements are counterclockwise.
struct Triangulation {
    std::vector<Vec2> nodes;
    std::vector<Element> elements;
    std::vector<double> element_area;
    std::vector<std::uint8_t> magnet_flag;
    std::vector<int> outer_boundary_nodes;
    std::vector<BoundaryEdge> magnet_boundary_edges;
    Rect outer;
    Rect magnet;
    int level = 0;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_elements() const { return elements.size(); }

    /// Indices of magnet-flagged elements, in increasing order.
    std::vector<int> magnet_elements() const {
        std::vector<int> out;
        for (std::size_t e = 0; e < elements.size(); ++e)
            if (magnet_flag[e]) out.push_back(static_cast<int>(e));
        return out;
    }

    Vec2 centroid(int e) const {
        const auto& t = elements[e];
        return (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) / 3.0;
    }
};

/// Magnet-only triangulation together with the maps back into its parent.
struct SubMesh {
    Triangulation mesh;
    std::vector<int> parent_node;     // local node -> parent node
    std::vector<int> parent_element;  // local element -> parent element
};

namespace detail {

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

inline std::vector<double> grid_lines(double lo, double in_lo, double in_hi, double hi, int n) {
    const std::array<double, 4> breaks{lo, in_lo, in_hi, hi};
    std::vector<double> out;
    out.push_back(lo);
    for (int s = 0; s < 3; ++s) {
        const double a = breaks[s];
        const double b = breaks[s + 1];
        for (int i = 1; i < n; ++i) out.push_back(a + (b - a) * static_cast<double>(i) / n);
        out.push_back(b);
    }
    return out;
}

inline std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

// Recomputes areas, outer boundary nodes and magnet boundary edges.
inline void finalize(Triangulation& mesh) {
    mesh.element_area.resize(mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& t = mesh.elements[e];
        const double a = signed_area(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
        if (!(a > 0.0)) throw GeometryError("degenerate or clockwise element");
        mesh.element_area[e] = a;
    }

    mesh.outer_boundary_nodes.clear();
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
        if (mesh.outer.on_boundary(mesh.nodes[i])) mesh.outer_boundary_nodes.push_back(static_cast<int>(i));

    // An edge lies on the magnet boundary iff exactly one of its incident
    // elements is a magnet element.
    struct Incidence {
        int magnet_count = 0;
        int total = 0;
        int a = 0;
        int b = 0;
    };
    std::map<std::pair<int, int>, Incidence> edges;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& t = mesh.elements[e];
        for (int k = 0; k < 3; ++k) {
            const int a = t[k];
            const int b = t[(k + 1) % 3];
            auto& inc = edges[edge_key(a, b)];
            ++inc.total;
            if (mesh.magnet_flag[e]) {
                ++inc.magnet_count;
                inc.a = a;
                inc.b = b;
            }
        }
    }
    mesh.magnet_boundary_edges.clear();
    for (const auto& [key, inc] : edges) {
        if (inc.magnet_count == 1)
            mesh.magnet_boundary_edges.push_back({inc.a, inc.b, (mesh.nodes[inc.b] - mesh.nodes[inc.a]).norm()});
    }
}

}  // namespace detail

/// Builds the tensor grid whose lines pass through the outer box and magnet
/// corners; each of the three spans per axis is cut `base_divisions` times and
/// every cell is split along its lower-left to upper-right diagonal.
inline Triangulation build_mesh(const Rect& outer, const Rect& magnet, int base_divisions) {
    if (!outer.valid() || !magnet.valid()) throw GeometryError("rectangle with non-positive extent");
    if (!outer.strictly_contains(magnet)) throw GeometryError("magnet is not strictly inside the outer box");
    if (base_divisions < 1) throw GeometryError("base_divisions must be >= 1");

    const auto xs = detail::grid_lines(outer.xmin, magnet.xmin, magnet.xmax, outer.xmax, base_divisions);
    const auto ys = detail::grid_lines(outer.ymin, magnet.ymin, magnet.ymax, outer.ymax, base_divisions);
    const int nx = static_cast<int>(xs.size());
    const int ny = static_cast<int>(ys.size());

    Triangulation mesh;
    mesh.outer = outer;
    mesh.magnet = magnet;
    mesh.nodes.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) mesh.nodes.emplace_back(xs[i], ys[j]);

    auto id = [nx](int i, int j) { return j * nx + i; };
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const int ll = id(i, j), lr = id(i + 1, j), ur = id(i + 1, j + 1), ul = id(i, j + 1);
            mesh.elements.push_back({ll, lr, ur});
            mesh.elements.push_back({ll, ur, ul});
        }
    }
    mesh.magnet_flag.resize(mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e)
        mesh.magnet_flag[e] = magnet.contains(mesh.centroid(static_cast<int>(e))) ? 1 : 0;
    detail::finalize(mesh);
    return mesh;
}

/// Red refinement: every triangle is split into four by its edge midpoints.
/// Parent nodes keep their indices and coordinates.
inline Triangulation refine_uniform(const Triangulation& mesh) {
    Triangulation out;
    out.outer = mesh.outer;
    out.magnet = mesh.magnet;
    out.level = mesh.level + 1;
    out.nodes = mesh.nodes;

    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = detail::edge_key(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(out.nodes.size());
        out.nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
        midpoint.emplace(key, idx);
        return idx;
    };

    out.elements.reserve(4 * mesh.elements.size());
    out.magnet_flag.reserve(4 * mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto [a, b, c] = mesh.elements[e];
        const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
        out.elements.push_back({a, ab, ca});
        out.elements.push_back({ab, b, bc});
        out.elements.push_back({ca, bc, c});
        out.elements.push_back({ab, bc, ca});
        for (int k = 0; k < 4; ++k) out.magnet_flag.push_back(mesh.magnet_flag[e]);
    }
    detail::finalize(out);
    return out;
}

inline Triangulation refine_uniform(Triangulation mesh, int times) {
    for (int i = 0; i < times; ++i) mesh = refine_uniform(mesh);
    return mesh;
}

/// Edges on the magnet boundary, oriented as in their magnet element.
inline const std::vector<BoundaryEdge>& magnet_boundary(const Triangulation& mesh) {
    return mesh.magnet_boundary_edges;
}

/// Extracts the magnet elements as a standalone triangulation; its
/// `magnet_boundary_edges` are then the boundary of the magnet itself.
inline SubMesh extract_magnet(const Triangulation& mesh) {
    SubMesh sub;
    sub.mesh.outer = mesh.magnet;
    sub.mesh.magnet = mesh.magnet;
    sub.mesh.level = mesh.level;
    std::vector<int> local(mesh.nodes.size(), -1);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        if (!mesh.magnet_flag[e]) continue;
        Element t{};
        for (int k = 0; k < 3; ++k) {
            const int g = mesh.elements[e][k];
            if (local[g] < 0) {
                local[g] = static_cast<int>(sub.parent_node.size());
                sub.parent_node.push_back(g);
                sub.mesh.nodes.push_back(mesh.nodes[g]);
            }
            t[k] = local[g];
        }
        sub.mesh.elements.push_back(t);
        sub.mesh.magnet_flag.push_back(1);
        sub.parent_element.push_back(static_cast<int>(e));
    }
    detail::finalize(sub.mesh);
    return sub;
}

inline void write_nodes_csv(std::ostream& os, const Triangulation& mesh) {
    os.precision(17);
    os << "id,x,y\n";
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
        os << i << ',' << mesh.nodes[i].x() << ',' << mesh.nodes[i].y() << '\n';
}

inline void write_elements_csv(std::ostream& os, const Triangulation& mesh) {
    os << "id,n1,n2,n3,magnet_flag\n";
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& t = mesh.elements[e];
        os << e << ',' << t[0] << ',' << t[1] << ',' << t[2] << ',' << int(mesh.magnet_flag[e]) << '\n';
    }
}

}  // namespace thermomag
