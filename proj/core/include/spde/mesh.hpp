#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace spde {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

enum class BoundaryTag : std::uint8_t { interior, dirichlet, neumann, robin };

enum class Side : int { xmin = 0, xmax = 1, ymin = 2, ymax = 3 };

// Which boundary sides carry the Dirichlet condition and with what constant
// value; everything else is Neumann, optionally with a Robin mass term alpha0.
struct BoundarySpec {
    std::array<bool, 4> dirichlet_sides{false, false, false, false};
    double dirichlet_value = 0.0;
    double robin_alpha0 = 0.0;

    bool side_is_dirichlet(Side s) const { return dirichlet_sides[static_cast<size_t>(s)]; }
    bool any_dirichlet() const {
        return dirichlet_sides[0] || dirichlet_sides[1] || dirichlet_sides[2] || dirichlet_sides[3];
    }
};

// One boundary segment between consecutive nodes along a side, oriented with
// increasing coordinate.
struct BoundaryEdge {
    int a = 0;
    int b = 0;
    Side side = Side::xmin;
};

// Structured triangulation of [0, l1] x [0, l2]: (nx+1)*(ny+1) nodes, each grid
// cell split along the diagonal from its lower-left to upper-right corner.
// Nodes are numbered row-major, x fastest. Coordinates are computed as
// (i * l1) / nx, which keeps nodes of a mesh bitwise present in its uniform
// refinement (the doubling i -> 2i, nx -> 2nx is exact in IEEE arithmetic).
struct Mesh {
    double l1 = 1.0;
    double l2 = 1.0;
    int nx = 1;
    int ny = 1;
    std::vector<Point2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryTag> tags;
    double h = 0.0;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    int node_id(int i, int j) const { return j * (nx + 1) + i; }
    bool on_boundary(int i, int j) const { return i == 0 || i == nx || j == 0 || j == ny; }

    double triangle_area(int t) const;
    std::vector<BoundaryEdge> boundary_edges() const;
};

Mesh build_rectangle_mesh(double l1, double l2, int nx, int ny);

// Tag every node interior/dirichlet/neumann/robin according to the boundary
// spec. Dirichlet wins at corners shared with a non-Dirichlet side.
Mesh classify_boundary(Mesh mesh, const BoundarySpec& bc);

} // namespace spde
