#include "spde/mesh.hpp"

#include <cmath>
#include <sstream>

#include "spde/errors.hpp"

namespace spde {

double Mesh::triangle_area(int t) const {
    const auto& tri = triangles[static_cast<size_t>(t)];
    const Point2& a = nodes[static_cast<size_t>(tri[0])];
    const Point2& b = nodes[static_cast<size_t>(tri[1])];
    const Point2& c = nodes[static_cast<size_t>(tri[2])];
    return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

std::vector<BoundaryEdge> Mesh::boundary_edges() const {
    std::vector<BoundaryEdge> edges;
    edges.reserve(static_cast<size_t>(2 * (nx + ny)));
    for (int j = 0; j < ny; ++j)
        edges.push_back({node_id(0, j), node_id(0, j + 1), Side::xmin});
    for (int j = 0; j < ny; ++j)
        edges.push_back({node_id(nx, j), node_id(nx, j + 1), Side::xmax});
    for (int i = 0; i < nx; ++i)
        edges.push_back({node_id(i, 0), node_id(i + 1, 0), Side::ymin});
    for (int i = 0; i < nx; ++i)
        edges.push_back({node_id(i, ny), node_id(i + 1, ny), Side::ymax});
    return edges;
}

Mesh build_rectangle_mesh(double l1, double l2, int nx, int ny) {
    if (!(l1 > 0.0) || !(l2 > 0.0)) {
        std::ostringstream msg;
        msg << "build_rectangle_mesh: domain lengths must be positive (got " << l1 << ", " << l2 << ")";
        throw ConfigError(msg.str());
    }
    if (nx < 1 || ny < 1) {
        std::ostringstream msg;
        msg << "build_rectangle_mesh: need at least one cell per direction (got nx=" << nx
            << ", ny=" << ny << ")";
        throw ConfigError(msg.str());
    }

    Mesh m;
    m.l1 = l1;
    m.l2 = l2;
    m.nx = nx;
    m.ny = ny;
    m.nodes.reserve(static_cast<size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.nodes.push_back({(static_cast<double>(i) * l1) / nx,
                               (static_cast<double>(j) * l2) / ny});

    m.triangles.reserve(static_cast<size_t>(2 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int n00 = m.node_id(i, j);
            const int n10 = m.node_id(i + 1, j);
            const int n01 = m.node_id(i, j + 1);
            const int n11 = m.node_id(i + 1, j + 1);
            // Split along the lower-left to upper-right diagonal; both triangles
            // are counterclockwise.
            m.triangles.push_back({n00, n10, n11});
            m.triangles.push_back({n00, n11, n01});
        }
    }

    double h = 0.0;
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto& tri = m.triangles[static_cast<size_t>(t)];
        for (int e = 0; e < 3; ++e) {
            const Point2& a = m.nodes[static_cast<size_t>(tri[static_cast<size_t>(e)])];
            const Point2& b = m.nodes[static_cast<size_t>(tri[static_cast<size_t>((e + 1) % 3)])];
            h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
        }
    }
    m.h = h;

    m.tags.assign(m.nodes.size(), BoundaryTag::interior);
    return m;
}

Mesh classify_boundary(Mesh mesh, const BoundarySpec& bc) {
    const BoundaryTag open_tag = bc.robin_alpha0 != 0.0 ? BoundaryTag::robin : BoundaryTag::neumann;
    for (int j = 0; j <= mesh.ny; ++j) {
        for (int i = 0; i <= mesh.nx; ++i) {
            if (!mesh.on_boundary(i, j))
                continue;
            const bool dirichlet =
                (i == 0 && bc.side_is_dirichlet(Side::xmin)) ||
                (i == mesh.nx && bc.side_is_dirichlet(Side::xmax)) ||
                (j == 0 && bc.side_is_dirichlet(Side::ymin)) ||
                (j == mesh.ny && bc.side_is_dirichlet(Side::ymax));
            mesh.tags[static_cast<size_t>(mesh.node_id(i, j))] =
                dirichlet ? BoundaryTag::dirichlet : open_tag;
        }
    }
    return mesh;
}

} // namespace spde
