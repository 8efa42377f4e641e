// P1 assembly, Dirichlet elimination, discrete norms, coercivity diagnostic.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spde/errors.hpp"
#include "spde/fem.hpp"
#include "spde/linalg.hpp"
#include "spde/mesh.hpp"
#include "spde/problem.hpp"
#include "spde/rng.hpp"

using namespace spde;

namespace {

OperatorSpec constant_operator(DiffusionTensor d, double qx, double qy, double alpha0 = 0.0,
                               double shift = 0.0) {
    OperatorSpec op;
    op.diffusion = [d](double, double) { return d; };
    if (qx != 0.0 || qy != 0.0)
        op.advection = [qx, qy](double, double) { return std::array<double, 2>{qx, qy}; };
    op.robin_alpha0 = alpha0;
    op.garding_shift = shift;
    return op;
}

NodalField interpolate(const Mesh& m, double (*f)(double, double)) {
    NodalField u(static_cast<size_t>(m.n_nodes()));
    for (int k = 0; k < m.n_nodes(); ++k)
        u[static_cast<size_t>(k)] = f(m.nodes[static_cast<size_t>(k)].x,
                                      m.nodes[static_cast<size_t>(k)].y);
    return u;
}

} // namespace

TEST_CASE("mass matrix on the two-triangle unit square, entry by entry") {
    // Both triangles have area 1/2 and local mass (area/12)*[[2,1,1],[1,2,1],[1,1,2]],
    // i.e. 1/12 diagonal and 1/24 off-diagonal. Corner nodes 0=(0,0) and 3=(1,1)
    // sit in both triangles, nodes 1=(1,0) and 2=(0,1) in one each.
    Mesh m = build_rectangle_mesh(1.0, 1.0, 1, 1);
    SparseMatrix mass = assemble_mass(m);
    const int n00 = m.node_id(0, 0), n10 = m.node_id(1, 0), n01 = m.node_id(0, 1),
              n11 = m.node_id(1, 1);
    CHECK(mass.coeff(n00, n00) == doctest::Approx(1.0 / 6).epsilon(1e-15));
    CHECK(mass.coeff(n11, n11) == doctest::Approx(1.0 / 6).epsilon(1e-15));
    CHECK(mass.coeff(n10, n10) == doctest::Approx(1.0 / 12).epsilon(1e-15));
    CHECK(mass.coeff(n01, n01) == doctest::Approx(1.0 / 12).epsilon(1e-15));
    CHECK(mass.coeff(n00, n11) == doctest::Approx(1.0 / 12).epsilon(1e-15)); // shared diagonal
    CHECK(mass.coeff(n00, n10) == doctest::Approx(1.0 / 24).epsilon(1e-15));
    CHECK(mass.coeff(n00, n01) == doctest::Approx(1.0 / 24).epsilon(1e-15));
    CHECK(mass.coeff(n10, n11) == doctest::Approx(1.0 / 24).epsilon(1e-15));
    CHECK(mass.coeff(n01, n11) == doctest::Approx(1.0 / 24).epsilon(1e-15));
    CHECK(mass.coeff(n10, n01) == 0.0); // never share a triangle
}

TEST_CASE("total mass equals the domain area") {
    Mesh m = build_rectangle_mesh(3.0, 2.0, 5, 3);
    SparseMatrix mass = assemble_mass(m);
    const std::vector<double> ones(static_cast<size_t>(m.n_nodes()), 1.0);
    CHECK(m_inner(mass, ones, ones) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("mass matrix is SPD") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 4, 4);
    SparseMatrix mass = assemble_mass(m);
    CounterRng rng(11, 3);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v(static_cast<size_t>(m.n_nodes()));
        for (auto& x : v)
            x = rng.uniform(-1.0, 1.0);
        CHECK(m_inner(mass, v, v) > 0.0);
    }
}

TEST_CASE("pure Neumann Laplacian has constants in its kernel and is symmetric") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 2, 2);
    SparseMatrix k = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 0, 0));
    const std::vector<double> ones(static_cast<size_t>(m.n_nodes()), 1.0);
    const auto k1 = k.multiply(ones);
    for (double r : k1)
        CHECK(std::abs(r) <= 1e-14);
    SparseMatrix kt = k.transposed();
    SparseMatrix gap = SparseMatrix::weighted_sum(k, 1.0, kt, -1.0);
    CHECK(gap.max_abs() <= 1e-14);
}

TEST_CASE("Galerkin consistency against the analytic bilinear form") {
    // u = x, v = y are in the P1 space, every operator piece is integrated
    // exactly by the quadrature in use, so v'Ku must match the hand integral:
    //   diffusion  grad(v).D grad(u)          = D21 * area      = 0.5
    //   advection  (q . grad u) v = qx*int(y) = 0.7 * 1/2       = 0.35
    //   robin      a0*(int_top x + int_right y) = 0.4 * (1/2+1/2) = 0.4
    Mesh m = build_rectangle_mesh(1.0, 1.0, 3, 3);
    SparseMatrix k =
        assemble_stiffness(m, constant_operator({2.0, 0.5, 0.5, 3.0}, 0.7, -0.3, 0.4));
    const NodalField u = interpolate(m, [](double x, double) { return x; });
    const NodalField v = interpolate(m, [](double, double y) { return y; });
    const double vku = dot(v, k.multiply(u));
    CHECK(vku == doctest::Approx(1.25).epsilon(1e-13));
}

TEST_CASE("zero-order shift adds exactly shift times the mass matrix") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 3, 2);
    SparseMatrix k0 = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 0.3, 0.1));
    OperatorSpec shifted = constant_operator({1, 0, 0, 1}, 0.3, 0.1, 0.0, 0.75);
    SparseMatrix k1 = assemble_stiffness(m, shifted);
    SparseMatrix mass = assemble_mass(m);
    SparseMatrix expected = SparseMatrix::weighted_sum(k0, 1.0, mass, 0.75);
    SparseMatrix gap = SparseMatrix::weighted_sum(k1, 1.0, expected, -1.0);
    CHECK(gap.max_abs() <= 1e-14);
}

TEST_CASE("constant advection is skew on fields vanishing at the boundary") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 6, 6);
    SparseMatrix k_full = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 1.0, 0.5));
    SparseMatrix k_diff = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 0, 0));
    SparseMatrix k_adv = SparseMatrix::weighted_sum(k_full, 1.0, k_diff, -1.0);
    CounterRng rng(17, 1);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> v(static_cast<size_t>(m.n_nodes()), 0.0);
        for (int j = 1; j < 6; ++j)
            for (int i = 1; i < 6; ++i)
                v[static_cast<size_t>(m.node_id(i, j))] = rng.uniform(-1.0, 1.0);
        CHECK(std::abs(dot(v, k_adv.multiply(v))) <= 1e-12 * dot(v, v));
    }
}

TEST_CASE("non-SPD diffusion is rejected at assembly") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 2, 2);
    CHECK_THROWS_AS(assemble_stiffness(m, constant_operator({1.0, 2.0, 2.0, 1.0}, 0, 0)),
                    ConfigError);
    CHECK_THROWS_AS(assemble_stiffness(m, constant_operator({-1.0, 0.0, 0.0, 1.0}, 0, 0)),
                    ConfigError);
}

TEST_CASE("dirichlet elimination splits the system") {
    BoundarySpec bc;
    bc.dirichlet_sides[static_cast<size_t>(Side::xmin)] = true;
    bc.dirichlet_value = 1.0;
    Mesh m = classify_boundary(build_rectangle_mesh(1.0, 1.0, 2, 2), bc);
    SparseMatrix mass = assemble_mass(m);
    SparseMatrix k = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 0, 0));
    DiscreteSystem sys = apply_dirichlet(mass, k, m, bc);
    CHECK(sys.n_free() == 6);
    CHECK(sys.dirichlet_nodes.size() == 3);
    for (double g : sys.dirichlet_values)
        CHECK(g == 1.0);
    CHECK(sys.mass_ff.rows() == 6);
    CHECK(sys.mass_fd.cols() == 3);
}

TEST_CASE("no dirichlet nodes leaves everything free") {
    BoundarySpec bc;
    Mesh m = classify_boundary(build_rectangle_mesh(1.0, 1.0, 2, 2), bc);
    SparseMatrix mass = assemble_mass(m);
    SparseMatrix k = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 0, 0));
    DiscreteSystem sys = apply_dirichlet(mass, k, m, bc);
    CHECK(sys.n_free() == 9);
    CHECK(sys.dirichlet_nodes.empty());
    SparseMatrix gap = SparseMatrix::weighted_sum(sys.mass_ff, 1.0, mass, -1.0);
    CHECK(gap.max_abs() == 0.0);
}

TEST_CASE("discrete L2 norm") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 8, 8);
    SparseMatrix mass = assemble_mass(m);
    const std::vector<double> zero(static_cast<size_t>(m.n_nodes()), 0.0);
    CHECK(l2_norm(mass, zero) == 0.0);
    const std::vector<double> ones(static_cast<size_t>(m.n_nodes()), 1.0);
    CHECK(l2_norm(mass, ones) == doctest::Approx(1.0).epsilon(1e-14));
    // u = x lies in the P1 space, so u'Mu integrates x^2 exactly: 1/3.
    const NodalField u = interpolate(m, [](double x, double) { return x; });
    CHECK(l2_norm(mass, u) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("gather and scatter round-trip") {
    const std::vector<double> full{10.0, 20.0, 30.0, 40.0};
    const std::vector<int> ids{3, 1};
    const auto part = gather(full, ids);
    CHECK(part == std::vector<double>{40.0, 20.0});
    std::vector<double> target(4, 0.0);
    scatter(part, ids, target);
    CHECK(target == std::vector<double>{0.0, 20.0, 0.0, 40.0});
}

TEST_CASE("coercivity diagnostic on analytic surrogates") {
    {
        // K = -M: the generalized eigenvalue is exactly -1, shift rounds to 1.
        Mesh m = build_rectangle_mesh(1.0, 1.0, 3, 3);
        SparseMatrix mass = assemble_mass(m);
        DiscreteSystem sys = make_system(mass, mass.scaled(-1.0), {}, {});
        CoercivityReport r = coercivity_diagnostic(sys);
        REQUIRE(r.converged);
        CHECK(r.lambda_min_sym == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(r.required_shift == doctest::Approx(1.0).epsilon(1e-12));
    }
    {
        // Pure Neumann Laplacian: constants sit at eigenvalue zero.
        Mesh m = build_rectangle_mesh(1.0, 1.0, 4, 4);
        SparseMatrix mass = assemble_mass(m);
        SparseMatrix k = assemble_stiffness(m, constant_operator({1, 0, 0, 1}, 0, 0));
        CoercivityReport r = coercivity_diagnostic(make_system(mass, k, {}, {}));
        REQUIRE(r.converged);
        CHECK(std::abs(r.lambda_min_sym) <= 1e-8);
        CHECK(r.required_shift <= 1e-8);
    }
    {
        // 1D Dirichlet Laplacian with identity mass: lambda_min has a closed form
        // 2*(1 - cos(pi/(n+1)))/h^2.
        const int n = 9;
        const double h = 0.1;
        std::vector<Triplet> t;
        for (int i = 0; i < n; ++i) {
            t.push_back({i, i, 2.0 / (h * h)});
            if (i > 0)
                t.push_back({i, i - 1, -1.0 / (h * h)});
            if (i + 1 < n)
                t.push_back({i, i + 1, -1.0 / (h * h)});
        }
        SparseMatrix k = SparseMatrix::from_triplets(n, n, std::move(t));
        CoercivityReport r = coercivity_diagnostic(make_system(SparseMatrix::identity(n), k, {}, {}));
        REQUIRE(r.converged);
        const double exact = 2.0 * (1.0 - std::cos(M_PI / (n + 1))) / (h * h);
        CHECK(r.lambda_min_sym == doctest::Approx(exact).epsilon(1e-9));
        CHECK(r.required_shift == 0.0);
    }
}

TEST_CASE("required shift rounds up to one significant digit") {
    Mesh m = build_rectangle_mesh(1.0, 1.0, 3, 3);
    SparseMatrix mass = assemble_mass(m);
    {
        CoercivityReport r = coercivity_diagnostic(make_system(mass, mass.scaled(-0.023), {}, {}));
        REQUIRE(r.converged);
        CHECK(r.required_shift == doctest::Approx(0.03).epsilon(1e-12));
    }
    {
        CoercivityReport r = coercivity_diagnostic(make_system(mass, mass.scaled(-0.71), {}, {}));
        REQUIRE(r.converged);
        CHECK(r.required_shift == doctest::Approx(0.8).epsilon(1e-12));
    }
}

TEST_CASE("coercivity of the strong-order benchmark operator") {
    // Frozen from a dense generalized eigensolve of the same assembled system
    // (symmetric part of the stiffness against the mass, free nodes only).
    AssembledProblem ap = assemble_problem(benchmark_problem(), 8, 8);
    CoercivityReport r = coercivity_diagnostic(ap.system);
    REQUIRE(r.converged);
    CHECK(r.lambda_min_sym == doctest::Approx(0.025684512084177585).epsilon(1e-9));
    CHECK(r.required_shift == 0.0);
    CHECK(ap.applied_shift == 0.0);
}

TEST_CASE("shifted system satisfies the discrete Garding bound") {
    AssembledProblem ap = assemble_problem(benchmark_problem(), 8, 8);
    CounterRng rng(21, 9);
    const int nf = ap.system.n_free();
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v(static_cast<size_t>(nf));
        for (auto& x : v)
            x = rng.uniform(-1.0, 1.0);
        const double kv = dot(v, ap.system.stiff_ff.multiply(v));
        const double mv = m_inner(ap.system.mass_ff, v, v);
        CHECK(kv >= -1e-10 * mv);
    }
}

TEST_CASE("resolvent is a contraction in the mass norm") {
    AssembledProblem ap = assemble_problem(benchmark_problem(), 8, 8);
    CounterRng rng(31, 2);
    const int nf = ap.system.n_free();
    for (double dt : {1e-3, 1e-2, 1e-1}) {
        SparseMatrix a = SparseMatrix::weighted_sum(ap.system.mass_ff, 1.0,
                                                    ap.system.stiff_ff, dt);
        LuSolver lu(a);
        for (int t = 0; t < 5; ++t) {
            std::vector<double> v(static_cast<size_t>(nf));
            for (auto& x : v)
                x = rng.uniform(-1.0, 1.0);
            const double before = l2_norm(ap.system.mass_ff, v);
            std::vector<double> w = v;
            for (int m = 0; m < 10; ++m)
                w = lu.solve(ap.system.mass_ff.multiply(w));
            CHECK(l2_norm(ap.system.mass_ff, w) <= (1.0 + 1e-8) * before);
        }
    }
}
