// Backward Euler steps against scalar closed forms, scheme consistency, and
// full-path behavior on the assembled benchmark.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spde/errors.hpp"
#include "spde/problem.hpp"
#include "spde/stepper.hpp"

using namespace spde;

namespace {

// 1x1 surrogate: mass m, stiffness k, no constraints.
DiscreteSystem scalar_system(double m, double k) {
    return make_system(SparseMatrix::from_triplets(1, 1, {{0, 0, m}}),
                       SparseMatrix::from_triplets(1, 1, {{0, 0, k}}), {}, {});
}

double bisect_cubic_plus_linear(double rhs) {
    // Root of y^3 + y = rhs on [0, rhs], monotone increasing.
    double lo = 0.0, hi = rhs;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((mid * mid * mid + mid < rhs) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("implicit step solves the scalar cubic exactly") {
    DiscreteSystem sys = scalar_system(1.0, 0.0);
    DriftPolynomial cubic({0.0, 0.0, 0.0, -1.0});
    StepperConfig cfg;
    cfg.scheme = Scheme::implicit;
    cfg.dt = 1.0;

    // y = 2 - y^3, i.e. y^3 + y = 2, whose real root is exactly 1.
    NodalField y = backward_euler_step(sys, cubic, NodalField{2.0}, NodalField{0.0}, cfg);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-12));

    // Against an independent bisection for a generic right-hand side.
    NodalField y2 = backward_euler_step(sys, cubic, NodalField{0.7}, NodalField{0.05}, cfg);
    CHECK(y2[0] == doctest::Approx(bisect_cubic_plus_linear(0.75)).epsilon(1e-12));
}

TEST_CASE("both schemes reduce to the resolvent when the drift vanishes") {
    const double lam = 3.0, dt = 0.25, x = 1.7;
    DiscreteSystem sys = scalar_system(1.0, lam);
    DriftPolynomial none({0.0});
    StepperConfig cfg;
    cfg.dt = dt;

    cfg.scheme = Scheme::implicit;
    NodalField yi = backward_euler_step(sys, none, NodalField{x}, NodalField{0.0}, cfg);
    cfg.scheme = Scheme::semi_implicit;
    NodalField ys = semi_implicit_step(sys, none, NodalField{x}, NodalField{0.0}, cfg);
    const double expected = x / (1.0 + dt * lam);
    CHECK(yi[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(ys[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("semi-implicit step freezes the drift at the previous state") {
    const double lam = 2.0, dt = 0.125, x = 0.6;
    DiscreteSystem sys = scalar_system(1.0, lam);
    DriftPolynomial linear({0.0, 1.0}); // phi(x) = x
    StepperConfig cfg;
    cfg.scheme = Scheme::semi_implicit;
    cfg.dt = dt;
    NodalField y = semi_implicit_step(sys, linear, NodalField{x}, NodalField{0.0}, cfg);
    CHECK(y[0] == doctest::Approx(x * (1.0 + dt) / (1.0 + dt * lam)).epsilon(1e-14));
}

TEST_CASE("well-posedness guard rejects dt * L0 >= 1") {
    DriftPolynomial phi({0.0, 1.0, 0.0, 0.0, 0.0, -1.0});
    CHECK_THROWS_AS(check_wellposed(phi, 1.25), ConfigError);
    CHECK_NOTHROW(check_wellposed(phi, 0.5));
    CHECK_THROWS_AS(check_wellposed(phi, -0.1), ConfigError);

    // The same guard fires through the integrator front door.
    DiscreteSystem sys = scalar_system(1.0, 1.0);
    StepperConfig cfg;
    cfg.dt = 1.25;
    CHECK_THROWS_AS(backward_euler_step(sys, phi, NodalField{1.0}, NodalField{0.0}, cfg),
                    ConfigError);
}

TEST_CASE("schemes coincide to rounding when the drift is zero") {
    ProblemSpec spec = benchmark_problem();
    spec.drift = DriftPolynomial({0.0});
    AssembledProblem ap = assemble_problem(spec, 8, 8);
    NodalField x0 = interpolate_initial(spec, ap.mesh);

    NoiseSpec noise = build_spectrum(2.0, 0.001, 16, 16, 1.0, 1.0);
    KlTable table(noise, ap.mesh);
    BrownianPath path = sample_path(noise, 4, 0.0625, 909, 0);

    StepperConfig ci, cs;
    ci.scheme = Scheme::implicit;
    cs.scheme = Scheme::semi_implicit;
    ci.dt = cs.dt = 0.0625;
    NodalField xi = x0, xs = x0;
    for (int s = 0; s < 4; ++s) {
        const NodalField zeta = table.nodal_increment(path, s, 1);
        xi = backward_euler_step(ap.system, spec.drift, xi, zeta, ci);
        xs = semi_implicit_step(ap.system, spec.drift, xs, zeta, cs);
    }
    for (size_t k = 0; k < xi.size(); ++k)
        CHECK(std::abs(xi[k] - xs[k]) <= 1e-13);
}

TEST_CASE("Dirichlet nodes stay pinned exactly through noisy steps") {
    ProblemSpec spec = benchmark_problem();
    AssembledProblem ap = assemble_problem(spec, 6, 6);
    NodalField x0 = interpolate_initial(spec, ap.mesh);

    NoiseSpec noise = build_spectrum(2.0, 0.001, 8, 8, 1.0, 1.0);
    KlTable table(noise, ap.mesh);
    BrownianPath path = sample_path(noise, 2, 0.0625, 13, 5);

    for (Scheme sch : {Scheme::implicit, Scheme::semi_implicit}) {
        StepperConfig cfg;
        cfg.scheme = sch;
        cfg.dt = 0.0625;
        PathIntegrator integ(ap.system, spec.drift, cfg);
        NodalField x = x0;
        for (int s = 0; s < 2; ++s)
            x = integ.step(x, table.nodal_increment(path, s, 1));
        for (size_t d = 0; d < ap.system.dirichlet_nodes.size(); ++d)
            CHECK(x[static_cast<size_t>(ap.system.dirichlet_nodes[d])] ==
                  ap.system.dirichlet_values[d]);
        // The benchmark pins X = 1 on the x = 0 side.
        CHECK(!ap.system.dirichlet_nodes.empty());
        CHECK(ap.system.dirichlet_values[0] == 1.0);
    }
}

TEST_CASE("Newton converges in a handful of iterations on the benchmark") {
    ProblemSpec spec = benchmark_problem();
    AssembledProblem ap = assemble_problem(spec, 8, 8);
    NodalField x0 = interpolate_initial(spec, ap.mesh);

    NoiseSpec noise = build_spectrum(2.0, 0.001, 16, 16, 1.0, 1.0);
    KlTable table(noise, ap.mesh);
    BrownianPath path = sample_path(noise, 1, 1.0 / 16.0, 2024, 1);

    StepperConfig cfg;
    cfg.scheme = Scheme::implicit;
    cfg.dt = 1.0 / 16.0;
    PathIntegrator integ(ap.system, spec.drift, cfg);
    integ.step(x0, table.nodal_increment(path, 0, 1));
    CHECK(integ.last_stats().newton_iterations >= 1);
    CHECK(integ.last_stats().newton_iterations <= 8);
    CHECK(integ.last_stats().final_residual <= 1e-8);
}

TEST_CASE("scheme gap contracts at first order in dt") {
    ProblemSpec spec = benchmark_problem();
    spec.t_final = 0.25;
    AssembledProblem ap = assemble_problem(spec, 8, 8);
    NodalField x0 = interpolate_initial(spec, ap.mesh);
    NoiseSpec noise = build_spectrum(2.0, 0.001, 16, 16, 1.0, 1.0);
    KlTable table(noise, ap.mesh);

    const int fine_steps = 32; // dt_fine = 1/128 over T = 0.25
    const double dt_fine = 0.25 / fine_steps;
    double ratio_sum = 0.0;
    const int n_paths = 10;
    for (int s = 0; s < n_paths; ++s) {
        BrownianPath path = sample_path(noise, fine_steps, dt_fine, 4242,
                                        static_cast<std::uint32_t>(s));
        double gap[2]; // coarse (1/64), fine (1/128)
        for (int level = 0; level < 2; ++level) {
            const int agg = level == 0 ? 2 : 1;
            StepperConfig cfg;
            cfg.dt = dt_fine * agg;
            cfg.scheme = Scheme::implicit;
            NodalField xi =
                solve_path(ap.system, spec.drift, x0, cfg, fine_steps / agg, &table, &path, agg)
                    .terminal;
            cfg.scheme = Scheme::semi_implicit;
            NodalField xs =
                solve_path(ap.system, spec.drift, x0, cfg, fine_steps / agg, &table, &path, agg)
                    .terminal;
            axpy(-1.0, xs, xi);
            gap[level] = l2_norm(ap.system.mass, xi);
        }
        CHECK(gap[1] > 0.0);
        ratio_sum += gap[0] / gap[1];
    }
    const double mean_ratio = ratio_sum / n_paths;
    CHECK(mean_ratio >= 1.5);
    CHECK(mean_ratio <= 2.5);
}

TEST_CASE("zero-step path returns the pinned initial state") {
    ProblemSpec spec = benchmark_problem();
    AssembledProblem ap = assemble_problem(spec, 4, 4);
    NodalField x0 = interpolate_initial(spec, ap.mesh);
    StepperConfig cfg;
    cfg.dt = 0.1;
    PathSolution sol = solve_path(ap.system, spec.drift, x0, cfg, 0);
    CHECK(sol.steps == 0);
    REQUIRE(sol.terminal.size() == x0.size());
    for (double v : sol.terminal)
        CHECK(v == 1.0);
    CHECK_THROWS_AS(solve_path(ap.system, spec.drift, x0, cfg, -1), ConfigError);
}

TEST_CASE("the zero state is a fixed point of the drift-only dynamics") {
    ProblemSpec spec = benchmark_problem();
    spec.boundary = BoundarySpec{}; // all Neumann, nothing pinned
    spec.initial = InitialSpec{InitialKind::constant, 0.0};
    AssembledProblem ap = assemble_problem(spec, 4, 4);
    NodalField x0 = interpolate_initial(spec, ap.mesh);
    StepperConfig cfg;
    cfg.dt = 0.05;
    PathSolution sol = solve_path(ap.system, spec.drift, x0, cfg, 10);
    for (double v : sol.terminal)
        CHECK(std::abs(v) <= 1e-12);
    CHECK(sol.max_abs_value <= 1e-12);
}

TEST_CASE("deterministic heat decay matches the separated solution") {
    ProblemSpec spec;
    spec.t_final = 0.1;
    spec.diffusion = DiffusionTensor{};
    spec.drift = DriftPolynomial({0.0});
    spec.initial = InitialSpec{InitialKind::cosine, 1.0};
    AssembledProblem ap = assemble_problem(spec, 32, 32);
    NodalField x0 = interpolate_initial(spec, ap.mesh);

    StepperConfig cfg;
    cfg.scheme = Scheme::semi_implicit;
    cfg.dt = 1e-3;
    PathSolution sol = solve_path(ap.system, spec.drift, x0, cfg, 100);

    const double pi = 4.0 * std::atan(1.0);
    const double amp = 0.13891113314280024; // exp(-2 pi^2 / 10)
    double worst = 0.0;
    for (int k = 0; k < ap.mesh.n_nodes(); ++k) {
        const double exact =
            amp * std::cos(pi * ap.mesh.nodes[k].x) * std::cos(pi * ap.mesh.nodes[k].y);
        worst = std::max(worst, std::abs(sol.terminal[static_cast<size_t>(k)] - exact));
    }
    CHECK(worst <= 2e-2);
}

TEST_CASE("implicit paths stay bounded over a unit-time benchmark run") {
    ProblemSpec spec = benchmark_problem();
    AssembledProblem ap = assemble_problem(spec, 8, 8);
    NodalField x0 = interpolate_initial(spec, ap.mesh);
    NoiseSpec noise = build_spectrum(2.0, 0.001, 16, 16, 1.0, 1.0);
    KlTable table(noise, ap.mesh);

    StepperConfig cfg;
    cfg.scheme = Scheme::implicit;
    cfg.dt = 1.0 / 16.0;
    for (int s = 0; s < 10; ++s) {
        BrownianPath path = sample_path(noise, 16, 1.0 / 16.0, 777,
                                        static_cast<std::uint32_t>(s));
        PathSolution sol = solve_path(ap.system, spec.drift, x0, cfg, 16, &table, &path, 1);
        CHECK(sol.max_abs_value < 10.0);
        CHECK(sol.total_newton_iterations >= 16);
        CHECK(sol.max_newton_iterations <= 12);
    }
}
