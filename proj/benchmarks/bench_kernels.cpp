#include <benchmark/benchmark.h>

#include "spde/noise.hpp"
#include "spde/problem.hpp"
#include "spde/stepper.hpp"

namespace {

using namespace spde;

void bench_assemble(benchmark::State& state) {
    const int nx = static_cast<int>(state.range(0));
    const ProblemSpec problem = benchmark_problem();
    const Mesh mesh =
        classify_boundary(build_rectangle_mesh(1.0, 1.0, nx, nx), problem.boundary);
    const OperatorSpec op = make_operator(problem, 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble_stiffness(mesh, op));
    }
}
BENCHMARK(bench_assemble)->Arg(32)->Arg(64);

void bench_lu_factor(benchmark::State& state) {
    const AssembledProblem a = assemble_problem(benchmark_problem(), 32, 32);
    const SparseMatrix m =
        SparseMatrix::weighted_sum(a.system.mass_ff, 1.0, a.system.stiff_ff, 1.0 / 64);
    for (auto _ : state) {
        LuSolver lu(m);
        benchmark::DoNotOptimize(&lu);
    }
}
BENCHMARK(bench_lu_factor);

void bench_krylov_solve(benchmark::State& state) {
    const AssembledProblem a = assemble_problem(benchmark_problem(), 32, 32);
    const SparseMatrix m =
        SparseMatrix::weighted_sum(a.system.mass_ff, 1.0, a.system.stiff_ff, 1.0 / 64);
    std::vector<double> b(static_cast<size_t>(m.rows()), 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bicgstab(m, b, 1e-10, 2000));
    }
}
BENCHMARK(bench_krylov_solve);

void bench_nodal_increment(benchmark::State& state) {
    const ProblemSpec problem = benchmark_problem();
    const Mesh mesh =
        classify_boundary(build_rectangle_mesh(1.0, 1.0, 32, 32), problem.boundary);
    const NoiseSpec noise = build_spectrum(2.0, 0.001, 64, 64, 1.0, 1.0);
    const KlTable kl(noise, mesh);
    const BrownianPath path = sample_path(noise, 16, 1.0 / 16, 12345, 0);
    int step = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(kl.nodal_increment(path, step, 1));
        step = (step + 1) % 16;
    }
}
BENCHMARK(bench_nodal_increment);

void bench_implicit_step(benchmark::State& state) {
    const AssembledProblem a = assemble_problem(benchmark_problem(), 32, 32);
    const DriftPolynomial drift = benchmark_problem().drift.with_compensation(a.applied_shift);
    StepperConfig cfg;
    cfg.scheme = Scheme::implicit;
    cfg.dt = 1.0 / 64;
    PathIntegrator integrator(a.system, drift, cfg);

    const NoiseSpec noise = build_spectrum(2.0, 0.001, 64, 64, 1.0, 1.0);
    const KlTable kl(noise, a.mesh);
    const BrownianPath path = sample_path(noise, 64, 1.0 / 64, 12345, 0);
    NodalField x(static_cast<size_t>(a.system.n_nodes()), 1.0);
    int step = 0;
    for (auto _ : state) {
        const NodalField zeta = kl.nodal_increment(path, step, 1);
        x = integrator.step(x, zeta);
        benchmark::DoNotOptimize(x.data());
        step = (step + 1) % 64;
    }
}
BENCHMARK(bench_implicit_step);

} // namespace

BENCHMARK_MAIN();
