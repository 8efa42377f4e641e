#include "spde/problem.hpp"

#include <cmath>

#include "spde/errors.hpp"

namespace spde {

std::array<double, 2> advection_at(const AdvectionSpec& adv, double l1, double l2, double x,
                                   double y) {
    switch (adv.kind) {
    case AdvectionKind::none:
        return {0.0, 0.0};
    case AdvectionKind::constant:
        return {adv.qx, adv.qy};
    case AdvectionKind::cellular: {
        const double pi = 4.0 * std::atan(1.0);
        return {adv.magnitude * std::sin(pi * x / l1) * std::cos(pi * y / l2),
                -adv.magnitude * std::cos(pi * x / l1) * std::sin(pi * y / l2)};
    }
    }
    return {0.0, 0.0};
}

OperatorSpec make_operator(const ProblemSpec& problem, double shift) {
    OperatorSpec op;
    const DiffusionTensor d = problem.diffusion;
    op.diffusion = [d](double, double) { return d; };
    if (problem.advection.kind != AdvectionKind::none) {
        const AdvectionSpec adv = problem.advection;
        const double l1 = problem.l1;
        const double l2 = problem.l2;
        op.advection = [adv, l1, l2](double x, double y) {
            return advection_at(adv, l1, l2, x, y);
        };
    }
    op.robin_alpha0 = problem.boundary.robin_alpha0;
    op.garding_shift = shift;
    return op;
}

NodalField interpolate_initial(const ProblemSpec& problem, const Mesh& mesh) {
    NodalField u(static_cast<size_t>(mesh.n_nodes()));
    const double pi = 4.0 * std::atan(1.0);
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        const Point2& p = mesh.nodes[static_cast<size_t>(n)];
        switch (problem.initial.kind) {
        case InitialKind::constant:
            u[static_cast<size_t>(n)] = problem.initial.value;
            break;
        case InitialKind::cosine:
            u[static_cast<size_t>(n)] = problem.initial.value * std::cos(pi * p.x / problem.l1) *
                                        std::cos(pi * p.y / problem.l2);
            break;
        }
    }
    // Keep the initial state consistent with the essential boundary condition.
    if (problem.boundary.any_dirichlet())
        for (int n = 0; n < mesh.n_nodes(); ++n)
            if (mesh.tags[static_cast<size_t>(n)] == BoundaryTag::dirichlet)
                u[static_cast<size_t>(n)] = problem.boundary.dirichlet_value;
    return u;
}

AssembledProblem assemble_problem(const ProblemSpec& problem, int nx, int ny) {
    const DiffusionTensor& d = problem.diffusion;
    if (d.d12 != d.d21)
        throw ConfigError("assemble_problem: diffusion tensor must be symmetric");
    if (!(d.d11 > 0.0) || !(d.d11 * d.d22 - d.d12 * d.d21 > 0.0))
        throw ConfigError("assemble_problem: diffusion tensor must be positive definite");
    if (const auto why = assert_admissible(problem.drift))
        throw ConfigError("assemble_problem: " + *why);

    AssembledProblem out;
    out.mesh = classify_boundary(build_rectangle_mesh(problem.l1, problem.l2, nx, ny),
                                 problem.boundary);
    const SparseMatrix mass = assemble_mass(out.mesh);

    double shift = problem.garding_shift;
    if (shift < 0.0) {
        // Probe with no shift, then fold in whatever the diagnostic asks for.
        const SparseMatrix k0 = assemble_stiffness(out.mesh, make_operator(problem, 0.0));
        const DiscreteSystem probe = apply_dirichlet(mass, k0, out.mesh, problem.boundary);
        out.coercivity = coercivity_diagnostic(probe);
        shift = out.coercivity.converged ? out.coercivity.required_shift : 0.0;
        if (shift == 0.0) {
            out.applied_shift = 0.0;
            out.system = probe;
            return out;
        }
    }

    out.applied_shift = shift;
    const SparseMatrix k = assemble_stiffness(out.mesh, make_operator(problem, shift));
    out.system = apply_dirichlet(mass, k, out.mesh, problem.boundary);
    if (problem.garding_shift >= 0.0)
        out.coercivity = coercivity_diagnostic(out.system);
    return out;
}

ProblemSpec benchmark_problem() {
    ProblemSpec p;
    p.l1 = 1.0;
    p.l2 = 1.0;
    p.t_final = 1.0;
    p.diffusion = {0.01, 0.0, 0.0, 0.01};
    p.advection = {AdvectionKind::cellular, 0.0, 0.0, 1.0};
    p.boundary.dirichlet_sides[static_cast<size_t>(Side::xmin)] = true;
    p.boundary.dirichlet_value = 1.0;
    p.drift = DriftPolynomial({0.0, 1.0, 0.0, 0.0, 0.0, -1.0});
    p.initial = {InitialKind::constant, 1.0};
    p.garding_shift = -1.0;
    return p;
}

} // namespace spde
