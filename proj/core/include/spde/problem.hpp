#pragma once

#include <array>
#include <string>

#include "spde/drift.hpp"
#include "spde/fem.hpp"
#include "spde/mesh.hpp"

namespace spde {

enum class AdvectionKind { none, constant, cellular };

// Velocity field options. "cellular" is the divergence-free stream-function
// field mag * (sin(pi x/l1) cos(pi y/l2), -cos(pi x/l1) sin(pi y/l2)); it is
// tangential on the whole boundary, so the advection contribution is purely
// skew and costs nothing in coercivity.
struct AdvectionSpec {
    AdvectionKind kind = AdvectionKind::none;
    double qx = 0.0;
    double qy = 0.0;
    double magnitude = 1.0;
};

enum class InitialKind { constant, cosine };

// constant: X0 = value everywhere. cosine: X0 = value * cos(pi x/l1) cos(pi y/l2).
struct InitialSpec {
    InitialKind kind = InitialKind::constant;
    double value = 0.0;
};

// Everything that defines the continuous problem on [0, l1] x [0, l2] x [0, T].
// garding_shift < 0 requests the automatic shift from the coercivity
// diagnostic; >= 0 pins it.
struct ProblemSpec {
    double l1 = 1.0;
    double l2 = 1.0;
    double t_final = 1.0;
    DiffusionTensor diffusion{};
    AdvectionSpec advection{};
    BoundarySpec boundary{};
    DriftPolynomial drift;
    InitialSpec initial{};
    double garding_shift = -1.0;
};

std::array<double, 2> advection_at(const AdvectionSpec& adv, double l1, double l2, double x,
                                   double y);

// Operator coefficients with an explicit zero-order shift folded in.
OperatorSpec make_operator(const ProblemSpec& problem, double shift);

NodalField interpolate_initial(const ProblemSpec& problem, const Mesh& mesh);

// Fully assembled discrete problem: mesh, constrained system with the shift
// already folded into the stiffness, the shift value used, and the coercivity
// report that chose it.
struct AssembledProblem {
    Mesh mesh;
    DiscreteSystem system;
    double applied_shift = 0.0;
    CoercivityReport coercivity;
};

AssembledProblem assemble_problem(const ProblemSpec& problem, int nx, int ny);

// The strong-order measurement setup used throughout: unit square, D = 0.01*I,
// unit cellular velocity, phi(x) = x - x^5, Dirichlet X = 1 on the x = 0 side,
// Neumann elsewhere, X0 = 1, T = 1.
ProblemSpec benchmark_problem();

} // namespace spde
