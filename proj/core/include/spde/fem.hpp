#pragma once

#include <functional>
#include <span>
#include <vector>

#include "spde/linalg.hpp"
#include "spde/mesh.hpp"

namespace spde {

// Nodal coefficient vector of a P1 field; entry i belongs to mesh node i.
using NodalField = std::vector<double>;

struct DiffusionTensor {
    double d11 = 1.0;
    double d12 = 0.0;
    double d21 = 0.0;
    double d22 = 1.0;
};

// Coefficients of the elliptic operator in weak form:
//   a(u, v) = int grad(v)^T D grad(u) + (q . grad u) v dx
//           + alpha0 * int_{open boundary} u v ds + shift * int u v dx.
// Variable coefficients are sampled at triangle centroids (one-point quadrature,
// second order); the Robin edge term uses exact 1D quadrature.
struct OperatorSpec {
    std::function<DiffusionTensor(double, double)> diffusion;
    std::function<std::array<double, 2>(double, double)> advection; // null = none
    double robin_alpha0 = 0.0;
    double garding_shift = 0.0;
};

SparseMatrix assemble_mass(const Mesh& mesh);
SparseMatrix assemble_stiffness(const Mesh& mesh, const OperatorSpec& op);

// Mesh-free discrete problem: full matrices plus the free/constrained split.
// Keeping it independent of Mesh lets tests drive the steppers with hand-built
// one-dimensional surrogates.
struct DiscreteSystem {
    SparseMatrix mass;
    SparseMatrix stiffness;
    std::vector<int> free_nodes;
    std::vector<int> dirichlet_nodes;
    std::vector<double> dirichlet_values;
    SparseMatrix mass_ff;
    SparseMatrix mass_fd;
    SparseMatrix stiff_ff;
    SparseMatrix stiff_fd;

    int n_nodes() const { return mass.rows(); }
    int n_free() const { return static_cast<int>(free_nodes.size()); }
};

// Eliminate Dirichlet rows/columns by lifting: the constrained system keeps
// free-node equations, with boundary data moved to the right-hand side through
// the *_fd blocks.
DiscreteSystem apply_dirichlet(const SparseMatrix& mass, const SparseMatrix& stiffness,
                               const Mesh& tagged_mesh, const BoundarySpec& bc);

// Build a DiscreteSystem directly from matrices and an explicit constraint list
// (no mesh involved). Used by scalar surrogate tests.
DiscreteSystem make_system(const SparseMatrix& mass, const SparseMatrix& stiffness,
                           std::vector<int> dirichlet_nodes, std::vector<double> dirichlet_values);

double m_inner(const SparseMatrix& mass, std::span<const double> u, std::span<const double> v);
// Discrete L2 norm sqrt(u^T M u).
double l2_norm(const SparseMatrix& mass, std::span<const double> u);

std::vector<double> gather(std::span<const double> full, std::span<const int> ids);
void scatter(std::span<const double> values, std::span<const int> ids, std::span<double> full);

struct CoercivityReport {
    // Smallest eigenvalue of the symmetric part of the (already shifted)
    // stiffness in the mass inner product, over free nodes.
    double lambda_min_sym = 0.0;
    // Extra zero-order shift that would make the operator coercive, rounded up
    // to one significant digit; 0 when already coercive.
    double required_shift = 0.0;
    bool converged = false;
    int iterations = 0;
    double residual_bound = 0.0;
};

// Estimate lambda_min(sym(K_ff)) in the M_ff inner product by power iteration
// for the dominant modulus followed by safeguarded shifted inverse iteration.
// Non-convergence is reported, not thrown: the diagnostic is advisory.
CoercivityReport coercivity_diagnostic(const DiscreteSystem& system);

} // namespace spde
