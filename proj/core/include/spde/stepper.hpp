#pragma once

#include <cstdint>

#include "spde/drift.hpp"
#include "spde/fem.hpp"
#include "spde/noise.hpp"

namespace spde {

enum class Scheme { implicit, semi_implicit };

const char* scheme_name(Scheme s);

struct StepperConfig {
    Scheme scheme = Scheme::implicit;
    double dt = 0.0;
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    SolveSettings linear{};
};

struct StepStats {
    int newton_iterations = 0;
    double final_residual = 0.0;
};

// One backward Euler step of (M + dt K) X_{m+1} = M (X_m + zeta) + dt M F(X*),
// restricted to free nodes with Dirichlet data lifted to the right-hand side.
// The fully implicit scheme takes X* = X_{m+1} (Newton in the mass norm); the
// semi-implicit one takes X* = X_m and needs a single linear solve per step
// with a constant matrix.
//
// The integrator owns the per-trajectory solver state: the factorization of
// M + dt K (semi-implicit, and as frozen preconditioner for Krylov), or the
// symbolic analysis of the Jacobian pattern (implicit). One instance per
// worker; instances never share mutable state.
class PathIntegrator {
public:
    PathIntegrator(const DiscreteSystem& system, DriftPolynomial effective_drift,
                   StepperConfig config);
    ~PathIntegrator();
    PathIntegrator(PathIntegrator&&) noexcept;
    PathIntegrator& operator=(PathIntegrator&&) noexcept;

    // Advance one step. zeta is the full nodal noise increment; entries at
    // Dirichlet nodes are ignored (the constraint is re-pinned exactly).
    NodalField step(const NodalField& x_prev, const NodalField& zeta);
    NodalField step(const NodalField& x_prev);

    const StepStats& last_stats() const { return stats_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    StepStats stats_;
};

// Single-step conveniences used by tests.
NodalField backward_euler_step(const DiscreteSystem& system, const DriftPolynomial& drift,
                               const NodalField& x_prev, const NodalField& zeta,
                               const StepperConfig& config);
NodalField semi_implicit_step(const DiscreteSystem& system, const DriftPolynomial& drift,
                              const NodalField& x_prev, const NodalField& zeta,
                              const StepperConfig& config);

// Empirical one-sided constant of the effective drift; throws ConfigError when
// dt * L0 >= 1 (the regime where uniqueness of the implicit step can fail).
double check_wellposed(const DriftPolynomial& effective_drift, double dt);

struct PathSolution {
    NodalField terminal;
    int steps = 0;
    long total_newton_iterations = 0;
    int max_newton_iterations = 0;
    double max_abs_value = 0.0;
};

// Integrate a full trajectory. When path/kl are null the drift-only dynamics
// are integrated (deterministic PDE mode). aggregation counts fine steps per
// scheme step.
PathSolution solve_path(const DiscreteSystem& system, const DriftPolynomial& effective_drift,
                        const NodalField& x0, const StepperConfig& config, int n_steps,
                        const KlTable* kl = nullptr, const BrownianPath* path = nullptr,
                        int aggregation = 1);

} // namespace spde
