#include "spde/stepper.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "spde/errors.hpp"

namespace spde {

const char* scheme_name(Scheme s) {
    return s == Scheme::implicit ? "implicit" : "semi_implicit";
}

double check_wellposed(const DriftPolynomial& effective_drift, double dt) {
    if (!(dt > 0.0))
        throw ConfigError("check_wellposed: dt must be positive");
    const double l0 =
        std::max(0.0, one_sided_constant_estimate(effective_drift, 20000, 0x57454c4cu));
    if (dt * l0 >= 1.0) {
        std::ostringstream msg;
        msg << "time step too large for the implicit drift solve: dt * L0 = " << dt * l0
            << " >= 1 (dt = " << dt << ", one-sided constant L0 = " << l0 << ")";
        throw ConfigError(msg.str());
    }
    return l0;
}

namespace {

// Union sparsity of two same-shape matrices with slot maps back into it, so the
// Jacobian A - dt*M*diag(d) refills in place every Newton iteration.
struct UnionPattern {
    SparseMatrix matrix;
    std::vector<int> slots_a;
    std::vector<int> slots_b;
};

UnionPattern make_union(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(a.nnz() + b.nnz()));
    const auto push_all = [&t](const SparseMatrix& m) {
        const auto offsets = m.row_offsets();
        const auto cols = m.col_indices();
        for (int row = 0; row < m.rows(); ++row)
            for (int k = offsets[static_cast<size_t>(row)]; k < offsets[static_cast<size_t>(row) + 1]; ++k)
                t.push_back({row, cols[static_cast<size_t>(k)], 1.0});
    };
    push_all(a);
    push_all(b);

    UnionPattern u;
    u.matrix = SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));

    const auto locate = [&u](const SparseMatrix& m, std::vector<int>& slots) {
        slots.resize(static_cast<size_t>(m.nnz()));
        const auto m_off = m.row_offsets();
        const auto m_col = m.col_indices();
        const auto u_off = u.matrix.row_offsets();
        const auto u_col = u.matrix.col_indices();
        for (int row = 0; row < m.rows(); ++row) {
            int uk = u_off[static_cast<size_t>(row)];
            for (int k = m_off[static_cast<size_t>(row)]; k < m_off[static_cast<size_t>(row) + 1]; ++k) {
                while (u_col[static_cast<size_t>(uk)] != m_col[static_cast<size_t>(k)])
                    ++uk;
                slots[static_cast<size_t>(k)] = uk;
            }
        }
    };
    locate(a, u.slots_a);
    locate(b, u.slots_b);
    return u;
}

} // namespace

struct PathIntegrator::Impl {
    const DiscreteSystem& sys;
    DriftPolynomial drift;
    StepperConfig cfg;

    SparseMatrix a_ff;              // M_ff + dt K_ff
    std::vector<double> const_rhs;  // boundary lifting, constant in time
    std::vector<double> g;          // Dirichlet values
    std::optional<LuSolver> a_lu;   // semi-implicit solve / frozen preconditioner
    std::optional<UnionPattern> jac;
    std::optional<RefactorableLu> jac_lu;

    Impl(const DiscreteSystem& system, DriftPolynomial d, StepperConfig c)
        : sys(system), drift(std::move(d)), cfg(c) {
        if (!(cfg.dt > 0.0))
            throw ConfigError("PathIntegrator: dt must be positive");
        check_wellposed(drift, cfg.dt);

        a_ff = SparseMatrix::weighted_sum(sys.mass_ff, 1.0, sys.stiff_ff, cfg.dt);
        g = sys.dirichlet_values;

        // const_rhs = M_fd g + dt M_fd phi(g) - (M_fd + dt K_fd) g
        //           = dt (M_fd phi(g) - K_fd g); kept in the generic form so a
        // change of lifting convention stays local to this spot.
        const_rhs.assign(static_cast<size_t>(sys.n_free()), 0.0);
        if (!g.empty()) {
            const std::vector<double> phi_g = eval_nemytskii(drift, g);
            const std::vector<double> m_g = sys.mass_fd.multiply(g);
            const std::vector<double> m_phi_g = sys.mass_fd.multiply(phi_g);
            const std::vector<double> k_g = sys.stiff_fd.multiply(g);
            for (size_t i = 0; i < const_rhs.size(); ++i)
                const_rhs[i] = m_g[i] + cfg.dt * m_phi_g[i] - (m_g[i] + cfg.dt * k_g[i]);
        }

        const bool direct = cfg.linear.method == SolveSettings::Method::direct_lu;
        if (cfg.scheme == Scheme::semi_implicit) {
            if (direct)
                a_lu.emplace(a_ff);
        } else {
            jac.emplace(make_union(a_ff, sys.mass_ff));
            if (direct)
                jac_lu.emplace(jac->matrix);
            else
                a_lu.emplace(a_ff); // frozen preconditioner for the Krylov route
        }
    }

    void fill_jacobian(std::span<const double> dphi) {
        auto vals = jac->matrix.values_mut();
        std::fill(vals.begin(), vals.end(), 0.0);
        const auto a_vals = a_ff.values();
        for (size_t k = 0; k < a_vals.size(); ++k)
            vals[static_cast<size_t>(jac->slots_a[k])] += a_vals[k];
        const auto m_off = sys.mass_ff.row_offsets();
        const auto m_col = sys.mass_ff.col_indices();
        const auto m_vals = sys.mass_ff.values();
        for (int row = 0; row < sys.mass_ff.rows(); ++row)
            for (int k = m_off[static_cast<size_t>(row)]; k < m_off[static_cast<size_t>(row) + 1]; ++k)
                vals[static_cast<size_t>(jac->slots_b[static_cast<size_t>(k)])] -=
                    cfg.dt * m_vals[static_cast<size_t>(k)] *
                    dphi[static_cast<size_t>(m_col[static_cast<size_t>(k)])];
    }

    std::vector<double> solve_jacobian(const std::vector<double>& rhs) {
        if (jac_lu) {
            jac_lu->refactor(jac->matrix);
            return jac_lu->solve(rhs);
        }
        const Preconditioner precond = [this](std::span<const double> v) {
            return a_lu->solve(v);
        };
        return bicgstab(jac->matrix, rhs, cfg.linear.rel_tol, cfg.linear.max_iterations, precond);
    }

    // M_ff (x_prev + zeta) on free nodes. The M_fd g contribution from the
    // previous state cancels against the lifting of the new one, so const_rhs
    // holds only the dt-sized boundary terms and nothing is added here.
    std::vector<double> rhs_base(const NodalField& x_prev, const NodalField* zeta) const {
        std::vector<double> xz = gather(x_prev, sys.free_nodes);
        if (zeta) {
            const std::vector<double> z = gather(*zeta, sys.free_nodes);
            for (size_t i = 0; i < xz.size(); ++i)
                xz[i] += z[i];
        }
        return sys.mass_ff.multiply(xz);
    }

    NodalField assemble_full(const std::vector<double>& y_free) const {
        NodalField full(static_cast<size_t>(sys.n_nodes()), 0.0);
        scatter(y_free, sys.free_nodes, full);
        scatter(g, sys.dirichlet_nodes, full);
        return full;
    }

    NodalField do_semi(const NodalField& x_prev, const NodalField* zeta, StepStats& stats) {
        std::vector<double> x_f = gather(x_prev, sys.free_nodes);
        const std::vector<double> phi_x = eval_nemytskii(drift, x_f);
        std::vector<double> combo = x_f;
        axpy(cfg.dt, phi_x, combo);
        if (zeta) {
            const std::vector<double> z = gather(*zeta, sys.free_nodes);
            for (size_t i = 0; i < combo.size(); ++i)
                combo[i] += z[i];
        }
        std::vector<double> rhs = sys.mass_ff.multiply(combo);
        axpy(1.0, const_rhs, rhs);
        std::vector<double> y = a_lu ? a_lu->solve(rhs)
                                     : bicgstab(a_ff, rhs, cfg.linear.rel_tol,
                                                cfg.linear.max_iterations);
        if (!all_finite(y))
            throw NumericalError("semi-implicit step produced non-finite values");
        stats = {0, 0.0};
        return assemble_full(y);
    }

    NodalField do_implicit(const NodalField& x_prev, const NodalField* zeta, StepStats& stats) {
        const std::vector<double> rhs = rhs_base(x_prev, zeta);
        const double rhs_norm = l2_norm(sys.mass_ff, rhs);
        const double threshold = cfg.newton_tol * std::max(rhs_norm, 1e-14);

        std::vector<double> y = gather(x_prev, sys.free_nodes);
        std::vector<double> residual(y.size());
        double res_norm = 0.0;
        for (int it = 0;; ++it) {
            // G(y) = A_ff y - dt M_ff phi(y) - const_rhs - M_ff(x + zeta)
            std::vector<double> ay = a_ff.multiply(y);
            const std::vector<double> phi_y = eval_nemytskii(drift, y);
            const std::vector<double> m_phi = sys.mass_ff.multiply(phi_y);
            for (size_t i = 0; i < y.size(); ++i)
                residual[i] = ay[i] - cfg.dt * m_phi[i] - const_rhs[i] - rhs[i];
            res_norm = l2_norm(sys.mass_ff, residual);
            if (res_norm <= threshold) {
                stats = {it, res_norm};
                break;
            }
            if (it >= cfg.newton_max_iter) {
                std::ostringstream msg;
                msg << "Newton did not converge in " << cfg.newton_max_iter
                    << " iterations (residual " << res_norm << ", threshold " << threshold << ")";
                throw NumericalError(msg.str());
            }
            const std::vector<double> dphi = eval_derivative(drift, y);
            fill_jacobian(dphi);
            for (auto& r : residual)
                r = -r;
            const std::vector<double> delta = solve_jacobian(residual);
            axpy(1.0, delta, y);
            if (!all_finite(y))
                throw NumericalError("Newton iterate became non-finite");
        }
        return assemble_full(y);
    }
};

PathIntegrator::PathIntegrator(const DiscreteSystem& system, DriftPolynomial effective_drift,
                               StepperConfig config)
    : impl_(std::make_unique<Impl>(system, std::move(effective_drift), config)) {}

PathIntegrator::~PathIntegrator() = default;
PathIntegrator::PathIntegrator(PathIntegrator&&) noexcept = default;
PathIntegrator& PathIntegrator::operator=(PathIntegrator&&) noexcept = default;

NodalField PathIntegrator::step(const NodalField& x_prev, const NodalField& zeta) {
    if (static_cast<int>(x_prev.size()) != impl_->sys.n_nodes() ||
        static_cast<int>(zeta.size()) != impl_->sys.n_nodes())
        throw ConfigError("PathIntegrator::step: field size does not match system");
    return impl_->cfg.scheme == Scheme::semi_implicit ? impl_->do_semi(x_prev, &zeta, stats_)
                                                      : impl_->do_implicit(x_prev, &zeta, stats_);
}

NodalField PathIntegrator::step(const NodalField& x_prev) {
    if (static_cast<int>(x_prev.size()) != impl_->sys.n_nodes())
        throw ConfigError("PathIntegrator::step: field size does not match system");
    return impl_->cfg.scheme == Scheme::semi_implicit ? impl_->do_semi(x_prev, nullptr, stats_)
                                                      : impl_->do_implicit(x_prev, nullptr, stats_);
}

NodalField backward_euler_step(const DiscreteSystem& system, const DriftPolynomial& drift,
                               const NodalField& x_prev, const NodalField& zeta,
                               const StepperConfig& config) {
    StepperConfig c = config;
    c.scheme = Scheme::implicit;
    PathIntegrator integrator(system, drift, c);
    return integrator.step(x_prev, zeta);
}

NodalField semi_implicit_step(const DiscreteSystem& system, const DriftPolynomial& drift,
                              const NodalField& x_prev, const NodalField& zeta,
                              const StepperConfig& config) {
    StepperConfig c = config;
    c.scheme = Scheme::semi_implicit;
    PathIntegrator integrator(system, drift, c);
    return integrator.step(x_prev, zeta);
}

PathSolution solve_path(const DiscreteSystem& system, const DriftPolynomial& effective_drift,
                        const NodalField& x0, const StepperConfig& config, int n_steps,
                        const KlTable* kl, const BrownianPath* path, int aggregation) {
    if (n_steps < 0)
        throw ConfigError("solve_path: negative step count");
    if ((kl == nullptr) != (path == nullptr))
        throw ConfigError("solve_path: noise table and path must be passed together");
    if (path && path->n_fine_steps != n_steps * aggregation)
        throw ConfigError("solve_path: steps * aggregation must cover the noise tableau exactly");

    PathSolution out;
    NodalField x = x0;
    scatter(system.dirichlet_values, system.dirichlet_nodes, x);
    out.max_abs_value = max_abs(x);
    if (n_steps == 0) {
        out.terminal = std::move(x);
        return out;
    }

    PathIntegrator integrator(system, effective_drift, config);
    for (int m = 0; m < n_steps; ++m) {
        try {
            if (kl) {
                const NodalField zeta = kl->nodal_increment(*path, m, aggregation);
                x = integrator.step(x, zeta);
            } else {
                x = integrator.step(x);
            }
        } catch (const NumericalError& e) {
            std::ostringstream msg;
            msg << "step " << m + 1 << " of " << n_steps << " (dt = " << config.dt
                << ", " << scheme_name(config.scheme) << "): " << e.what();
            throw NumericalError(msg.str());
        }
        const StepStats& st = integrator.last_stats();
        out.total_newton_iterations += st.newton_iterations;
        out.max_newton_iterations = std::max(out.max_newton_iterations, st.newton_iterations);
        out.max_abs_value = std::max(out.max_abs_value, max_abs(x));
    }
    out.terminal = std::move(x);
    out.steps = n_steps;
    return out;
}

} // namespace spde
