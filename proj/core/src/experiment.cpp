#include "spde/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "spde/errors.hpp"
#include "svg.hpp"

namespace spde {

namespace {

int steps_for(double t_final, double dt, const char* what) {
    if (!(dt > 0.0))
        throw ConfigError(std::string(what) + ": time step must be positive");
    const long long n = std::llround(t_final / dt);
    if (n < 1 || std::abs(static_cast<double>(n) * dt - t_final) > 1e-9 * std::max(t_final, 1.0)) {
        std::ostringstream msg;
        msg << what << ": dt = " << dt << " does not divide the horizon T = " << t_final;
        throw ConfigError(msg.str());
    }
    return static_cast<int>(n);
}

int ratio_of(double coarse, double fine, const char* what) {
    const long long r = std::llround(coarse / fine);
    if (r < 1 || std::abs(static_cast<double>(r) * fine - coarse) > 1e-9 * coarse) {
        std::ostringstream msg;
        msg << what << ": " << coarse << " is not an integer multiple of " << fine;
        throw ConfigError(msg.str());
    }
    return static_cast<int>(r);
}

// Run fn(sample) on a small pool. Each task writes only to its own sample slot,
// so determinism needs no synchronization beyond the index dispenser.
template <typename Fn>
void parallel_samples(int n, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int s = 0; s < n; ++s)
            fn(s);
        return;
    }
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto body = [&] {
        while (true) {
            const int s = next.fetch_add(1);
            if (s >= n)
                return;
            try {
                fn(s);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back(body);
    for (auto& th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

StepperConfig stepper_for(const StudyConfig& cfg, Scheme scheme, double dt) {
    StepperConfig sc;
    sc.scheme = scheme;
    sc.dt = dt;
    sc.newton_tol = cfg.newton_tol;
    sc.newton_max_iter = cfg.newton_max_iter;
    sc.linear = cfg.linear;
    return sc;
}

void reduce_points(SchemeReport& rep, const std::vector<std::vector<double>>& errors_by_sample,
                   size_t scheme_offset, const std::vector<double>& resolutions, int samples) {
    rep.points.clear();
    for (size_t d = 0; d < resolutions.size(); ++d) {
        double sum_sq = 0.0;
        double sum = 0.0;
        for (int s = 0; s < samples; ++s) {
            const double e = errors_by_sample[static_cast<size_t>(s)][scheme_offset + d];
            sum_sq += e * e;
            sum += e;
        }
        const double rms = std::sqrt(sum_sq / samples);
        double stddev = 0.0;
        if (samples > 1) {
            const double mean = sum / samples;
            double acc = 0.0;
            for (int s = 0; s < samples; ++s) {
                const double e = errors_by_sample[static_cast<size_t>(s)][scheme_offset + d];
                acc += (e - mean) * (e - mean);
            }
            stddev = std::sqrt(acc / (samples - 1));
        }
        rep.points.push_back({resolutions[d], rms, stddev});
    }
}

void fit_scheme(SchemeReport& rep) {
    if (rep.points.size() < 2) {
        rep.fitted_order = std::numeric_limits<double>::quiet_NaN();
        rep.fitted_constant = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(rep.points.size());
    for (const auto& p : rep.points)
        pts.emplace_back(p.resolution, p.rms_error);
    const auto [order, constant] = fit_order(pts);
    rep.fitted_order = order;
    rep.fitted_constant = constant;
}

} // namespace

std::pair<double, double> fit_order(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2)
        throw ConfigError("fit_order: need at least two points");
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [res, err] : points) {
        if (!(res > 0.0) || !(err > 0.0)) {
            std::ostringstream msg;
            msg << "fit_order: non-positive point (" << res << ", " << err << ")";
            throw NumericalError(msg.str());
        }
        mean_x += std::log(res);
        mean_y += std::log(err);
    }
    const double n = static_cast<double>(points.size());
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [res, err] : points) {
        const double dx = std::log(res) - mean_x;
        sxx += dx * dx;
        sxy += dx * (std::log(err) - mean_y);
    }
    if (sxx == 0.0)
        throw NumericalError("fit_order: all resolutions identical");
    const double order = sxy / sxx;
    const double constant = std::exp(mean_y - order * mean_x);
    return {order, constant};
}

ConvergenceReport run_temporal_study(const StudyConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.dt_list.empty())
        throw ConfigError("run_temporal_study: dt_list is empty");
    if (cfg.samples < 1)
        throw ConfigError("run_temporal_study: need at least one sample");
    if (cfg.schemes.empty())
        throw ConfigError("run_temporal_study: no schemes selected");
    if (!cfg.noise_enabled)
        throw ConfigError("run_temporal_study: temporal studies are Monte Carlo; enable noise");

    const double t_final = cfg.problem.t_final;
    const int n_ref_steps = steps_for(t_final, cfg.reference_dt, "run_temporal_study (reference)");
    std::vector<int> n_steps, aggregation;
    for (const double dt : cfg.dt_list) {
        n_steps.push_back(steps_for(t_final, dt, "run_temporal_study"));
        aggregation.push_back(ratio_of(dt, cfg.reference_dt, "run_temporal_study"));
    }

    const AssembledProblem assembled = assemble_problem(cfg.problem, cfg.nx, cfg.ny);
    const DriftPolynomial drift = cfg.problem.drift.with_compensation(assembled.applied_shift);
    check_wellposed(drift, *std::max_element(cfg.dt_list.begin(), cfg.dt_list.end()));

    const NoiseSpec noise = build_spectrum(cfg.noise_beta, cfg.noise_delta, cfg.noise_modes,
                                           cfg.noise_modes, cfg.problem.l1, cfg.problem.l2);
    const KlTable kl(noise, assembled.mesh);
    const NodalField x0 = interpolate_initial(cfg.problem, assembled.mesh);

    const size_t n_dts = cfg.dt_list.size();
    std::vector<std::vector<double>> errors(static_cast<size_t>(cfg.samples));

    parallel_samples(cfg.samples, cfg.workers, [&](int s) {
        try {
            const BrownianPath path = sample_path(noise, n_ref_steps, cfg.reference_dt,
                                                  cfg.master_seed, static_cast<std::uint32_t>(s));
            std::vector<double> err(cfg.schemes.size() * n_dts);
            for (size_t sc = 0; sc < cfg.schemes.size(); ++sc) {
                const Scheme scheme = cfg.schemes[sc];
                const PathSolution ref = solve_path(assembled.system, drift, x0,
                                                    stepper_for(cfg, scheme, cfg.reference_dt),
                                                    n_ref_steps, &kl, &path, 1);
                for (size_t d = 0; d < n_dts; ++d) {
                    const PathSolution sol =
                        solve_path(assembled.system, drift, x0,
                                   stepper_for(cfg, scheme, cfg.dt_list[d]), n_steps[d], &kl, &path,
                                   aggregation[d]);
                    std::vector<double> diff = ref.terminal;
                    axpy(-1.0, sol.terminal, diff);
                    err[sc * n_dts + d] = l2_norm(assembled.system.mass, diff);
                }
            }
            errors[static_cast<size_t>(s)] = std::move(err);
        } catch (const NumericalError& e) {
            throw NumericalError("sample " + std::to_string(s) + ": " + e.what());
        }
    });

    ConvergenceReport report;
    report.kind = "temporal";
    report.samples = cfg.samples;
    report.master_seed = cfg.master_seed;
    report.applied_shift = assembled.applied_shift;
    report.config_echo = cfg.config_echo;
    for (size_t sc = 0; sc < cfg.schemes.size(); ++sc) {
        SchemeReport rep;
        rep.scheme = cfg.schemes[sc];
        reduce_points(rep, errors, sc * n_dts, cfg.dt_list, cfg.samples);
        fit_scheme(rep);
        report.schemes.push_back(std::move(rep));
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

ConvergenceReport run_spatial_study(const StudyConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.mesh_list.empty())
        throw ConfigError("run_spatial_study: mesh_list is empty");
    if (cfg.reference_mesh < 2)
        throw ConfigError("run_spatial_study: reference mesh is required");
    if (cfg.samples < 1)
        throw ConfigError("run_spatial_study: need at least one sample");
    if (cfg.schemes.empty())
        throw ConfigError("run_spatial_study: no schemes selected");
    for (const int nx : cfg.mesh_list)
        if (nx < 1 || cfg.reference_mesh % nx != 0)
            throw ConfigError("run_spatial_study: every mesh must divide the reference mesh");

    const double t_final = cfg.problem.t_final;
    const int n_steps = steps_for(t_final, cfg.spatial_dt, "run_spatial_study");

    // Pin one shift for every resolution so all meshes discretize the same
    // operator; the reference mesh decides.
    ProblemSpec problem = cfg.problem;
    AssembledProblem ref_assembled = assemble_problem(problem, cfg.reference_mesh, cfg.reference_mesh);
    problem.garding_shift = ref_assembled.applied_shift;
    const DriftPolynomial drift = problem.drift.with_compensation(ref_assembled.applied_shift);
    check_wellposed(drift, cfg.spatial_dt);

    std::vector<AssembledProblem> coarse;
    coarse.reserve(cfg.mesh_list.size());
    for (const int nx : cfg.mesh_list)
        coarse.push_back(assemble_problem(problem, nx, nx));

    std::optional<NoiseSpec> noise;
    std::optional<KlTable> ref_kl;
    std::vector<KlTable> coarse_kl;
    int samples = cfg.samples;
    if (cfg.noise_enabled) {
        noise.emplace(build_spectrum(cfg.noise_beta, cfg.noise_delta, cfg.noise_modes,
                                     cfg.noise_modes, problem.l1, problem.l2));
        ref_kl.emplace(*noise, ref_assembled.mesh);
        for (const auto& a : coarse)
            coarse_kl.emplace_back(*noise, a.mesh);
    } else {
        samples = 1; // drift-only dynamics are deterministic
    }

    const NodalField ref_x0 = interpolate_initial(problem, ref_assembled.mesh);
    std::vector<NodalField> coarse_x0;
    for (const auto& a : coarse)
        coarse_x0.push_back(interpolate_initial(problem, a.mesh));

    // Index map from each coarse node to the coinciding reference node.
    std::vector<std::vector<int>> restriction;
    for (const int nx : cfg.mesh_list) {
        const int r = cfg.reference_mesh / nx;
        std::vector<int> map;
        map.reserve(static_cast<size_t>((nx + 1) * (nx + 1)));
        for (int j = 0; j <= nx; ++j)
            for (int i = 0; i <= nx; ++i)
                map.push_back(r * j * (cfg.reference_mesh + 1) + r * i);
        restriction.push_back(std::move(map));
    }

    const size_t n_meshes = cfg.mesh_list.size();
    std::vector<std::vector<double>> errors(static_cast<size_t>(samples));

    parallel_samples(samples, cfg.workers, [&](int s) {
        std::optional<BrownianPath> path;
        if (noise)
            path.emplace(sample_path(*noise, n_steps, cfg.spatial_dt, cfg.master_seed,
                                     static_cast<std::uint32_t>(s)));
        std::vector<double> err(cfg.schemes.size() * n_meshes);
        for (size_t sc = 0; sc < cfg.schemes.size(); ++sc) {
            const Scheme scheme = cfg.schemes[sc];
            const StepperConfig scfg = stepper_for(cfg, scheme, cfg.spatial_dt);
            const PathSolution ref = solve_path(ref_assembled.system, drift, ref_x0, scfg, n_steps,
                                                noise ? &*ref_kl : nullptr,
                                                path ? &*path : nullptr, 1);
            for (size_t m = 0; m < n_meshes; ++m) {
                const PathSolution sol = solve_path(coarse[m].system, drift, coarse_x0[m], scfg,
                                                    n_steps, noise ? &coarse_kl[m] : nullptr,
                                                    path ? &*path : nullptr, 1);
                std::vector<double> diff(sol.terminal.size());
                for (size_t k = 0; k < diff.size(); ++k)
                    diff[k] = ref.terminal[static_cast<size_t>(restriction[m][k])] -
                              sol.terminal[k];
                err[sc * n_meshes + m] = l2_norm(coarse[m].system.mass, diff);
            }
        }
        errors[static_cast<size_t>(s)] = std::move(err);
    });

    std::vector<double> resolutions;
    for (const auto& a : coarse)
        resolutions.push_back(a.mesh.h);

    ConvergenceReport report;
    report.kind = "spatial";
    report.samples = samples;
    report.master_seed = cfg.master_seed;
    report.applied_shift = ref_assembled.applied_shift;
    report.config_echo = cfg.config_echo;
    for (size_t sc = 0; sc < cfg.schemes.size(); ++sc) {
        SchemeReport rep;
        rep.scheme = cfg.schemes[sc];
        reduce_points(rep, errors, sc * n_meshes, resolutions, samples);
        fit_scheme(rep);
        report.schemes.push_back(std::move(rep));
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string format_double(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void emit_report(const ConvergenceReport& report, const std::filesystem::path& out_dir) {
    bool any_points = false;
    for (const auto& sr : report.schemes)
        any_points = any_points || !sr.points.empty();
    if (!any_points)
        throw ConfigError("emit_report: report has no points");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("emit_report: cannot create " + out_dir.string() + ": " + ec.message());

    {
        std::ofstream csv(out_dir / "errors.csv", std::ios::binary);
        if (!csv)
            throw IoError("emit_report: cannot open errors.csv for writing");
        csv << "scheme,resolution,rms_error,n_samples,seed\n";
        for (const auto& sr : report.schemes)
            for (const auto& p : sr.points)
                csv << scheme_name(sr.scheme) << ',' << format_double(p.resolution) << ','
                    << format_double(p.rms_error) << ',' << report.samples << ','
                    << report.master_seed << '\n';
        if (!csv.flush())
            throw IoError("emit_report: write to errors.csv failed");
    }

    {
        std::ofstream txt(out_dir / "report.txt", std::ios::binary);
        if (!txt)
            throw IoError("emit_report: cannot open report.txt for writing");
        txt << "convergence study: " << report.kind << '\n'
            << "samples: " << report.samples << '\n'
            << "seed: " << report.master_seed << '\n'
            << "applied zero-order shift: " << format_double(report.applied_shift) << '\n'
            << "wall seconds: " << format_double(report.wall_seconds) << '\n';
        for (const auto& sr : report.schemes) {
            txt << "\nscheme " << scheme_name(sr.scheme) << '\n'
                << "  fitted order: " << format_double(sr.fitted_order) << " (constant "
                << format_double(sr.fitted_constant) << ")\n"
                << "  resolution -> rms error (sample stddev)\n";
            for (const auto& p : sr.points)
                txt << "    " << format_double(p.resolution) << " -> " << format_double(p.rms_error)
                    << " (" << format_double(p.sample_stddev) << ")\n";
        }
        if (!report.config_echo.empty())
            txt << "\nconfiguration:\n" << report.config_echo;
        if (!txt.flush())
            throw IoError("emit_report: write to report.txt failed");
    }

    detail::write_convergence_svg(report, out_dir / "convergence.svg");
}

} // namespace spde
