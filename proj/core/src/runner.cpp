#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "spde/config.hpp"
#include "spde/errors.hpp"
#include "spde/noise.hpp"
#include "spde/stepper.hpp"

namespace spde {

namespace {

std::vector<Scheme> schemes_from(const std::string& s) {
    if (s == "implicit")
        return {Scheme::implicit};
    if (s == "semi_implicit")
        return {Scheme::semi_implicit};
    return {Scheme::implicit, Scheme::semi_implicit};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + file.string() + " for writing");
    out << text;
    if (!out.flush())
        throw IoError("write to " + file.string() + " failed");
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

StudyConfig study_from(const RunConfig& cfg) {
    StudyConfig sc;
    sc.problem = cfg.problem;
    sc.noise_enabled = cfg.noise_enabled;
    sc.noise_beta = cfg.noise_beta;
    sc.noise_delta = cfg.noise_delta;
    sc.noise_modes = cfg.noise_modes;
    sc.samples = cfg.samples;
    sc.master_seed = cfg.seed;
    sc.workers = cfg.workers;
    sc.dt_list = cfg.dt_list;
    sc.reference_dt = cfg.reference_dt;
    sc.nx = cfg.nx;
    sc.ny = cfg.ny;
    sc.mesh_list = cfg.mesh_list;
    sc.reference_mesh = cfg.reference_mesh;
    sc.spatial_dt = cfg.spatial_dt;
    sc.schemes = schemes_from(cfg.scheme);
    sc.newton_tol = cfg.newton_tol;
    sc.newton_max_iter = cfg.newton_max_iter;
    sc.linear = cfg.linear;
    sc.config_echo = cfg.echo();
    return sc;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    if (cfg.scheme == "both")
        throw ConfigError("solve: pick one scheme (implicit or semi_implicit)");
    const Scheme scheme = schemes_from(cfg.scheme)[0];

    const long long n = std::llround(cfg.problem.t_final / cfg.dt);
    if (n < 1 || std::abs(static_cast<double>(n) * cfg.dt - cfg.problem.t_final) >
                     1e-9 * std::max(cfg.problem.t_final, 1.0))
        throw ConfigError("solve: dt does not divide t_final");

    const AssembledProblem assembled = assemble_problem(cfg.problem, cfg.nx, cfg.ny);
    const DriftPolynomial drift = cfg.problem.drift.with_compensation(assembled.applied_shift);
    const NodalField x0 = interpolate_initial(cfg.problem, assembled.mesh);

    StepperConfig scfg;
    scfg.scheme = scheme;
    scfg.dt = cfg.dt;
    scfg.newton_tol = cfg.newton_tol;
    scfg.newton_max_iter = cfg.newton_max_iter;
    scfg.linear = cfg.linear;

    PathSolution sol;
    if (cfg.noise_enabled) {
        const NoiseSpec noise = build_spectrum(cfg.noise_beta, cfg.noise_delta, cfg.noise_modes,
                                               cfg.noise_modes, cfg.problem.l1, cfg.problem.l2);
        const KlTable kl(noise, assembled.mesh);
        const BrownianPath path =
            sample_path(noise, static_cast<int>(n), cfg.dt, cfg.seed, /*sample=*/0);
        sol = solve_path(assembled.system, drift, x0, scfg, static_cast<int>(n), &kl, &path, 1);
    } else {
        sol = solve_path(assembled.system, drift, x0, scfg, static_cast<int>(n));
    }

    ensure_dir(cfg.out_dir);
    {
        std::ostringstream csv;
        csv << "index,x,y,value\n";
        for (int i = 0; i < assembled.mesh.n_nodes(); ++i) {
            const Point2& p = assembled.mesh.nodes[static_cast<size_t>(i)];
            csv << i << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
                << format_double(sol.terminal[static_cast<size_t>(i)]) << '\n';
        }
        write_text(cfg.out_dir / "solution.csv", csv.str());
    }
    write_text(cfg.out_dir / "config.echo.ini", cfg.echo());

    out << "solve: " << scheme_name(scheme) << ", " << n << " steps of dt = "
        << format_double(cfg.dt) << '\n'
        << "  applied shift: " << format_double(assembled.applied_shift) << '\n'
        << "  newton iterations: total " << sol.total_newton_iterations << ", max per step "
        << sol.max_newton_iterations << '\n'
        << "  max |X|: " << format_double(sol.max_abs_value) << '\n'
        << "  wrote " << (cfg.out_dir / "solution.csv").string() << '\n';
    return 0;
}

int cmd_study(const RunConfig& cfg, std::ostream& out, bool temporal) {
    const StudyConfig sc = study_from(cfg);
    const ConvergenceReport report = temporal ? run_temporal_study(sc) : run_spatial_study(sc);
    emit_report(report, cfg.out_dir);
    write_text(cfg.out_dir / "config.echo.ini", cfg.echo());

    out << report.kind << " study: " << report.samples << " samples, seed " << report.master_seed
        << ", wall " << format_double(report.wall_seconds) << " s\n";
    for (const auto& sr : report.schemes) {
        out << "  " << scheme_name(sr.scheme) << ": fitted order "
            << format_double(sr.fitted_order) << '\n';
        for (const auto& p : sr.points)
            out << "    " << format_double(p.resolution) << " -> "
                << format_double(p.rms_error) << '\n';
    }
    out << "  wrote " << (cfg.out_dir / "errors.csv").string() << '\n';
    return 0;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    const ValidationReport report = validate(cfg);
    for (const auto& e : report.entries)
        out << (e.ok ? "[ ok ] " : "[fail] ") << e.name << ": " << e.detail << '\n';
    out << (report.all_ok ? "all checks passed\n" : "validation failed\n");
    return report.all_ok ? 0 : 2;
}

int cmd_mesh_dump(const RunConfig& cfg, std::ostream& out) {
    const Mesh mesh = classify_boundary(
        build_rectangle_mesh(cfg.problem.l1, cfg.problem.l2, cfg.nx, cfg.ny),
        cfg.problem.boundary);
    ensure_dir(cfg.out_dir);

    {
        std::ostringstream csv;
        csv << "index,x,y,tag\n";
        static const char* tag_names[] = {"interior", "dirichlet", "neumann", "robin"};
        for (int i = 0; i < mesh.n_nodes(); ++i) {
            const Point2& p = mesh.nodes[static_cast<size_t>(i)];
            csv << i << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
                << tag_names[static_cast<size_t>(mesh.tags[static_cast<size_t>(i)])] << '\n';
        }
        write_text(cfg.out_dir / "nodes.csv", csv.str());
    }
    {
        std::ostringstream csv;
        csv << "index,a,b,c\n";
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto& tri = mesh.triangles[static_cast<size_t>(t)];
            csv << t << ',' << tri[0] << ',' << tri[1] << ',' << tri[2] << '\n';
        }
        write_text(cfg.out_dir / "triangles.csv", csv.str());
    }
    if (cfg.dump_matrices) {
        const SparseMatrix mass = assemble_mass(mesh);
        const SparseMatrix stiffness = assemble_stiffness(
            mesh, make_operator(cfg.problem, std::max(cfg.problem.garding_shift, 0.0)));
        const auto dump = [](const SparseMatrix& m) {
            std::ostringstream csv;
            csv << "row,col,value\n";
            const auto offsets = m.row_offsets();
            const auto cols = m.col_indices();
            const auto vals = m.values();
            for (int r = 0; r < m.rows(); ++r)
                for (int k = offsets[static_cast<size_t>(r)]; k < offsets[static_cast<size_t>(r) + 1]; ++k)
                    csv << r << ',' << cols[static_cast<size_t>(k)] << ','
                        << format_double(vals[static_cast<size_t>(k)]) << '\n';
            return csv.str();
        };
        write_text(cfg.out_dir / "mass.csv", dump(mass));
        write_text(cfg.out_dir / "stiffness.csv", dump(stiffness));
    }
    write_text(cfg.out_dir / "config.echo.ini", cfg.echo());

    out << "mesh-dump: " << mesh.n_nodes() << " nodes, " << mesh.n_triangles()
        << " triangles, h = " << format_double(mesh.h) << '\n'
        << "  wrote " << (cfg.out_dir / "nodes.csv").string() << '\n';
    return 0;
}

} // namespace

int run_command(const RunConfig& cfg, std::ostream& out) {
    if (cfg.command == "solve")
        return cmd_solve(cfg, out);
    if (cfg.command == "temporal-study")
        return cmd_study(cfg, out, true);
    if (cfg.command == "spatial-study")
        return cmd_study(cfg, out, false);
    if (cfg.command == "validate")
        return cmd_validate(cfg, out);
    if (cfg.command == "mesh-dump")
        return cmd_mesh_dump(cfg, out);
    throw ConfigError("unknown command '" + cfg.command + "'");
}

} // namespace spde
