#include "spde/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spde/errors.hpp"
#include "spde/noise.hpp"
#include "spde/stepper.hpp"

namespace spde {

namespace {

std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& why) {
    throw ConfigError("config: bad value '" + value + "' for key '" + key + "': " + why);
}

double parse_number(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
        const std::string num = trim(s.substr(0, slash));
        const std::string den = trim(s.substr(slash + 1));
        double a = 0, b = 0;
        auto ra = std::from_chars(num.data(), num.data() + num.size(), a);
        auto rb = std::from_chars(den.data(), den.data() + den.size(), b);
        if (ra.ec != std::errc() || ra.ptr != num.data() + num.size() || rb.ec != std::errc() ||
            rb.ptr != den.data() + den.size() || b == 0.0)
            bad_value(key, raw, "expected a number or an integer fraction like 1/1024");
        return a / b;
    }
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        bad_value(key, raw, "expected a number");
    return v;
}

long long parse_int(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        bad_value(key, raw, "expected an integer");
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    std::uint64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        bad_value(key, raw, "expected a non-negative integer");
    return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "on" || s == "yes")
        return true;
    if (s == "false" || s == "0" || s == "off" || s == "no")
        return false;
    bad_value(key, raw, "expected true or false");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "command") {
        const std::string v = trim(value);
        if (v != "solve" && v != "temporal-study" && v != "spatial-study" && v != "validate" &&
            v != "mesh-dump")
            bad_value(key, value,
                      "expected solve, temporal-study, spatial-study, validate or mesh-dump");
        cfg.command = v;
    } else if (key == "out_dir") {
        cfg.out_dir = trim(value);
    } else if (key == "workers") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 1024)
            bad_value(key, value, "expected 1..1024");
        cfg.workers = static_cast<int>(v);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "dump_matrices") {
        cfg.dump_matrices = parse_bool(key, value);
    } else if (key == "problem.l1" || key == "problem.l2") {
        const double v = parse_number(key, value);
        if (!(v > 0.0))
            bad_value(key, value, "domain length must be positive");
        (key == "problem.l1" ? cfg.problem.l1 : cfg.problem.l2) = v;
    } else if (key == "problem.t_final") {
        const double v = parse_number(key, value);
        if (!(v > 0.0))
            bad_value(key, value, "horizon must be positive");
        cfg.problem.t_final = v;
    } else if (key == "problem.diffusion") {
        const auto parts = split(value, ',');
        if (parts.size() == 1) {
            const double d = parse_number(key, parts[0]);
            cfg.problem.diffusion = {d, 0.0, 0.0, d};
        } else if (parts.size() == 4) {
            cfg.problem.diffusion = {parse_number(key, parts[0]), parse_number(key, parts[1]),
                                     parse_number(key, parts[2]), parse_number(key, parts[3])};
        } else {
            bad_value(key, value, "expected a scalar or d11,d12,d21,d22");
        }
    } else if (key == "problem.advection") {
        const std::string v = trim(value);
        if (v == "none") {
            cfg.problem.advection = {AdvectionKind::none, 0, 0, 0};
        } else if (v.rfind("constant:", 0) == 0) {
            const auto parts = split(v.substr(9), ',');
            if (parts.size() != 2)
                bad_value(key, value, "expected constant:qx,qy");
            cfg.problem.advection = {AdvectionKind::constant, parse_number(key, parts[0]),
                                     parse_number(key, parts[1]), 0.0};
        } else if (v.rfind("cellular:", 0) == 0) {
            cfg.problem.advection = {AdvectionKind::cellular, 0, 0,
                                     parse_number(key, v.substr(9))};
        } else {
            bad_value(key, value, "expected none, constant:qx,qy or cellular:mag");
        }
    } else if (key == "problem.x0") {
        const std::string v = trim(value);
        if (v.rfind("constant:", 0) == 0) {
            cfg.problem.initial = {InitialKind::constant, parse_number(key, v.substr(9))};
        } else if (v.rfind("cosine:", 0) == 0) {
            cfg.problem.initial = {InitialKind::cosine, parse_number(key, v.substr(7))};
        } else {
            bad_value(key, value, "expected constant:v or cosine:amp");
        }
    } else if (key == "problem.garding_shift") {
        const std::string v = trim(value);
        if (v == "auto") {
            cfg.problem.garding_shift = -1.0;
        } else {
            const double s = parse_number(key, value);
            if (s < 0.0)
                bad_value(key, value, "expected auto or a non-negative shift");
            cfg.problem.garding_shift = s;
        }
    } else if (key == "phi") {
        const auto parts = split(value, ',');
        std::vector<double> coeffs;
        for (const auto& p : parts)
            coeffs.push_back(parse_number(key, p));
        cfg.problem.drift = DriftPolynomial(std::move(coeffs));
    } else if (key == "bc.dirichlet") {
        const std::string v = trim(value);
        BoundarySpec& bc = cfg.problem.boundary;
        bc.dirichlet_sides = {false, false, false, false};
        if (v != "none") {
            for (const auto& side : split(v, ',')) {
                if (side == "xmin")
                    bc.dirichlet_sides[static_cast<size_t>(Side::xmin)] = true;
                else if (side == "xmax")
                    bc.dirichlet_sides[static_cast<size_t>(Side::xmax)] = true;
                else if (side == "ymin")
                    bc.dirichlet_sides[static_cast<size_t>(Side::ymin)] = true;
                else if (side == "ymax")
                    bc.dirichlet_sides[static_cast<size_t>(Side::ymax)] = true;
                else
                    bad_value(key, value, "expected none or sides from xmin,xmax,ymin,ymax");
            }
        }
    } else if (key == "bc.value") {
        cfg.problem.boundary.dirichlet_value = parse_number(key, value);
    } else if (key == "bc.robin_alpha0") {
        cfg.problem.boundary.robin_alpha0 = parse_number(key, value);
    } else if (key == "mesh.nx" || key == "mesh.ny") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 4096)
            bad_value(key, value, "expected 1..4096");
        (key == "mesh.nx" ? cfg.nx : cfg.ny) = static_cast<int>(v);
    } else if (key == "noise.enabled") {
        cfg.noise_enabled = parse_bool(key, value);
    } else if (key == "noise.beta") {
        const double v = parse_number(key, value);
        if (!(v >= 1.0))
            bad_value(key, value, "beta must be >= 1");
        cfg.noise_beta = v;
    } else if (key == "noise.delta") {
        const double v = parse_number(key, value);
        if (!(v > 0.0))
            bad_value(key, value, "delta must be > 0");
        cfg.noise_delta = v;
    } else if (key == "noise.modes") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 512)
            bad_value(key, value, "expected 1..512");
        cfg.noise_modes = static_cast<int>(v);
    } else if (key == "scheme") {
        const std::string v = trim(value);
        if (v != "implicit" && v != "semi_implicit" && v != "both")
            bad_value(key, value, "expected implicit, semi_implicit or both");
        cfg.scheme = v;
    } else if (key == "dt") {
        const double v = parse_number(key, value);
        if (!(v > 0.0))
            bad_value(key, value, "dt must be positive");
        cfg.dt = v;
    } else if (key == "newton.tol") {
        const double v = parse_number(key, value);
        if (!(v > 0.0) || v >= 1.0)
            bad_value(key, value, "expected a tolerance in (0, 1)");
        cfg.newton_tol = v;
    } else if (key == "newton.max_iter") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 1000)
            bad_value(key, value, "expected 1..1000");
        cfg.newton_max_iter = static_cast<int>(v);
    } else if (key == "linear.method") {
        const std::string v = trim(value);
        if (v == "direct_lu")
            cfg.linear.method = SolveSettings::Method::direct_lu;
        else if (v == "krylov_nonsymmetric")
            cfg.linear.method = SolveSettings::Method::krylov_nonsymmetric;
        else
            bad_value(key, value, "expected direct_lu or krylov_nonsymmetric");
    } else if (key == "linear.tol") {
        const double v = parse_number(key, value);
        if (!(v > 0.0) || v >= 1.0)
            bad_value(key, value, "expected a tolerance in (0, 1)");
        cfg.linear.rel_tol = v;
    } else if (key == "linear.max_iter") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 100000)
            bad_value(key, value, "expected 1..100000");
        cfg.linear.max_iterations = static_cast<int>(v);
    } else if (key == "study.samples") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 1000000)
            bad_value(key, value, "expected 1..1000000");
        cfg.samples = static_cast<int>(v);
    } else if (key == "study.dt_list") {
        std::vector<double> list;
        for (const auto& p : split(value, ',')) {
            const double v = parse_number(key, p);
            if (!(v > 0.0))
                bad_value(key, value, "time steps must be positive");
            list.push_back(v);
        }
        cfg.dt_list = std::move(list);
    } else if (key == "study.reference_dt") {
        const double v = parse_number(key, value);
        if (!(v > 0.0))
            bad_value(key, value, "reference dt must be positive");
        cfg.reference_dt = v;
    } else if (key == "study.mesh_list") {
        std::vector<int> list;
        for (const auto& p : split(value, ',')) {
            const long long v = parse_int(key, p);
            if (v < 1 || v > 4096)
                bad_value(key, value, "mesh sizes must be in 1..4096");
            list.push_back(static_cast<int>(v));
        }
        cfg.mesh_list = std::move(list);
    } else if (key == "study.reference_mesh") {
        const long long v = parse_int(key, value);
        if (v < 1 || v > 8192)
            bad_value(key, value, "expected 1..8192");
        cfg.reference_mesh = static_cast<int>(v);
    } else if (key == "study.spatial_dt") {
        const double v = parse_number(key, value);
        if (!(v > 0.0))
            bad_value(key, value, "spatial_dt must be positive");
        cfg.spatial_dt = v;
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

} // namespace

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config: override '" + assignment + "' is not of the form key=value");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    if (key.empty())
        throw ConfigError("config: override '" + assignment + "' has an empty key");
    assign(cfg, key, value);
}

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides,
                            const std::string& origin, const std::uint64_t* env_seed) {
    RunConfig cfg;
    if (env_seed)
        cfg.seed = *env_seed;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << "config: " << origin << ":" << line_no << ": expected key = value";
            throw ConfigError(msg.str());
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            std::ostringstream msg;
            msg << "config: " << origin << ":" << line_no << ": empty key";
            throw ConfigError(msg.str());
        }
        try {
            assign(cfg, key, value);
        } catch (const ConfigError& e) {
            std::ostringstream msg;
            msg << origin << ":" << line_no << ": " << e.what();
            throw ConfigError(msg.str());
        }
    }

    for (const auto& o : overrides)
        apply_override(cfg, o);
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& file, const std::vector<std::string>& overrides,
                       const std::uint64_t* env_seed) {
    std::string text;
    if (!file.empty()) {
        std::ifstream in(file, std::ios::binary);
        if (!in)
            throw IoError("config: cannot read " + file.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    return parse_config_text(text, overrides, file.empty() ? "<defaults>" : file.string(),
                             env_seed);
}

std::string RunConfig::echo() const {
    std::ostringstream out;
    out << "command = " << command << '\n';
    out << "out_dir = " << out_dir.string() << '\n';
    out << "workers = " << workers << '\n';
    out << "seed = " << seed << '\n';
    out << "dump_matrices = " << (dump_matrices ? "true" : "false") << '\n';

    out << "problem.l1 = " << format_double(problem.l1) << '\n';
    out << "problem.l2 = " << format_double(problem.l2) << '\n';
    out << "problem.t_final = " << format_double(problem.t_final) << '\n';
    const DiffusionTensor& d = problem.diffusion;
    out << "problem.diffusion = " << format_double(d.d11) << ',' << format_double(d.d12) << ','
        << format_double(d.d21) << ',' << format_double(d.d22) << '\n';
    switch (problem.advection.kind) {
    case AdvectionKind::none:
        out << "problem.advection = none\n";
        break;
    case AdvectionKind::constant:
        out << "problem.advection = constant:" << format_double(problem.advection.qx) << ','
            << format_double(problem.advection.qy) << '\n';
        break;
    case AdvectionKind::cellular:
        out << "problem.advection = cellular:" << format_double(problem.advection.magnitude)
            << '\n';
        break;
    }
    out << "problem.x0 = "
        << (problem.initial.kind == InitialKind::constant ? "constant:" : "cosine:")
        << format_double(problem.initial.value) << '\n';
    out << "problem.garding_shift = ";
    if (problem.garding_shift < 0.0)
        out << "auto\n";
    else
        out << format_double(problem.garding_shift) << '\n';

    out << "phi = ";
    const auto coeffs = problem.drift.coefficients();
    for (size_t i = 0; i < coeffs.size(); ++i)
        out << (i ? "," : "") << format_double(coeffs[i]);
    out << '\n';

    out << "bc.dirichlet = ";
    const BoundarySpec& bc = problem.boundary;
    if (!bc.any_dirichlet()) {
        out << "none";
    } else {
        bool first = true;
        const char* names[4] = {"xmin", "xmax", "ymin", "ymax"};
        for (int s = 0; s < 4; ++s)
            if (bc.dirichlet_sides[static_cast<size_t>(s)]) {
                out << (first ? "" : ",") << names[s];
                first = false;
            }
    }
    out << '\n';
    out << "bc.value = " << format_double(bc.dirichlet_value) << '\n';
    out << "bc.robin_alpha0 = " << format_double(bc.robin_alpha0) << '\n';

    out << "mesh.nx = " << nx << '\n';
    out << "mesh.ny = " << ny << '\n';

    out << "noise.enabled = " << (noise_enabled ? "true" : "false") << '\n';
    out << "noise.beta = " << format_double(noise_beta) << '\n';
    out << "noise.delta = " << format_double(noise_delta) << '\n';
    out << "noise.modes = " << noise_modes << '\n';

    out << "scheme = " << scheme << '\n';
    out << "dt = " << format_double(dt) << '\n';
    out << "newton.tol = " << format_double(newton_tol) << '\n';
    out << "newton.max_iter = " << newton_max_iter << '\n';
    out << "linear.method = "
        << (linear.method == SolveSettings::Method::direct_lu ? "direct_lu"
                                                              : "krylov_nonsymmetric")
        << '\n';
    out << "linear.tol = " << format_double(linear.rel_tol) << '\n';
    out << "linear.max_iter = " << linear.max_iterations << '\n';

    out << "study.samples = " << samples << '\n';
    out << "study.dt_list = ";
    for (size_t i = 0; i < dt_list.size(); ++i)
        out << (i ? "," : "") << format_double(dt_list[i]);
    out << '\n';
    out << "study.reference_dt = " << format_double(reference_dt) << '\n';
    out << "study.mesh_list = ";
    for (size_t i = 0; i < mesh_list.size(); ++i)
        out << (i ? "," : "") << mesh_list[i];
    out << '\n';
    out << "study.reference_mesh = " << reference_mesh << '\n';
    out << "study.spatial_dt = " << format_double(spatial_dt) << '\n';
    return out.str();
}

ValidationReport validate(const RunConfig& cfg) {
    ValidationReport report;
    auto add = [&report](const std::string& name, bool ok, const std::string& detail) {
        report.entries.push_back({name, ok, detail});
    };

    // Drift admissibility.
    const auto why = assert_admissible(cfg.problem.drift);
    add("drift polynomial admissible (odd degree, negative leading coefficient)", !why,
        why ? *why : "ok");

    double shift = 0.0;
    bool assembled_ok = false;
    std::string assemble_detail;
    CoercivityReport coercivity;
    if (!why) {
        try {
            const AssembledProblem assembled = assemble_problem(cfg.problem, cfg.nx, cfg.ny);
            shift = assembled.applied_shift;
            coercivity = assembled.coercivity;
            assembled_ok = true;
        } catch (const std::exception& e) {
            assemble_detail = e.what();
        }
    } else {
        assemble_detail = "skipped: drift polynomial is not admissible";
    }

    {
        std::ostringstream detail;
        if (assembled_ok) {
            detail << "lambda_min(sym) = " << format_double(coercivity.lambda_min_sym)
                   << ", applied shift = " << format_double(shift)
                   << (coercivity.converged ? "" : " (diagnostic did not converge)");
        } else {
            detail << assemble_detail;
        }
        add("operator coercivity after zero-order shift", assembled_ok && coercivity.converged,
            detail.str());
    }
    report.applied_shift = shift;

    // One-sided bound of the effective drift vs the configured time step.
    double max_dt = cfg.dt;
    if (cfg.command == "temporal-study")
        max_dt = cfg.dt_list.empty()
                     ? cfg.dt
                     : *std::max_element(cfg.dt_list.begin(), cfg.dt_list.end());
    else if (cfg.command == "spatial-study")
        max_dt = cfg.spatial_dt;
    if (!why) {
        const DriftPolynomial effective = cfg.problem.drift.with_compensation(shift);
        const double l0 = one_sided_constant_estimate(effective, 20000, 0x57454c4cu);
        report.one_sided_constant = l0;
        std::ostringstream detail;
        detail << "L0 = " << format_double(l0) << ", dt = " << format_double(max_dt)
               << ", dt*L0 = " << format_double(max_dt * std::max(l0, 0.0));
        add("one-sided drift bound allows the time step (dt*L0 < 1)",
            max_dt * std::max(l0, 0.0) < 1.0, detail.str());
    } else {
        add("one-sided drift bound allows the time step (dt*L0 < 1)", false,
            "skipped: drift polynomial is not admissible");
    }

    // Covariance trace.
    try {
        const NoiseSpec spec = build_spectrum(cfg.noise_beta, cfg.noise_delta, cfg.noise_modes,
                                              cfg.noise_modes, cfg.problem.l1, cfg.problem.l2);
        report.trace_check = spec.trace_check;
        std::ostringstream detail;
        detail << "trace_check = " << format_double(spec.trace_check) << " at " << cfg.noise_modes
               << " modes";
        add("noise covariance trace is finite", std::isfinite(spec.trace_check), detail.str());
    } catch (const std::exception& e) {
        add("noise covariance trace is finite", false, e.what());
    }

    report.all_ok = std::all_of(report.entries.begin(), report.entries.end(),
                                [](const ValidationEntry& e) { return e.ok; });
    return report;
}

} // namespace spde
