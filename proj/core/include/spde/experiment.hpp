#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spde/noise.hpp"
#include "spde/problem.hpp"
#include "spde/stepper.hpp"

namespace spde {

// Convergence study description. Temporal studies vary dt on one mesh against a
// finer reference dt; spatial studies vary the mesh at fixed dt against a finer
// reference mesh. Errors are discrete L2 distances at the final time between
// the coupled coarse and reference solutions, averaged over samples in the
// root-mean-square sense.
struct StudyConfig {
    ProblemSpec problem;
    bool noise_enabled = true;
    double noise_beta = 2.0;
    double noise_delta = 0.001;
    int noise_modes = 64;

    int samples = 50;
    std::uint64_t master_seed = 12345;
    int workers = 1;

    // Temporal study: scheme steps of every entry of dt_list are aggregations
    // of reference_dt steps on the mesh nx x ny.
    std::vector<double> dt_list;
    double reference_dt = 0.0;
    int nx = 32;
    int ny = 32;

    // Spatial study: square meshes from mesh_list against reference_mesh, all
    // at time step spatial_dt.
    std::vector<int> mesh_list;
    int reference_mesh = 0;
    double spatial_dt = 1e-4;

    std::vector<Scheme> schemes{Scheme::implicit, Scheme::semi_implicit};
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    SolveSettings linear{};

    // Carried verbatim into report.txt so a report names its exact inputs.
    std::string config_echo;
};

struct StudyPoint {
    double resolution = 0.0; // dt or h
    double rms_error = 0.0;
    double sample_stddev = 0.0;
};

struct SchemeReport {
    Scheme scheme = Scheme::implicit;
    std::vector<StudyPoint> points;
    // Least-squares slope/constant of log error vs log resolution; NaN when the
    // study has a single point and no fit is defined.
    double fitted_order = 0.0;
    double fitted_constant = 0.0;
};

struct ConvergenceReport {
    std::string kind; // "temporal" | "spatial"
    std::vector<SchemeReport> schemes;
    int samples = 0;
    std::uint64_t master_seed = 0;
    double applied_shift = 0.0;
    double wall_seconds = 0.0;
    std::string config_echo;
};

// Least-squares fit of log(error) = order * log(resolution) + log(constant).
// Throws ConfigError for fewer than two points, NumericalError for
// non-positive coordinates (log undefined).
std::pair<double, double> fit_order(std::span<const std::pair<double, double>> points);

ConvergenceReport run_temporal_study(const StudyConfig& config);
ConvergenceReport run_spatial_study(const StudyConfig& config);

// Write errors.csv, report.txt and convergence.svg into out_dir. The CSV
// contains only sample-count-and-seed-reproducible numbers (no timings), so
// reruns with different worker counts emit identical bytes.
void emit_report(const ConvergenceReport& report, const std::filesystem::path& out_dir);

// Shortest round-trip decimal form of a double (std::to_chars).
std::string format_double(double v);

} // namespace spde
