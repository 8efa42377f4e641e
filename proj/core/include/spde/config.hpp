#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spde/experiment.hpp"
#include "spde/problem.hpp"

namespace spde {

// Resolved run description. Sources, lowest priority first: built-in defaults
// (the strong-order benchmark), the SPDE_SEED environment variable, the config
// file, --set key=value overrides, then the dedicated --seed/--workers/--out
// flags. Unknown keys are rejected, not ignored.
struct RunConfig {
    std::string command = "validate"; // solve | temporal-study | spatial-study | validate | mesh-dump
    std::filesystem::path out_dir = "out";
    int workers = 1;
    std::uint64_t seed = 12345;
    bool dump_matrices = false;

    ProblemSpec problem = benchmark_problem();
    int nx = 32;
    int ny = 32;

    bool noise_enabled = true;
    double noise_beta = 2.0;
    double noise_delta = 0.001;
    int noise_modes = 64;

    std::string scheme = "both"; // implicit | semi_implicit | both
    double dt = 0.01;
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    SolveSettings linear{};

    int samples = 50;
    std::vector<double> dt_list{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
    double reference_dt = 1.0 / 1024;
    std::vector<int> mesh_list{4, 8, 16, 32};
    int reference_mesh = 128;
    double spatial_dt = 1e-4;

    // Canonical INI serialization of every key; parsing it back reproduces this
    // config exactly (numbers are shortest round-trip decimals).
    std::string echo() const;
};

// Parse INI text: dotted lowercase keys, '=' assignments, '#' comments, blank
// lines ignored, later assignments win. Numeric values accept plain decimals
// and integer fractions like 1/1024. origin names the source in error messages.
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides,
                            const std::string& origin, const std::uint64_t* env_seed = nullptr);

// Same, reading the file first (empty path = defaults plus overrides).
RunConfig parse_config(const std::filesystem::path& file, const std::vector<std::string>& overrides,
                       const std::uint64_t* env_seed = nullptr);

// Apply one "key=value" assignment to an existing config.
void apply_override(RunConfig& cfg, const std::string& assignment);

struct ValidationEntry {
    std::string name;
    bool ok = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool all_ok = false;
    double one_sided_constant = 0.0;
    double applied_shift = 0.0;
    double trace_check = 0.0;
};

// Check the model assumptions for the configured run: drift admissibility, the
// one-sided bound vs dt, the covariance trace, and operator coercivity (with
// the shift the assembly would apply).
ValidationReport validate(const RunConfig& cfg);

// Execute cfg.command; log goes to `out`. Returns the process exit code:
// 0 on success, 2 when the validate command finds violations.
int run_command(const RunConfig& cfg, std::ostream& out);

} // namespace spde
