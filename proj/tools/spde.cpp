#include <charconv>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spde/config.hpp"
#include "spde/errors.hpp"

namespace {

// Lowest-priority seed source; flags and config files override it.
bool env_seed(std::uint64_t& seed) {
    const char* raw = std::getenv("SPDE_SEED");
    if (!raw || !*raw)
        return false;
    const std::string s(raw);
    auto r = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw spde::ConfigError("SPDE_SEED must be a non-negative integer, got '" + s + "'");
    return true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite element solver and convergence harness for semilinear "
                 "stochastic heat equations with polynomial reaction terms"};
    app.require_subcommand(0, 1);

    std::string config_file;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out_dir;

    app.add_option("-c,--config", config_file, "INI config file");
    app.add_option("-D,--set", sets, "Override a config key, e.g. --set dt=1/64")
        ->take_all();
    auto* seed_opt = app.add_option("-s,--seed", seed, "Master seed (overrides config)");
    auto* workers_opt = app.add_option("-w,--workers", workers, "Worker threads");
    auto* out_opt = app.add_option("-o,--out", out_dir, "Output directory");

    app.add_subcommand("solve", "Integrate one trajectory and write the terminal field");
    app.add_subcommand("temporal-study", "Strong convergence in the time step");
    app.add_subcommand("spatial-study", "Convergence in the mesh size");
    app.add_subcommand("validate", "Check model assumptions for the configured run");
    app.add_subcommand("mesh-dump", "Write mesh nodes, triangles and optionally matrices");
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        std::uint64_t env = 0;
        const bool have_env = env_seed(env);
        spde::RunConfig cfg =
            spde::parse_config(config_file, sets, have_env ? &env : nullptr);

        for (const auto* sub : app.get_subcommands())
            cfg.command = sub->get_name();
        if (seed_opt->count() > 0)
            cfg.seed = seed;
        if (workers_opt->count() > 0) {
            if (workers < 1 || workers > 1024)
                throw spde::ConfigError("--workers expects 1..1024");
            cfg.workers = workers;
        }
        if (out_opt->count() > 0)
            cfg.out_dir = out_dir;

        return spde::run_command(cfg, std::cout);
    } catch (const spde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const spde::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const spde::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
