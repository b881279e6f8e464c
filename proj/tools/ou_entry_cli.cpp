#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ouentry/commands.hpp"
#include "ouentry/config.hpp"

namespace {

void apply_thread_cap() {
#ifdef _OPENMP
    if (const char* env = std::getenv("OU_ENTRY_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) omp_set_num_threads(std::min(cap, omp_get_max_threads()));
    }
#endif
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal-entry solver for storage investment under an OU spot price"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t paths = 0;
    double dt = 0.0;

    app.add_option("--config", config_path, "path to the key=value run configuration")
        ->required();
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--seed", seed, "RNG seed (overrides the config)")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--paths", paths, "Monte Carlo paths (overrides the config)");
    app.add_option("--dt", dt, "Monte Carlo time step (overrides the config)");

    auto* c_classify = app.add_subcommand("classify", "regime classification and reference points");
    auto* c_bounds = app.add_subcommand("boundaries", "control and entry boundaries as CSV");
    auto* c_surface = app.add_subcommand("value-surface", "U and V tabulated on the (x,c) grid");
    auto* c_verify = app.add_subcommand("verify", "Monte Carlo verification report");

    CLI11_PARSE(app, argc, argv);
    apply_thread_cap();

    ouentry::RunConfig cfg;
    try {
        cfg = ouentry::RunConfig::load(config_path);
    } catch (const std::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return ouentry::kExitValidation;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    if (paths > 0) cfg.mc_paths = paths;
    if (dt > 0.0) cfg.mc_dt = dt;

    if (c_classify->parsed()) return ouentry::cmd_classify(cfg, std::cout);
    if (c_bounds->parsed()) return ouentry::cmd_boundaries(cfg, std::cout);
    if (c_surface->parsed()) return ouentry::cmd_value_surface(cfg, std::cout);
    if (c_verify->parsed()) return ouentry::cmd_verify(cfg, std::cout);
    return ouentry::kExitValidation;
}
