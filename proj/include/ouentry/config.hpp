#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ouentry/model.hpp"

namespace ouentry {

/// Batch-run configuration, read from a flat "key = value" text file.
/// Unknown keys are rejected so typos fail loudly.
struct RunConfig {
    ModelParams params;

    int c_grid = 201;
    double x_min = 0.0, x_max = 0.0;  // 0/0 selects mu -/+ 4 stationary sds
    int x_grid = 401;
    double tol = 1e-13;

    std::size_t mc_paths = 200000;
    double mc_dt = 1e-3;
    double mc_horizon = 0.0;  // <= 0 selects 30/lambda
    std::uint64_t seed = 0xC0FFEEULL;

    /// (x, c) probes for the verify command.
    std::vector<std::pair<double, double>> verify_probes;

    std::string out_dir = "out";

    static RunConfig from_string(const std::string& text);
    static RunConfig load(const std::string& path);

    /// Validates numeric fields; throws std::invalid_argument listing the offender.
    void validate() const;

    std::vector<double> c_grid_points() const;
    std::vector<double> x_grid_points() const;
};

}  // namespace ouentry
