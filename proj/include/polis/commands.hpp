#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "polis/harness.hpp"

namespace polis {

// Exit codes shared by every subcommand: 0 success, 2 configuration error,
// 3 runtime degeneracy.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDegeneracy = 3;

struct RunOptions {
    RunConfig config;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = ".";
    std::string algorithm = "polis";  // polis | stationary
    int max_workers = 0;              // 0 = hardware concurrency
};

// Executes one run per seed (bounded worker pool), then writes
// run_seed<k>.csv, aggregate.csv, diagnostics.csv and run_meta.json.
int cmd_run(const RunOptions& opt, std::ostream& log);

struct SweepOptions {
    RunConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<double> lambda_grid;
    std::vector<long> beta_grid;
    std::string out_dir = ".";
    int max_workers = 0;
};

// One row per (lambda, beta, seed): final return and reward std.
int cmd_sweep(const SweepOptions& opt, std::ostream& log);

struct BoundsBenchOptions {
    long instances = 200;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    BoundComparisonConfig comparison;  // the bandit A-trajectory experiment
    bool run_comparison = true;
};

// Random Gaussian-mixture instances: all six bounds plus the quadrature
// oracle per instance, then the A-trajectory experiment and a tightness
// ranking printed to the log.
int cmd_bounds_bench(const BoundsBenchOptions& opt, std::ostream& log);

struct BiasBoundOptions {
    EstimatorConfig estimator;
    BiasBoundInputs inputs;
};

// Prints the applicable Lemma branch(es) and their values.
int cmd_bias_bound(const BiasBoundOptions& opt, std::ostream& log);

int cmd_gen_rates(const std::string& out_path, long n, std::uint64_t seed, std::ostream& log);

// Quadrature reference for the bench: d2 of two 1-D Gaussian mixtures with a
// shared component sigma (adaptive Simpson over a +-12 sigma envelope).
double quadrature_mixture_d2(const Vec& future_means, const Vec& future_weights,
                             const Vec& past_means, const Vec& past_weights, double sigma);

}  // namespace polis
