#pragma once

#include <memory>

#include "polis/objective.hpp"
#include "polis/run_config.hpp"

namespace polis {

struct StepRow {
    long t = 0;
    bool target_phase = false;
    Vec theta;
    double action = 0.0;
    double reward = 0.0;
    double cum_return = 0.0;  // prefix sum of target-phase rewards
    bool retrained = false;   // a retrain ran right after this step
};

struct DiagRow {
    int retrain_index = 0;
    long t = 0;
    long epoch = 0;
    double j_past = 0.0;
    double j_future = 0.0;
    double B = 0.0;
    double penalty = 0.0;
    double grad_future_norm = 0.0;
    double grad_past_norm = 0.0;
    double grad_penalty_norm = 0.0;
    bool degenerate = false;
};

struct RunRecord {
    std::vector<StepRow> rows;
    std::vector<DiagRow> diagnostics;
    Vec final_rho;
    double final_cum_return = 0.0;
    double target_reward_std = 0.0;
    int retrains = 0;
    int skipped_retrains = 0;
};

std::unique_ptr<NonStationaryEnv> make_env(const RunConfig& cfg);

// Builds the architecture and the initial rho (mean weights from the init
// stream, log-sigma tail when learned).
GaussianHyperPolicy make_initial_hyper_policy(const RunConfig& cfg);

// Algorithm 1: behavioral period with sigma = e^{behavioral_log_sigma}, then
// the target period with a retrain after every completed block of h target
// steps (floor(target_len / h) retrains, N epochs each). Estimator degeneracy
// skips the remaining epochs of that retrain and the loop keeps acting.
RunRecord run_lifelong(const RunConfig& cfg);

// The stationary special case: constant mean function, no future term, no
// penalty; still retrained every h steps on the replay gradient of the
// alpha-step-behind return.
RunRecord run_baseline_stationary(const RunConfig& cfg);

// Appendix-B style comparison: penalty-only optimization of a sinusoidal
// hyper-policy per bound variant, tracking the scale parameter A and the log
// of the d2-scale bound.
struct BoundComparisonConfig {
    long alpha = 500;
    long beta = 50;
    double gamma = 1.0;
    double omega = 1.0;
    double lambda = 1.0;
    double log_sigma = 0.5;  // behavioral sigma e^{1/2}
    SinusoidInit init;       // A=1, phi=pi, psi=pi/2, B=0
    long steps = 2000;
    long log_every = 10;
    long T = 1000;           // fixed retrain time the mixtures are anchored at
    int direct_opt_iters = 20;
    double learning_rate = 1e-3;
};

enum class BoundMethod {
    two_steps_psi_first = 0,
    two_steps_phi_first,
    uniform_psi,
    uniform_phi,
    direct_opt_reset,
    direct_opt_no_reset,
};
inline constexpr int kNumBoundMethods = 6;
const char* bound_method_name(BoundMethod m);

struct BoundTrajectoryPoint {
    long step = 0;
    double A = 0.0;
    double log_bound = 0.0;  // log of the d2-scale bound value
};

struct BoundComparisonResult {
    std::vector<std::vector<BoundTrajectoryPoint>> trajectories;  // per method
};

BoundComparisonResult run_bound_comparison(const BoundComparisonConfig& cfg);

}  // namespace polis
