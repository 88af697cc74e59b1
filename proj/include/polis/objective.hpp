#pragma once

#include "polis/divergence_bounds.hpp"
#include "polis/environments.hpp"
#include "polis/estimation.hpp"

namespace polis {

struct SurrogateConfig {
    double lambda = 10.0;  // variance-penalty coefficient, sqrt((1-delta)/delta 2 R^2)
    int n_replays = 100;   // replayed trajectories per gradient step

    void validate() const;
};

// Ascent gradient split by objective term; total() is the exact sum.
struct GradientParts {
    Vec future;
    Vec past;
    Vec penalty;

    Vec total() const;
};

struct FutureGrad {
    Vec pathwise;  // d future_return / d rho with the sampled thetas frozen
    Vec score;     // sum_t r_t w^{T-t} ratio_t grad log nu(theta_t|t)
    double j_future = 0.0;

    Vec total() const;
};

// Score-function gradient of the beta-step-ahead estimate, per the
// likelihood-ratio expansion of its expectation.
FutureGrad grad_future(const HistoryView& view, const GaussianHyperPolicy& hp,
                       const EstimatorConfig& cfg);

struct PastGrad {
    Vec grad;
    double replay_j = 0.0;        // replay estimate of the past return (diagnostic)
    double reward_spread = 0.0;   // max - min replay reward; 0 means constant rewards
};

// Replay gradient of the alpha-step-behind return: fresh policy draws against
// the frozen exogenous trace, score-function weighting with a per-step mean
// baseline (leave-one-out corrected so the estimate stays unbiased).
PastGrad grad_past_replay(const NonStationaryEnv& env, const HistoryView& view,
                          const GaussianHyperPolicy& hp, const EstimatorConfig& cfg,
                          int n_replays, Rng& rng);

struct PenaltyGrad {
    Vec grad;  // ascent direction: -lambda d/d rho sqrt(C_gamma(alpha)^2 + C_omega B)
    double B = 0.0;
    double d2_bound = 1.0;
    double penalty_value = 0.0;
    bool clipped = false;
};

// Analytic gradient of the variance penalty through the Lemma-3 bound and the
// Gaussian d2 closed form; saturated divergence pairs produce a clipped
// gradient with the diagnostic flag set.
PenaltyGrad grad_penalty(const HistoryView& view, const GaussianHyperPolicy& hp,
                         const EstimatorConfig& cfg, const SurrogateConfig& scfg);

// L_lambda = J-bar - lambda sqrt(C_gamma(alpha)^2 + C_omega B).
double surrogate(const HistoryView& view, const GaussianHyperPolicy& hp,
                 const EstimatorConfig& cfg, const SurrogateConfig& scfg);

// RMSprop accumulator, ascent flavor:
//   acc <- decay acc + (1-decay) g^2;  rho <- rho + lr g / sqrt(acc + eps).
struct RmspropState {
    Vec acc;
    double lr = 1e-3;
    double decay = 0.9;
    double eps = 1e-10;

    explicit RmspropState(size_t n) : acc(n, 0.0) {}
};

// Returns false and leaves rho/state untouched when the gradient has
// non-finite entries.
bool rmsprop_step(RmspropState& state, Vec& rho, std::span<const double> grad);

// One training-epoch evaluation sharing the mean/density tables across the
// three gradient terms. env == nullptr skips the replay term; use_future off
// gives the stationary baseline's J-check-only objective.
struct EpochEval {
    double j_future = 0.0;
    double j_past = 0.0;
    double replay_j = 0.0;
    double replay_reward_spread = 0.0;
    double B = 0.0;
    double d2_bound = 1.0;
    double penalty_value = 0.0;
    double surrogate_value = 0.0;
    GradientParts grads;
    bool penalty_clipped = false;
};

EpochEval evaluate_epoch(const NonStationaryEnv* env, const HistoryView& view,
                         const GaussianHyperPolicy& hp, const EstimatorConfig& cfg,
                         const SurrogateConfig& scfg, Rng& replay_rng, bool use_future);

}  // namespace polis
