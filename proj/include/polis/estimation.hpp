#pragma once

#include <span>

#include "polis/history.hpp"
#include "polis/hyper_policy.hpp"

namespace polis {

struct EstimatorConfig {
    long alpha = 500;   // steps behind
    long beta = 50;     // steps ahead
    double gamma = 1.0; // future discount
    double omega = 1.0; // exponential weighting of old samples

    void validate() const;
};

// C_omega = (1 - w^a)/(1 - w) for w < 1, else a.
double c_omega(double omega, long alpha);
// C_gamma(xi) = (1 - g^xi)/(1 - g) for g < 1, else xi.
double c_gamma(double gamma, long xi);

// Shared per-retrain tables: window/future mean vectors under the current
// hyper-policy and the per-sample MIS log-numerator/denominator. Building
// throws DegeneracyError when a denominator falls below exp(-700).
struct MisTables {
    long T = 0;
    long alpha = 0, beta = 0;
    double gamma = 1.0, omega = 1.0;
    int d_theta = 0;
    std::vector<long> win_times, fut_times;
    Vec mu_win, mu_fut;  // row-major [index][dim]
    Vec sigma;
    Vec inv_sigma;
    double log_norm = 0.0;  // shared Gaussian normalizer: sum(-log sigma) - d log sqrt(2 pi)
    Vec log_w;    // log omega^{T-t_k} per window index
    Vec log_g;    // log gamma^{s-T-1} per future index
    Vec log_den;  // per sample: LSE_k(log_w + log nu(theta_i|t_k))
    Vec log_num;  // per sample: LSE_s(log_g + log nu(theta_i|s))
    // Cached quadratic parts of log nu(theta_i|.), row-major per sample; the
    // full log-density is log_norm + quad. Filled when with_densities.
    Vec quad_den;  // alpha x alpha
    Vec quad_fut;  // alpha x beta

    // -0.5 sum(((theta-mu)/sigma)^2)
    double quad(std::span<const double> theta, std::span<const double> mu) const {
        double s = 0.0;
        for (int m = 0; m < d_theta; ++m) {
            double z = (theta[m] - mu[m]) * inv_sigma[m];
            s += z * z;
        }
        return -0.5 * s;
    }

    std::span<const double> win_mean(size_t k) const {
        return {mu_win.data() + k * d_theta, static_cast<size_t>(d_theta)};
    }
    std::span<const double> fut_mean(size_t j) const {
        return {mu_fut.data() + j * d_theta, static_cast<size_t>(d_theta)};
    }
};

MisTables build_mis_tables(const HistoryView& view, const GaussianHyperPolicy& hp,
                           const EstimatorConfig& cfg, bool with_future = true,
                           bool with_densities = true);

// MIS estimate of the s-step ahead expected reward (Eq. of the history-based
// balance heuristic with exponential down-weighting).
double step_ahead_reward(const HistoryView& view, const GaussianHyperPolicy& hp,
                         const EstimatorConfig& cfg, long s);

// beta-step ahead expected return estimate, single-pass form.
double future_return(const HistoryView& view, const GaussianHyperPolicy& hp,
                     const EstimatorConfig& cfg);
double future_return_from_tables(const HistoryView& view, const MisTables& tables);

// alpha-step behind expected return; plain weighted average, no importance
// weights. Note the definition discounts old rewards *less* when gamma < 1.
double past_return(const HistoryView& view, const EstimatorConfig& cfg);

// J-bar = future + past.
double combined_objective(const HistoryView& view, const GaussianHyperPolicy& hp,
                          const EstimatorConfig& cfg);

struct BiasBoundInputs {
    double env_lipschitz = 0.0;    // L_M
    double policy_lipschitz = 0.0; // L_nu
    double reward_bound = 0.0;     // R_max
};

// Loose bias bound (omega < 1, gamma < 1 required).
double bias_bound(const BiasBoundInputs& in, const EstimatorConfig& cfg);
// Tight bias bound, valid for 0 < omega <= 1 (gamma < 1 required); at
// omega = 1 the limit expression (alpha-1)/2 + 1/(1-gamma) applies.
double bias_bound_tight(const BiasBoundInputs& in, const EstimatorConfig& cfg);

}  // namespace polis
