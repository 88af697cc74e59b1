#pragma once

#include <span>

#include "polis/mean_function.hpp"
#include "polis/rng.hpp"

#include "json.hpp"

namespace polis {

// Diagonal Gaussian log-density with explicit mean, shared by the estimator
// hot loops that cache mean tables.
double gaussian_log_density(std::span<const double> theta, std::span<const double> mu,
                            std::span<const double> sigma);

// Time-conditioned Gaussian over policy parameters: theta ~ N(mu_rho(t), diag(sigma^2)).
// sigma is time-independent; when learned it lives at the tail of rho as
// log-sigma, otherwise it is fixed at construction. Values are immutable:
// parameter updates go through with_rho().
class GaussianHyperPolicy {
public:
    GaussianHyperPolicy(MeanFunction mf, Vec rho, bool learn_sigma,
                        Vec fixed_log_sigma = {});

    int theta_dim() const { return mf_.theta_dim(); }
    int param_dim() const { return static_cast<int>(rho_.size()); }
    bool learn_sigma() const { return learn_sigma_; }
    const Vec& rho() const { return rho_; }
    const MeanFunction& mean_function() const { return mf_; }
    std::span<const double> mean_params() const {
        return {rho_.data(), static_cast<size_t>(mf_.param_count())};
    }

    Vec sigma() const;
    Vec mean(long t) const;
    void mean_into(long t, std::span<double> out) const;

    Vec sample(long t, Rng& rng) const;

    double log_density(std::span<const double> theta, long t) const;

    // d log nu(theta|t) / d rho, laid out like rho.
    Vec grad_log_density(std::span<const double> theta, long t) const;

    // exp(D_2(nu(.|s) || nu(.|t))) for the shared-sigma Gaussian pair; returns
    // +inf as the overflow sentinel when a zero-sigma dimension diverges.
    double renyi2_exp(long s, long t) const;
    // The exponent sum((mu(s)-mu(t))^2 / sigma^2); renyi2_exp == exp of this.
    double log_renyi2_exp(long s, long t) const;

    // Accumulates d<cot, mu(t)>/d rho over the mean-parameter block.
    void mean_vjp_accum(long t, std::span<const double> cot, std::span<double> grad) const;

    GaussianHyperPolicy with_rho(Vec rho) const;

    nlohmann::json to_json() const;
    static GaussianHyperPolicy from_json(const nlohmann::json& j);

private:
    MeanFunction mf_;
    Vec rho_;
    bool learn_sigma_;
    Vec fixed_log_sigma_;
};

}  // namespace polis
