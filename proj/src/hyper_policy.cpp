#include "polis/hyper_policy.hpp"

#include <cmath>

namespace polis {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
}

double gaussian_log_density(std::span<const double> theta, std::span<const double> mu,
                            std::span<const double> sigma) {
    double lp = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        double z = (theta[i] - mu[i]) / sigma[i];
        lp += -std::log(sigma[i]) - kLogSqrt2Pi - 0.5 * z * z;
    }
    return lp;
}

GaussianHyperPolicy::GaussianHyperPolicy(MeanFunction mf, Vec rho, bool learn_sigma,
                                         Vec fixed_log_sigma)
    : mf_(std::move(mf)),
      rho_(std::move(rho)),
      learn_sigma_(learn_sigma),
      fixed_log_sigma_(std::move(fixed_log_sigma)) {
    const size_t expect =
        static_cast<size_t>(mf_.param_count()) + (learn_sigma_ ? mf_.theta_dim() : 0);
    if (rho_.size() != expect)
        throw ConfigError("hyper-policy parameter vector has length " +
                          std::to_string(rho_.size()) + ", architecture requires " +
                          std::to_string(expect));
    if (!learn_sigma_ && fixed_log_sigma_.size() != static_cast<size_t>(mf_.theta_dim()))
        throw ConfigError("fixed log-sigma vector must have one entry per policy dimension");
    if (learn_sigma_ && !fixed_log_sigma_.empty())
        throw ConfigError("fixed log-sigma given while sigma is learned");
}

Vec GaussianHyperPolicy::sigma() const {
    const int d = theta_dim();
    Vec s(d);
    const double* ls = learn_sigma_ ? rho_.data() + mf_.param_count() : fixed_log_sigma_.data();
    for (int i = 0; i < d; ++i) s[i] = std::exp(ls[i]);
    return s;
}

void GaussianHyperPolicy::mean_into(long t, std::span<double> out) const {
    mf_.value_into(mean_params(), t, out);
}

Vec GaussianHyperPolicy::mean(long t) const {
    Vec out(theta_dim());
    mean_into(t, out);
    return out;
}

Vec GaussianHyperPolicy::sample(long t, Rng& rng) const {
    Vec theta = mean(t);
    Vec s = sigma();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < theta_dim(); ++i) theta[i] += s[i] * normal(rng);
    return theta;
}

double GaussianHyperPolicy::log_density(std::span<const double> theta, long t) const {
    if (!all_finite(theta)) throw std::domain_error("log_density: non-finite theta");
    Vec mu = mean(t);
    Vec s = sigma();
    return gaussian_log_density(theta, mu, s);
}

Vec GaussianHyperPolicy::grad_log_density(std::span<const double> theta, long t) const {
    if (!all_finite(theta)) throw std::domain_error("grad_log_density: non-finite theta");
    const int d = theta_dim();
    Vec mu = mean(t);
    Vec s = sigma();
    Vec grad(param_dim(), 0.0);
    Vec cot(d);
    for (int i = 0; i < d; ++i) cot[i] = (theta[i] - mu[i]) / (s[i] * s[i]);
    mf_.vjp_accum(mean_params(), t, cot, {grad.data(), static_cast<size_t>(mf_.param_count())});
    if (learn_sigma_) {
        for (int i = 0; i < d; ++i) {
            double z = (theta[i] - mu[i]) / s[i];
            grad[mf_.param_count() + i] = z * z - 1.0;
        }
    }
    return grad;
}

double GaussianHyperPolicy::log_renyi2_exp(long s, long t) const {
    Vec mu_s = mean(s), mu_t = mean(t);
    Vec sig = sigma();
    double q = 0.0;
    for (int i = 0; i < theta_dim(); ++i) {
        double d = mu_s[i] - mu_t[i];
        if (d == 0.0) continue;
        if (sig[i] == 0.0) return inf();
        q += d * d / (sig[i] * sig[i]);
    }
    return q;
}

double GaussianHyperPolicy::renyi2_exp(long s, long t) const {
    return std::exp(log_renyi2_exp(s, t));
}

void GaussianHyperPolicy::mean_vjp_accum(long t, std::span<const double> cot,
                                         std::span<double> grad) const {
    mf_.vjp_accum(mean_params(), t, cot, grad.subspan(0, mf_.param_count()));
}

GaussianHyperPolicy GaussianHyperPolicy::with_rho(Vec rho) const {
    return GaussianHyperPolicy(mf_, std::move(rho), learn_sigma_, fixed_log_sigma_);
}

nlohmann::json GaussianHyperPolicy::to_json() const {
    nlohmann::json j;
    j["mean_function"] = mf_.spec_json();
    j["rho"] = rho_;
    j["learn_sigma"] = learn_sigma_;
    if (!learn_sigma_) j["fixed_log_sigma"] = fixed_log_sigma_;
    return j;
}

GaussianHyperPolicy GaussianHyperPolicy::from_json(const nlohmann::json& j) {
    MeanFunction mf = MeanFunction::from_spec_json(j.at("mean_function"));
    Vec rho = j.at("rho").get<Vec>();
    bool learn = j.at("learn_sigma").get<bool>();
    Vec fixed;
    if (!learn) fixed = j.at("fixed_log_sigma").get<Vec>();
    return GaussianHyperPolicy(std::move(mf), std::move(rho), learn, std::move(fixed));
}

}  // namespace polis
