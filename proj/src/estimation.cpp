#include "polis/estimation.hpp"

#include <cmath>

namespace polis {

void EstimatorConfig::validate() const {
    if (alpha < 1) throw ConfigError("alpha must be >= 1");
    if (beta < 1) throw ConfigError("beta must be >= 1");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
    if (omega < 0.0 || omega > 1.0) throw ConfigError("omega must lie in [0, 1]");
}

double c_omega(double omega, long alpha) {
    if (omega < 0.0 || omega > 1.0) throw std::domain_error("omega must lie in [0, 1]");
    if (alpha < 1) throw std::domain_error("alpha must be >= 1");
    if (omega == 1.0) return static_cast<double>(alpha);
    return (1.0 - std::pow(omega, static_cast<double>(alpha))) / (1.0 - omega);
}

double c_gamma(double gamma, long xi) {
    if (gamma < 0.0 || gamma > 1.0) throw std::domain_error("gamma must lie in [0, 1]");
    if (xi < 1) throw std::domain_error("xi must be >= 1");
    if (gamma == 1.0) return static_cast<double>(xi);
    return (1.0 - std::pow(gamma, static_cast<double>(xi))) / (1.0 - gamma);
}

namespace {

void check_window(const HistoryView& view, const EstimatorConfig& cfg) {
    cfg.validate();
    if (view.size() < static_cast<size_t>(cfg.alpha))
        throw std::out_of_range("history window holds " + std::to_string(view.size()) +
                                " records, estimator needs alpha=" + std::to_string(cfg.alpha));
}

// Last alpha records of the view.
std::span<const HistoryRecord> window_of(const HistoryView& view, long alpha) {
    return view.records.subspan(view.size() - static_cast<size_t>(alpha));
}

}  // namespace

MisTables build_mis_tables(const HistoryView& view, const GaussianHyperPolicy& hp,
                           const EstimatorConfig& cfg, bool with_future, bool with_densities) {
    check_window(view, cfg);
    auto win = window_of(view, cfg.alpha);

    MisTables tb;
    tb.T = view.T;
    tb.alpha = cfg.alpha;
    tb.beta = cfg.beta;
    tb.gamma = cfg.gamma;
    tb.omega = cfg.omega;
    tb.d_theta = hp.theta_dim();
    tb.sigma = hp.sigma();
    tb.inv_sigma.resize(tb.d_theta);
    tb.log_norm = -0.5 * tb.d_theta * std::log(2.0 * M_PI);
    for (int m = 0; m < tb.d_theta; ++m) {
        tb.inv_sigma[m] = 1.0 / tb.sigma[m];
        tb.log_norm -= std::log(tb.sigma[m]);
    }

    tb.win_times.resize(cfg.alpha);
    tb.mu_win.resize(static_cast<size_t>(cfg.alpha) * tb.d_theta);
    tb.log_w.resize(cfg.alpha);
    for (long k = 0; k < cfg.alpha; ++k) {
        long t = tb.T - cfg.alpha + 1 + k;
        tb.win_times[k] = t;
        hp.mean_into(t, {tb.mu_win.data() + static_cast<size_t>(k) * tb.d_theta,
                         static_cast<size_t>(tb.d_theta)});
        tb.log_w[k] = log_pow(cfg.omega, tb.T - t);
    }
    if (with_future) {
        tb.fut_times.resize(cfg.beta);
        tb.mu_fut.resize(static_cast<size_t>(cfg.beta) * tb.d_theta);
        tb.log_g.resize(cfg.beta);
        for (long j = 0; j < cfg.beta; ++j) {
            long s = tb.T + 1 + j;
            tb.fut_times[j] = s;
            hp.mean_into(s, {tb.mu_fut.data() + static_cast<size_t>(j) * tb.d_theta,
                             static_cast<size_t>(tb.d_theta)});
            tb.log_g[j] = log_pow(cfg.gamma, s - tb.T - 1);
        }
    }

    if (!with_densities) return tb;

    tb.log_den.resize(cfg.alpha);
    tb.quad_den.resize(static_cast<size_t>(cfg.alpha) * cfg.alpha);
    if (with_future) {
        tb.log_num.resize(cfg.alpha);
        tb.quad_fut.resize(static_cast<size_t>(cfg.alpha) * cfg.beta);
    }
    Vec den_terms(cfg.alpha), num_terms(with_future ? cfg.beta : 0);
    for (long i = 0; i < cfg.alpha; ++i) {
        const auto& rec = win[static_cast<size_t>(i)];
        for (long k = 0; k < cfg.alpha; ++k) {
            double q = tb.quad(rec.theta, tb.win_mean(k));
            tb.quad_den[static_cast<size_t>(i) * cfg.alpha + k] = q;
            den_terms[k] = tb.log_w[k] + q;
        }
        tb.log_den[i] = tb.log_norm + log_sum_exp(den_terms);
        if (tb.log_den[i] < kLogDenomFloor)
            throw DegeneracyError("MIS denominator underflowed for sample at t=" +
                                      std::to_string(rec.t),
                                  rec.t);
        if (with_future) {
            for (long j = 0; j < cfg.beta; ++j) {
                double q = tb.quad(rec.theta, tb.fut_mean(j));
                tb.quad_fut[static_cast<size_t>(i) * cfg.beta + j] = q;
                num_terms[j] = tb.log_g[j] + q;
            }
            tb.log_num[i] = tb.log_norm + log_sum_exp(num_terms);
        }
    }
    return tb;
}

double step_ahead_reward(const HistoryView& view, const GaussianHyperPolicy& hp,
                         const EstimatorConfig& cfg, long s) {
    if (s < view.T + 1 || s > view.T + cfg.beta)
        throw std::out_of_range("step-ahead time s=" + std::to_string(s) +
                                " outside [T+1, T+beta]");
    MisTables tb = build_mis_tables(view, hp, cfg, false, true);
    auto win = window_of(view, cfg.alpha);
    Vec mu_s = hp.mean(s);
    double est = 0.0;
    for (long i = 0; i < cfg.alpha; ++i) {
        const auto& rec = win[static_cast<size_t>(i)];
        double log_ratio =
            tb.log_w[i] + gaussian_log_density(rec.theta, mu_s, tb.sigma) - tb.log_den[i];
        est += std::exp(log_ratio) * rec.reward;
    }
    return est;
}

double future_return_from_tables(const HistoryView& view, const MisTables& tb) {
    auto win = window_of(view, tb.alpha);
    double est = 0.0;
    for (long i = 0; i < tb.alpha; ++i)
        est += std::exp(tb.log_w[i] + tb.log_num[i] - tb.log_den[i]) *
               win[static_cast<size_t>(i)].reward;
    return est;
}

double future_return(const HistoryView& view, const GaussianHyperPolicy& hp,
                     const EstimatorConfig& cfg) {
    MisTables tb = build_mis_tables(view, hp, cfg, true);
    return future_return_from_tables(view, tb);
}

double past_return(const HistoryView& view, const EstimatorConfig& cfg) {
    check_window(view, cfg);
    auto win = window_of(view, cfg.alpha);
    const double cw = c_omega(cfg.omega, cfg.alpha);
    double est = 0.0;
    for (long i = 0; i < cfg.alpha; ++i) {
        const auto& rec = win[static_cast<size_t>(i)];
        double w = std::pow(cfg.omega, static_cast<double>(view.T - rec.t)) *
                   std::pow(cfg.gamma, static_cast<double>(rec.t - view.T + cfg.alpha - 1));
        est += w * rec.reward;
    }
    return est / cw;
}

double combined_objective(const HistoryView& view, const GaussianHyperPolicy& hp,
                          const EstimatorConfig& cfg) {
    return future_return(view, hp, cfg) + past_return(view, cfg);
}

namespace {

double bias_scale(const BiasBoundInputs& in) {
    if (in.env_lipschitz < 0.0 || in.policy_lipschitz < 0.0 || in.reward_bound < 0.0)
        throw std::domain_error("bias bound inputs must be nonnegative");
    return in.env_lipschitz + 2.0 * in.reward_bound * in.policy_lipschitz;
}

void require_gamma_lt1(const EstimatorConfig& cfg) {
    if (cfg.gamma >= 1.0)
        throw std::domain_error("bias bound undefined for gamma = 1 (1/(1-gamma) term)");
}

}  // namespace

double bias_bound(const BiasBoundInputs& in, const EstimatorConfig& cfg) {
    cfg.validate();
    require_gamma_lt1(cfg);
    if (cfg.omega >= 1.0)
        throw std::domain_error("loose bias bound requires omega < 1 (use the tight bound)");
    return bias_scale(in) * c_gamma(cfg.gamma, cfg.beta) *
           (cfg.omega / (1.0 - cfg.omega) + 1.0 / (1.0 - cfg.gamma));
}

double bias_bound_tight(const BiasBoundInputs& in, const EstimatorConfig& cfg) {
    cfg.validate();
    require_gamma_lt1(cfg);
    if (cfg.omega <= 0.0)
        throw std::domain_error("tight bias bound requires omega in (0, 1]");
    const double cg = c_gamma(cfg.gamma, cfg.beta);
    double staleness;
    if (cfg.omega == 1.0) {
        staleness = static_cast<double>(cfg.alpha - 1) / 2.0;
    } else {
        const double w = cfg.omega;
        const double a = static_cast<double>(cfg.alpha);
        staleness = w * (1.0 - a * std::pow(w, a - 1.0) + (a - 1.0) * std::pow(w, a)) /
                    ((1.0 - w) * (1.0 - std::pow(w, a)));
    }
    return bias_scale(in) * cg * (staleness + 1.0 / (1.0 - cfg.gamma));
}

}  // namespace polis
