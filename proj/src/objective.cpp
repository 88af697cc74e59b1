#include "polis/objective.hpp"

#include <algorithm>
#include <cmath>

namespace polis {

void SurrogateConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (n_replays < 1) throw ConfigError("n_replays must be >= 1");
}

Vec GradientParts::total() const {
    size_t n = std::max({future.size(), past.size(), penalty.size()});
    Vec out(n, 0.0);
    for (size_t i = 0; i < future.size(); ++i) out[i] += future[i];
    for (size_t i = 0; i < past.size(); ++i) out[i] += past[i];
    for (size_t i = 0; i < penalty.size(); ++i) out[i] += penalty[i];
    return out;
}

Vec FutureGrad::total() const {
    Vec out = pathwise;
    for (size_t i = 0; i < out.size(); ++i) out[i] += score[i];
    return out;
}

namespace {

std::span<const HistoryRecord> window_of(const HistoryView& view, long alpha) {
    return view.records.subspan(view.size() - static_cast<size_t>(alpha));
}

// d log nu / d log sigma_m at a cached mean.
inline double sigma_score(double theta, double mu, double sigma) {
    double z = (theta - mu) / sigma;
    return z * z - 1.0;
}

struct FutureGradScratch {
    Vec cot_win_path, cot_fut_path, cot_win_score;
    Vec gsig_path, gsig_score;
};

FutureGrad grad_future_impl(const HistoryView& view, const GaussianHyperPolicy& hp,
                            const MisTables& tb) {
    const long A = tb.alpha, Bn = tb.beta;
    const int d = tb.d_theta;
    const int dm = hp.mean_function().param_count();
    const bool learn = hp.learn_sigma();
    auto win = window_of(view, A);

    FutureGrad out;
    out.pathwise.assign(hp.param_dim(), 0.0);
    out.score.assign(hp.param_dim(), 0.0);

    Vec cot_win_path(static_cast<size_t>(A) * d, 0.0);
    Vec cot_fut_path(static_cast<size_t>(Bn) * d, 0.0);
    Vec cot_win_score(static_cast<size_t>(A) * d, 0.0);
    Vec gsig_path(learn ? d : 0, 0.0), gsig_score(learn ? d : 0, 0.0);

    for (long i = 0; i < A; ++i) {
        const auto& rec = win[static_cast<size_t>(i)];
        const double* qden = tb.quad_den.data() + static_cast<size_t>(i) * A;
        const double* qfut = tb.quad_fut.data() + static_cast<size_t>(i) * Bn;

        const double c = rec.reward * std::exp(tb.log_w[i] + tb.log_num[i] - tb.log_den[i]);
        out.j_future += c;
        if (c == 0.0) continue;

        for (long j = 0; j < Bn; ++j) {
            const double w =
                c * std::exp(tb.log_g[j] + tb.log_norm + qfut[j] - tb.log_num[i]);
            if (w == 0.0) continue;
            auto mu = tb.fut_mean(j);
            for (int m = 0; m < d; ++m) {
                cot_fut_path[static_cast<size_t>(j) * d + m] +=
                    w * (rec.theta[m] - mu[m]) / (tb.sigma[m] * tb.sigma[m]);
                if (learn) gsig_path[m] += w * sigma_score(rec.theta[m], mu[m], tb.sigma[m]);
            }
        }
        for (long k = 0; k < A; ++k) {
            const double w =
                c * std::exp(tb.log_w[k] + tb.log_norm + qden[k] - tb.log_den[i]);
            if (w == 0.0) continue;
            auto mu = tb.win_mean(k);
            for (int m = 0; m < d; ++m) {
                cot_win_path[static_cast<size_t>(k) * d + m] -=
                    w * (rec.theta[m] - mu[m]) / (tb.sigma[m] * tb.sigma[m]);
                if (learn) gsig_path[m] -= w * sigma_score(rec.theta[m], mu[m], tb.sigma[m]);
            }
        }
        {
            auto mu = tb.win_mean(i);
            for (int m = 0; m < d; ++m) {
                cot_win_score[static_cast<size_t>(i) * d + m] +=
                    c * (rec.theta[m] - mu[m]) / (tb.sigma[m] * tb.sigma[m]);
                if (learn) gsig_score[m] += c * sigma_score(rec.theta[m], mu[m], tb.sigma[m]);
            }
        }
    }

    auto mean_grad = [&](Vec& g) { return std::span<double>(g.data(), static_cast<size_t>(dm)); };
    for (long k = 0; k < A; ++k) {
        std::span<const double> cw{cot_win_path.data() + static_cast<size_t>(k) * d,
                                   static_cast<size_t>(d)};
        hp.mean_function().vjp_accum(hp.mean_params(), tb.win_times[k], cw,
                                     mean_grad(out.pathwise));
        std::span<const double> cs{cot_win_score.data() + static_cast<size_t>(k) * d,
                                   static_cast<size_t>(d)};
        hp.mean_function().vjp_accum(hp.mean_params(), tb.win_times[k], cs,
                                     mean_grad(out.score));
    }
    for (long j = 0; j < Bn; ++j) {
        std::span<const double> cf{cot_fut_path.data() + static_cast<size_t>(j) * d,
                                   static_cast<size_t>(d)};
        hp.mean_function().vjp_accum(hp.mean_params(), tb.fut_times[j], cf,
                                     mean_grad(out.pathwise));
    }
    if (learn) {
        for (int m = 0; m < d; ++m) {
            out.pathwise[dm + m] = gsig_path[m];
            out.score[dm + m] = gsig_score[m];
        }
    }
    return out;
}

PenaltyGrad grad_penalty_impl(const GaussianHyperPolicy& hp, const MisTables& tb,
                              const EstimatorConfig& cfg, const SurrogateConfig& scfg) {
    const long A = tb.alpha, Bn = tb.beta;
    const int d = tb.d_theta;
    const int dm = hp.mean_function().param_count();
    const bool learn = hp.learn_sigma();

    PenaltyGrad out;
    out.grad.assign(hp.param_dim(), 0.0);

    // q_{jk} = sum_m (mu_m(s_j) - mu_m(t_k))^2 / sigma_m^2, capped like the
    // pairwise table so the bound stays ordered under overflow.
    Vec q(static_cast<size_t>(Bn) * A);
    for (long j = 0; j < Bn; ++j) {
        auto ms = tb.fut_mean(j);
        for (long k = 0; k < A; ++k) {
            auto mt = tb.win_mean(k);
            double acc = 0.0;
            for (int m = 0; m < d; ++m) {
                double diff = ms[m] - mt[m];
                acc += diff * diff / (tb.sigma[m] * tb.sigma[m]);
            }
            if (acc > kLogDivergenceCap) {
                acc = kLogDivergenceCap;
                out.clipped = true;
            }
            q[static_cast<size_t>(j) * A + k] = acc;
        }
    }

    // log v_j = LSE_k(log w_k - q_jk); log S = LSE_j(log g_j - 0.5 log v_j).
    Vec log_v(Bn);
    Vec terms(A);
    for (long j = 0; j < Bn; ++j) {
        for (long k = 0; k < A; ++k) terms[k] = tb.log_w[k] - q[static_cast<size_t>(j) * A + k];
        log_v[j] = log_sum_exp(terms);
    }
    Vec sterm(Bn);
    for (long j = 0; j < Bn; ++j) sterm[j] = tb.log_g[j] - 0.5 * log_v[j];
    const double log_S = log_sum_exp(sterm);
    const double log_B = 2.0 * log_S;
    out.B = std::exp(log_B);
    const double cw = c_omega(cfg.omega, cfg.alpha);
    const double cgb = c_gamma(cfg.gamma, cfg.beta);
    out.d2_bound = out.B * cw / (cgb * cgb);

    const double ca = c_gamma(cfg.gamma, cfg.alpha);
    const double root2[2] = {2.0 * std::log(ca), std::log(cw) + log_B};
    const double log_root = 0.5 * log_sum_exp(root2);  // log sqrt(C_a^2 + C_w B)
    out.penalty_value = scfg.lambda * std::exp(log_root);

    if (scfg.lambda == 0.0) return out;

    // Per-pair ascent coefficient, assembled fully in log space:
    //   lambda C_w / (2 sqrt(.)) * S g_j v_j^{-3/2} w_k e^{-q}
    const double log_base = std::log(scfg.lambda) + std::log(cw) - std::log(2.0) - log_root + log_S;
    Vec cot_fut(static_cast<size_t>(Bn) * d, 0.0), cot_win(static_cast<size_t>(A) * d, 0.0);
    Vec gsig(learn ? d : 0, 0.0);
    for (long j = 0; j < Bn; ++j) {
        auto ms = tb.fut_mean(j);
        const double lj = log_base + tb.log_g[j] - 1.5 * log_v[j];
        for (long k = 0; k < A; ++k) {
            double lc = lj + tb.log_w[k] - q[static_cast<size_t>(j) * A + k];
            if (lc > 690.0) {
                lc = 690.0;
                out.clipped = true;
            }
            const double coeff = std::exp(lc);
            if (coeff == 0.0) continue;
            auto mt = tb.win_mean(k);
            for (int m = 0; m < d; ++m) {
                const double diff = ms[m] - mt[m];
                const double g = coeff * 2.0 * diff / (tb.sigma[m] * tb.sigma[m]);
                cot_fut[static_cast<size_t>(j) * d + m] -= g;
                cot_win[static_cast<size_t>(k) * d + m] += g;
                if (learn) gsig[m] += coeff * 2.0 * diff * diff / (tb.sigma[m] * tb.sigma[m]);
            }
        }
    }
    std::span<double> gmean{out.grad.data(), static_cast<size_t>(dm)};
    for (long j = 0; j < Bn; ++j)
        hp.mean_function().vjp_accum(hp.mean_params(), tb.fut_times[j],
                                     {cot_fut.data() + static_cast<size_t>(j) * d,
                                      static_cast<size_t>(d)},
                                     gmean);
    for (long k = 0; k < A; ++k)
        hp.mean_function().vjp_accum(hp.mean_params(), tb.win_times[k],
                                     {cot_win.data() + static_cast<size_t>(k) * d,
                                      static_cast<size_t>(d)},
                                     gmean);
    if (learn)
        for (int m = 0; m < d; ++m) out.grad[dm + m] = gsig[m];

    const double n = norm2(out.grad);
    if (!std::isfinite(n) || n > kGradClipNorm) {
        out.clipped = true;
        if (std::isfinite(n) && n > 0.0) {
            for (double& g : out.grad) g *= kGradClipNorm / n;
        } else {
            for (double& g : out.grad)
                g = std::isfinite(g) ? std::clamp(g, -kGradClipNorm, kGradClipNorm) : 0.0;
        }
    }
    return out;
}

PastGrad grad_past_replay_impl(const NonStationaryEnv& env, const GaussianHyperPolicy& hp,
                               const MisTables& tb, const EstimatorConfig& cfg, int n_replays,
                               Rng& rng) {
    const long A = tb.alpha;
    const int d = tb.d_theta;
    const int dm = hp.mean_function().param_count();
    const bool learn = hp.learn_sigma();
    const long from = tb.T - A + 1, to = tb.T;
    const double cw = c_omega(cfg.omega, cfg.alpha);

    // Per-replay seeds drawn up front so replays are order-independent.
    std::vector<std::uint64_t> seeds(n_replays);
    for (auto& s : seeds) s = rng();

    Vec zs(static_cast<size_t>(n_replays) * A * d);
    Vec rewards(static_cast<size_t>(n_replays) * A);
    Vec theta_buf(d);
    for (int r = 0; r < n_replays; ++r) {
        Rng rr(seeds[static_cast<size_t>(r)]);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto provider = [&](long t, std::span<double> theta) {
            const long i = t - from;
            auto mu = tb.win_mean(static_cast<size_t>(i));
            for (int m = 0; m < d; ++m) {
                const double z = normal(rr);
                zs[(static_cast<size_t>(r) * A + i) * d + m] = z;
                theta[m] = mu[m] + tb.sigma[m] * z;
            }
        };
        Vec rs = env.replay(from, to, provider, rr);
        std::copy(rs.begin(), rs.end(), rewards.begin() + static_cast<size_t>(r) * A);
    }

    PastGrad out;
    out.grad.assign(hp.param_dim(), 0.0);
    {
        auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
        out.reward_spread = *hi - *lo;
    }
    Vec cot(static_cast<size_t>(A) * d, 0.0);
    Vec gsig(learn ? d : 0, 0.0);
    const double denom = n_replays > 1 ? static_cast<double>(n_replays - 1)
                                       : 1.0;  // leave-one-out correction
    for (long i = 0; i < A; ++i) {
        double baseline = 0.0;
        if (n_replays > 1) {
            for (int r = 0; r < n_replays; ++r)
                baseline += rewards[static_cast<size_t>(r) * A + i];
            baseline /= static_cast<double>(n_replays);
        }
        const double w = std::exp(tb.log_w[i]) *
                         std::pow(cfg.gamma, static_cast<double>(i)) / cw;
        out.replay_j += w * (n_replays > 1
                                 ? baseline
                                 : rewards[static_cast<size_t>(i)]);
        for (int r = 0; r < n_replays; ++r) {
            const double coef =
                w * (rewards[static_cast<size_t>(r) * A + i] - baseline) / denom;
            if (coef == 0.0) continue;
            for (int m = 0; m < d; ++m) {
                const double z = zs[(static_cast<size_t>(r) * A + i) * d + m];
                cot[static_cast<size_t>(i) * d + m] += coef * z / tb.sigma[m];
                if (learn) gsig[m] += coef * (z * z - 1.0);
            }
        }
    }
    std::span<double> gmean{out.grad.data(), static_cast<size_t>(dm)};
    for (long i = 0; i < A; ++i)
        hp.mean_function().vjp_accum(hp.mean_params(), tb.win_times[i],
                                     {cot.data() + static_cast<size_t>(i) * d,
                                      static_cast<size_t>(d)},
                                     gmean);
    if (learn)
        for (int m = 0; m < d; ++m) out.grad[dm + m] = gsig[m];
    return out;
}

}  // namespace

FutureGrad grad_future(const HistoryView& view, const GaussianHyperPolicy& hp,
                       const EstimatorConfig& cfg) {
    MisTables tb = build_mis_tables(view, hp, cfg, true);
    return grad_future_impl(view, hp, tb);
}

PastGrad grad_past_replay(const NonStationaryEnv& env, const HistoryView& view,
                          const GaussianHyperPolicy& hp, const EstimatorConfig& cfg,
                          int n_replays, Rng& rng) {
    if (n_replays < 1) throw ConfigError("n_replays must be >= 1");
    MisTables tb = build_mis_tables(view, hp, cfg, false, false);
    return grad_past_replay_impl(env, hp, tb, cfg, n_replays, rng);
}

PenaltyGrad grad_penalty(const HistoryView& view, const GaussianHyperPolicy& hp,
                         const EstimatorConfig& cfg, const SurrogateConfig& scfg) {
    scfg.validate();
    MisTables tb = build_mis_tables(view, hp, cfg, true, false);
    return grad_penalty_impl(hp, tb, cfg, scfg);
}

double surrogate(const HistoryView& view, const GaussianHyperPolicy& hp,
                 const EstimatorConfig& cfg, const SurrogateConfig& scfg) {
    scfg.validate();
    MisTables tb = build_mis_tables(view, hp, cfg, true, true);
    const double j_hat = future_return_from_tables(view, tb);
    const double j_check = past_return(view, cfg);
    PenaltyGrad pg = grad_penalty_impl(hp, tb, cfg, scfg);
    return j_hat + j_check - pg.penalty_value;
}

bool rmsprop_step(RmspropState& state, Vec& rho, std::span<const double> grad) {
    if (rho.size() != state.acc.size() || grad.size() != rho.size())
        throw ConfigError("optimizer state, parameters and gradient sizes disagree");
    if (!all_finite(grad)) return false;
    for (size_t i = 0; i < rho.size(); ++i) {
        state.acc[i] = state.decay * state.acc[i] + (1.0 - state.decay) * grad[i] * grad[i];
        rho[i] += state.lr * grad[i] / std::sqrt(state.acc[i] + state.eps);
    }
    return true;
}

EpochEval evaluate_epoch(const NonStationaryEnv* env, const HistoryView& view,
                         const GaussianHyperPolicy& hp, const EstimatorConfig& cfg,
                         const SurrogateConfig& scfg, Rng& replay_rng, bool use_future) {
    scfg.validate();
    EpochEval ev;
    ev.j_past = past_return(view, cfg);
    const bool need_penalty = scfg.lambda != 0.0;
    const bool with_future = use_future || need_penalty;

    MisTables tb = build_mis_tables(view, hp, cfg, with_future, use_future);
    if (use_future) {
        FutureGrad fg = grad_future_impl(view, hp, tb);
        ev.j_future = fg.j_future;
        ev.grads.future = fg.total();
    } else {
        ev.grads.future.assign(hp.param_dim(), 0.0);
    }
    if (need_penalty) {
        PenaltyGrad pg = grad_penalty_impl(hp, tb, cfg, scfg);
        ev.B = pg.B;
        ev.d2_bound = pg.d2_bound;
        ev.penalty_value = pg.penalty_value;
        ev.penalty_clipped = pg.clipped;
        ev.grads.penalty = std::move(pg.grad);
    } else {
        ev.grads.penalty.assign(hp.param_dim(), 0.0);
    }
    if (env != nullptr) {
        PastGrad pg = grad_past_replay_impl(*env, hp, tb, cfg, scfg.n_replays, replay_rng);
        ev.replay_j = pg.replay_j;
        ev.replay_reward_spread = pg.reward_spread;
        ev.grads.past = std::move(pg.grad);
    } else {
        ev.grads.past.assign(hp.param_dim(), 0.0);
    }
    ev.surrogate_value = (use_future ? ev.j_future : 0.0) + ev.j_past - ev.penalty_value;
    return ev;
}

}  // namespace polis
