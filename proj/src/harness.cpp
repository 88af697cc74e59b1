#include "polis/harness.hpp"

#include <algorithm>
#include <cmath>

namespace polis {

namespace {

int env_theta_dim(const RunConfig& cfg) {
    if (cfg.env == "dam") return 2;
    if (cfg.env == "bandit") return 1;
    return 3;  // trading flavors: state (portfolio, rate) plus intercept
}

}  // namespace

std::unique_ptr<NonStationaryEnv> make_env(const RunConfig& cfg) {
    if (cfg.env == "vasicek") return TradingEnv::vasicek(cfg.seed);
    if (cfg.env == "trading_csv") {
        auto env = TradingEnv::from_series(load_rates_csv(cfg.rates_csv));
        long needed = cfg.behavioral_length() + cfg.target_len + 1;
        if (env->series_length() < needed)
            throw ConfigError("rates series has " + std::to_string(env->series_length()) +
                              " points, the schedule needs " + std::to_string(needed));
        return env;
    }
    if (cfg.env == "dam") {
        DamConfig dc = dam_profile_config(cfg.dam_profile);
        dc.penalize_deficit = cfg.dam_demand_penalty == "deficit";
        return std::make_unique<DamEnv>(dc, cfg.seed);
    }
    if (cfg.env == "bandit")
        return std::make_unique<SinusoidalBanditEnv>(cfg.bandit_amplitude, cfg.bandit_frequency,
                                                     cfg.bandit_noise_std, cfg.seed);
    throw ConfigError("unknown env '" + cfg.env + "'");
}

GaussianHyperPolicy make_initial_hyper_policy(const RunConfig& cfg) {
    const int d = env_theta_dim(cfg);
    MeanFunction mf = [&]() -> MeanFunction {
        if (cfg.mean_fn == "stationary") return MeanFunction(StationarySpec{d});
        if (cfg.mean_fn == "sinusoid") return MeanFunction(SinusoidSpec{d});
        TemporalConvSpec s;
        s.encoding = PositionalEncoding(cfg.tcn.enc_dim, cfg.tcn.enc_base);
        s.channels = cfg.tcn.channels;
        s.kernel = cfg.tcn.kernel;
        s.out_dim = d;
        return MeanFunction(s);
    }();
    Rng init_rng = make_rng(cfg.seed, Stream::init);
    Vec rho = mf.initial_params(init_rng);
    if (cfg.mean_fn == "sinusoid") {
        for (int i = 0; i < d; ++i) {
            rho[i] = cfg.sinusoid.A;
            rho[d + i] = cfg.sinusoid.phi;
            rho[2 * d + i] = cfg.sinusoid.psi;
            rho[3 * d + i] = cfg.sinusoid.B;
        }
    }
    if (cfg.learn_sigma) {
        rho.insert(rho.end(), d, cfg.initial_log_sigma);
        return GaussianHyperPolicy(std::move(mf), std::move(rho), true);
    }
    return GaussianHyperPolicy(std::move(mf), std::move(rho), false,
                               Vec(d, cfg.initial_log_sigma));
}

RunRecord run_lifelong(const RunConfig& cfg) {
    cfg.validate();
    auto env = make_env(cfg);
    const int d = env->theta_dim();
    if (d != env_theta_dim(cfg)) throw ConfigError("environment/policy dimension mismatch");

    GaussianHyperPolicy target = make_initial_hyper_policy(cfg);
    GaussianHyperPolicy behavioral(
        target.mean_function(),
        Vec(target.mean_params().begin(), target.mean_params().end()), false,
        Vec(d, cfg.behavioral_log_sigma));

    const long B = cfg.behavioral_length();
    const long total = B + cfg.target_len;
    const EstimatorConfig ecfg{cfg.alpha, cfg.beta, cfg.gamma, cfg.omega};
    const SurrogateConfig scfg{cfg.lambda, cfg.n_replays};

    History hist(static_cast<size_t>(cfg.alpha));
    Rng sample_rng = make_rng(cfg.seed, Stream::sampling);

    RunRecord rec;
    rec.rows.reserve(total);
    Vec target_rewards;
    double cum = 0.0;
    int retrain_idx = 0;

    for (long t = 0; t < total; ++t) {
        const bool in_target = t >= B;
        const GaussianHyperPolicy& acting = in_target ? target : behavioral;
        Vec theta = acting.sample(t, sample_rng);
        StepOut so = env->step(theta);
        hist.push({t, theta, so.reward, env->exogenous_at(t)});
        if (in_target) {
            cum += so.reward;
            target_rewards.push_back(so.reward);
        }
        StepRow row{t, in_target, std::move(theta), so.action, so.reward, in_target ? cum : 0.0,
                    false};

        if (in_target && (t - B + 1) % cfg.retrain_period == 0) {
            ++retrain_idx;
            row.retrained = true;
            HistoryView view = hist.snapshot(static_cast<size_t>(cfg.alpha));
            if (view.T != t) throw std::logic_error("history snapshot is not anchored at t");

            Vec rho = target.rho();
            RmspropState opt(rho.size());
            opt.lr = cfg.learning_rate;
            for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
                Rng replay_rng = make_rng(cfg.seed, Stream::replay,
                                          static_cast<std::uint64_t>(retrain_idx),
                                          static_cast<std::uint64_t>(epoch));
                DiagRow diag;
                diag.retrain_index = retrain_idx;
                diag.t = t;
                diag.epoch = epoch;
                try {
                    EpochEval ev = evaluate_epoch(env.get(), view, target, ecfg, scfg,
                                                  replay_rng, cfg.use_future_term);
                    diag.j_past = ev.j_past;
                    diag.j_future = ev.j_future;
                    diag.B = ev.B;
                    diag.penalty = ev.penalty_value;
                    diag.grad_future_norm = norm2(ev.grads.future);
                    diag.grad_past_norm = norm2(ev.grads.past);
                    diag.grad_penalty_norm = norm2(ev.grads.penalty);
                    // Forgetting guard: the past term must stay in the objective.
                    if (ev.replay_reward_spread > 0.0 && diag.grad_past_norm == 0.0)
                        throw std::logic_error(
                            "past-term gradient vanished on non-constant replay rewards");
                    Vec g = ev.grads.total();
                    if (!rmsprop_step(opt, rho, g)) {
                        diag.degenerate = true;  // non-finite gradient, step rejected
                        rec.diagnostics.push_back(diag);
                        continue;
                    }
                    target = target.with_rho(rho);
                    rec.diagnostics.push_back(diag);
                } catch (const DegeneracyError&) {
                    diag.degenerate = true;
                    rec.diagnostics.push_back(diag);
                    ++rec.skipped_retrains;
                    break;  // liveness over optimality: keep acting
                }
            }
            // Look-ahead audit: nothing newer than the reward at t (which used
            // the exogenous value at t+1) may have been touched.
            if (env->max_exogenous_read() > t + 1)
                throw std::logic_error("retrain touched exogenous data from the future");
        }
        rec.rows.push_back(std::move(row));
    }

    rec.final_rho = target.rho();
    rec.final_cum_return = cum;
    rec.target_reward_std = stddev_of(target_rewards);
    rec.retrains = retrain_idx;
    return rec;
}

RunRecord run_baseline_stationary(const RunConfig& cfg) {
    RunConfig base = cfg;
    base.mean_fn = "stationary";
    base.use_future_term = false;  // optimized on the alpha-step-behind return only
    base.lambda = 0.0;
    return run_lifelong(base);
}

// ---------------------------------------------------------------------------
// Bound comparison (penalty-only optimization of a sinusoidal hyper-policy)

const char* bound_method_name(BoundMethod m) {
    switch (m) {
        case BoundMethod::two_steps_psi_first: return "two_steps_psi_first";
        case BoundMethod::two_steps_phi_first: return "two_steps_phi_first";
        case BoundMethod::uniform_psi: return "uniform_psi";
        case BoundMethod::uniform_phi: return "uniform_phi";
        case BoundMethod::direct_opt_reset: return "direct_opt_reset";
        case BoundMethod::direct_opt_no_reset: return "direct_opt_no_reset";
    }
    return "?";
}

namespace {

struct BoundEval {
    double d2_bound = 1.0;
    Vec pair_coeff;  // dD/dq per (future i, past j), row-major
};

BoundEval eval_bound_method(BoundMethod m, const MixtureSpec& spec,
                            std::optional<VariationalParams>& warm, int direct_iters) {
    const size_t L = spec.L(), K = spec.K();
    BoundEval ev;
    ev.pair_coeff.assign(L * K, 0.0);
    auto q = [&](size_t i, size_t j) { return spec.pairwise.log_at(i, j); };

    switch (m) {
        case BoundMethod::two_steps_psi_first: {
            Vec u(L, 0.0);
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j) u[i] += spec.mu[j] * std::exp(-q(i, j));
            double S = 0.0;
            for (size_t i = 0; i < L; ++i) S += spec.zeta[i] / std::sqrt(u[i]);
            ev.d2_bound = S * S;
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j)
                    ev.pair_coeff[i * K + j] =
                        S * spec.zeta[i] * std::pow(u[i], -1.5) * spec.mu[j] * std::exp(-q(i, j));
            break;
        }
        case BoundMethod::uniform_psi: {
            Vec u(L, 0.0);
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j) u[i] += spec.mu[j] * std::exp(-q(i, j));
            double D = 0.0;
            for (size_t i = 0; i < L; ++i) D += spec.zeta[i] * spec.zeta[i] * L / u[i];
            ev.d2_bound = D;
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j)
                    ev.pair_coeff[i * K + j] = static_cast<double>(L) * spec.zeta[i] *
                                               spec.zeta[i] / (u[i] * u[i]) * spec.mu[j] *
                                               std::exp(-q(i, j));
            break;
        }
        case BoundMethod::two_steps_phi_first: {
            Vec z(K, 0.0);
            for (size_t j = 0; j < K; ++j)
                for (size_t i = 0; i < L; ++i) z[j] += spec.zeta[i] * std::exp(0.5 * q(i, j));
            double W = 0.0;
            for (size_t j = 0; j < K; ++j) W += spec.mu[j] / (z[j] * z[j]);
            ev.d2_bound = 1.0 / W;
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j)
                    ev.pair_coeff[i * K + j] = ev.d2_bound * ev.d2_bound * spec.mu[j] /
                                               (z[j] * z[j] * z[j]) * spec.zeta[i] *
                                               std::exp(0.5 * q(i, j));
            break;
        }
        case BoundMethod::uniform_phi: {
            Vec z(K, 0.0);
            for (size_t j = 0; j < K; ++j)
                for (size_t i = 0; i < L; ++i) z[j] += spec.zeta[i] * std::exp(0.5 * q(i, j));
            double D = 0.0;
            for (size_t j = 0; j < K; ++j) D += z[j] * z[j] / (spec.mu[j] * K * K);
            ev.d2_bound = D;
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j)
                    ev.pair_coeff[i * K + j] =
                        z[j] * spec.zeta[i] * std::exp(0.5 * q(i, j)) / (spec.mu[j] * K * K);
            break;
        }
        case BoundMethod::direct_opt_reset:
        case BoundMethod::direct_opt_no_reset: {
            std::optional<VariationalParams> start;
            if (m == BoundMethod::direct_opt_no_reset && warm) start = *warm;
            DirectOptResult res = bound_direct_opt(spec, start, direct_iters);
            if (m == BoundMethod::direct_opt_no_reset) warm = res.vp;
            ev.d2_bound = res.bound;
            // Envelope gradient: d/dq of sum phi^2 psi^{-1} e^q at the optimum.
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < K; ++j) {
                    double phi = res.vp.phi_at(i, j), psi = res.vp.psi_at(i, j);
                    if (phi > 0.0 && psi > 0.0)
                        ev.pair_coeff[i * K + j] = phi * phi / psi * std::exp(q(i, j));
                }
            break;
        }
    }
    return ev;
}

}  // namespace

BoundComparisonResult run_bound_comparison(const BoundComparisonConfig& cfg) {
    const EstimatorConfig ecfg{cfg.alpha, cfg.beta, cfg.gamma, cfg.omega};
    ecfg.validate();
    const long T = std::max(cfg.T, cfg.alpha - 1);
    const double cgb = c_gamma(cfg.gamma, cfg.beta);
    const double cga = c_gamma(cfg.gamma, cfg.alpha);

    BoundComparisonResult out;
    out.trajectories.resize(kNumBoundMethods);

    for (int mi = 0; mi < kNumBoundMethods; ++mi) {
        const BoundMethod method = static_cast<BoundMethod>(mi);
        MeanFunction mf{SinusoidSpec{1}};
        Vec rho = {cfg.init.A, cfg.init.phi, cfg.init.psi, cfg.init.B};
        GaussianHyperPolicy hp(mf, rho, false, Vec(1, cfg.log_sigma));
        RmspropState opt(rho.size());
        opt.lr = cfg.learning_rate;
        std::optional<VariationalParams> warm;

        auto log_point = [&](long step) {
            MixtureSpec spec = polis_mixture(hp, ecfg, T);
            std::optional<VariationalParams> probe = warm;  // don't advance warm start on logging
            BoundEval ev = eval_bound_method(method, spec, probe, cfg.direct_opt_iters);
            out.trajectories[mi].push_back({step, hp.rho()[0], std::log(ev.d2_bound)});
        };

        log_point(0);
        for (long step = 1; step <= cfg.steps; ++step) {
            MixtureSpec spec = polis_mixture(hp, ecfg, T);
            BoundEval ev = eval_bound_method(method, spec, warm, cfg.direct_opt_iters);
            // ascent on -lambda sqrt(C_gamma(alpha)^2 + C_gamma(beta)^2 D)
            const double chain = cfg.lambda * cgb * cgb /
                                 (2.0 * std::sqrt(cga * cga + cgb * cgb * ev.d2_bound));
            Vec grad(rho.size(), 0.0);
            Vec cot_fut(static_cast<size_t>(cfg.beta), 0.0);
            Vec cot_win(static_cast<size_t>(cfg.alpha), 0.0);
            const double sig = std::exp(cfg.log_sigma);
            Vec mu_fut(cfg.beta), mu_win(cfg.alpha);
            for (long j = 0; j < cfg.beta; ++j) mu_fut[j] = hp.mean(T + 1 + j)[0];
            for (long k = 0; k < cfg.alpha; ++k) mu_win[k] = hp.mean(T - cfg.alpha + 1 + k)[0];
            for (long j = 0; j < cfg.beta; ++j) {
                for (long k = 0; k < cfg.alpha; ++k) {
                    const double coeff = chain * ev.pair_coeff[static_cast<size_t>(j) * cfg.alpha + k];
                    if (coeff == 0.0) continue;
                    const double diff = 2.0 * (mu_fut[j] - mu_win[k]) / (sig * sig);
                    cot_fut[j] -= coeff * diff;
                    cot_win[k] += coeff * diff;
                }
            }
            for (long j = 0; j < cfg.beta; ++j) {
                const double c[1] = {cot_fut[j]};
                mf.vjp_accum(hp.mean_params(), T + 1 + j, c, grad);
            }
            for (long k = 0; k < cfg.alpha; ++k) {
                const double c[1] = {cot_win[k]};
                mf.vjp_accum(hp.mean_params(), T - cfg.alpha + 1 + k, c, grad);
            }
            rmsprop_step(opt, rho, grad);
            hp = hp.with_rho(rho);
            if (step % cfg.log_every == 0 || step == cfg.steps) log_point(step);
        }
    }
    return out;
}

}  // namespace polis
