#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "polis/common.hpp"
#include "polis/rng.hpp"

namespace polis {

// Bounded affine policy: a = lo + (hi-lo) * (tanh(w.x + b0) + 1) / 2, with
// theta = [w | b0] over the observed state.
double affine_action(std::span<const double> theta, std::span<const double> state, double lo,
                     double hi);

// Single Vasicek transition p' = 0.9 p + u.
double vasicek_step(double p, double u);

// r = a (rate' - rate) - fee |a - portfolio|; fee is in rate units.
double trading_reward(double action, double rate, double rate_next, double portfolio,
                      double fee);

// r = -(theta - amplitude sin(freq t))^2 + noise.
double bandit_reward(double theta, long t, double amplitude, double frequency, double noise);

struct DamConfig {
    double flood_level = 300.0;
    double demand = 10.0;
    double flood_weight = 0.3;
    double demand_weight = 0.7;
    double action_max = 40.0;
    double initial_level = 200.0;
    double reward_scale = 1e-3;        // reported returns are cost/1e3
    bool penalize_deficit = false;     // false: (max(a-D,0))^2 as written; true: (max(D-a,0))^2
    // Yearly mean-inflow sinusoid with multiplicative lognormal noise.
    double inflow_base = 10.0;
    double inflow_amplitude = 6.0;
    double inflow_phase = 0.0;
    double inflow_period = 365.0;
    double inflow_lognorm_sigma = 0.25;
};

// One dam transition given the realized inflow. Returns (next level, cost).
std::pair<double, double> dam_step(double level, double inflow, double release,
                                   const DamConfig& cfg);

// Mean-inflow profiles synthesized for the three dam experiments.
DamConfig dam_profile_config(int profile);

struct StepOut {
    double reward = 0.0;
    double action = 0.0;
};

// Provider of the policy parameters used at step t of a replay; writes
// theta into `out`.
using ThetaProvider = std::function<void(long t, std::span<double> out)>;

// Factorized-state lifelong environment: the exogenous part x^u evolves
// independently of actions and is recorded as it is generated, so past
// windows can be replayed under fresh policy draws. Instances are stateful
// and single-threaded; traces, once recorded, never change.
class NonStationaryEnv {
public:
    virtual ~NonStationaryEnv() = default;

    virtual std::string name() const = 0;
    virtual int state_dim() const = 0;
    virtual int theta_dim() const = 0;
    virtual int exogenous_dim() const = 0;
    virtual double reward_bound() const = 0;

    // Index of the next step to be taken.
    long time() const { return t_; }

    virtual StepOut step(std::span<const double> theta) = 0;

    // Realized exogenous snapshot at time t (range error outside the recording).
    virtual Vec exogenous_at(long t) const = 0;
    Vec exogenous_trace(long from_t, long to_t) const;

    // Recomputes rewards over [from_t, to_t] with the exogenous trace frozen
    // and policy parameters drawn from theta_at. rng covers reward noise.
    virtual Vec replay(long from_t, long to_t, const ThetaProvider& theta_at,
                       Rng& rng) const = 0;

    // Largest exogenous index read so far (look-ahead audit).
    long max_exogenous_read() const { return max_exo_read_; }

protected:
    long t_ = 0;
    mutable long max_exo_read_ = -1;
    void note_read(long t) const { max_exo_read_ = std::max(max_exo_read_, t); }
    void check_recorded(long from_t, long to_t, long end) const;
};

// Daily trading of one instrument against an exogenous rate series. State is
// (portfolio, rate); actions in [-1,1] are the next position.
class TradingEnv final : public NonStationaryEnv {
public:
    // Rates generated online by a Vasicek process.
    static std::unique_ptr<TradingEnv> vasicek(std::uint64_t master_seed, double reward_bound = 10.0);
    // Rates taken from a prerecorded series (CSV or synthetic generator).
    static std::unique_ptr<TradingEnv> from_series(Vec rates);

    std::string name() const override { return vasicek_ ? "vasicek" : "trading_csv"; }
    int state_dim() const override { return 2; }
    int theta_dim() const override { return 3; }
    int exogenous_dim() const override { return 1; }
    double reward_bound() const override { return reward_bound_; }

    StepOut step(std::span<const double> theta) override;
    Vec exogenous_at(long t) const override;
    Vec replay(long from_t, long to_t, const ThetaProvider& theta_at, Rng& rng) const override;

    double fee() const { return fee_; }
    long series_length() const { return static_cast<long>(rates_.size()); }

private:
    TradingEnv() = default;
    double rate_at(long t) const;

    bool vasicek_ = false;
    mutable Rng exo_rng_;
    Vec rates_;          // rates_[t] realized before acting at t; rates_[t+1] after step t
    Vec portfolio_hist_;  // portfolio before acting at t
    double portfolio_ = 0.0;
    double fee_ = 1e-5;  // 1$ per transaction on a 100k$ notional, in rate units
    double reward_bound_ = 10.0;
};

// Water reservoir: level rises with exogenous inflow, the action releases
// water; costs penalize flooding and the demand mismatch.
class DamEnv final : public NonStationaryEnv {
public:
    DamEnv(DamConfig cfg, std::uint64_t master_seed);

    std::string name() const override { return "dam"; }
    int state_dim() const override { return 1; }
    int theta_dim() const override { return 2; }
    int exogenous_dim() const override { return 1; }
    double reward_bound() const override { return 1000.0; }

    StepOut step(std::span<const double> theta) override;
    Vec exogenous_at(long t) const override;
    Vec replay(long from_t, long to_t, const ThetaProvider& theta_at, Rng& rng) const override;

    double level() const { return level_; }
    const DamConfig& config() const { return cfg_; }

private:
    double draw_inflow(long t);

    DamConfig cfg_;
    Rng exo_rng_;
    double level_;
    Vec inflows_;     // inflows_[t] realized during step t
    Vec level_hist_;  // level before acting at t
};

// Contextual bandit with a sinusoidal context; theta is the action itself.
// The analytic expected reward backs the gradient oracles.
class SinusoidalBanditEnv final : public NonStationaryEnv {
public:
    SinusoidalBanditEnv(double amplitude, double frequency, double noise_std,
                        std::uint64_t master_seed);

    std::string name() const override { return "bandit"; }
    int state_dim() const override { return 0; }
    int theta_dim() const override { return 1; }
    int exogenous_dim() const override { return 1; }
    double reward_bound() const override { return 30.0; }

    StepOut step(std::span<const double> theta) override;
    Vec exogenous_at(long t) const override;
    Vec replay(long from_t, long to_t, const ThetaProvider& theta_at, Rng& rng) const override;

    double context(long t) const { return amplitude_ * std::sin(frequency_ * t); }
    double noise_std() const { return noise_std_; }
    // E[r] when theta ~ N(mu, sigma^2): -(mu - context)^2 - sigma^2.
    double expected_reward(double mu, double sigma, long t) const;

private:
    double amplitude_, frequency_, noise_std_;
    Rng exo_rng_;
    Vec contexts_;
};

// Two-column CSV (ISO date, close); header row required, chronological order
// enforced. Returns the close-rate series.
Vec load_rates_csv(const std::string& path);

// OU series around 1.2 with small daily moves; stand-in for a real rates file.
void write_synthetic_rates_csv(const std::string& path, long n, std::uint64_t seed);

}  // namespace polis
