#include "polis/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace polis {

double affine_action(std::span<const double> theta, std::span<const double> state, double lo,
                     double hi) {
    if (theta.size() != state.size() + 1)
        throw ConfigError("affine policy needs dim(state)+1 parameters");
    double z = theta[state.size()];
    for (size_t i = 0; i < state.size(); ++i) z += theta[i] * state[i];
    return lo + (hi - lo) * (std::tanh(z) + 1.0) / 2.0;
}

double vasicek_step(double p, double u) { return 0.9 * p + u; }

double trading_reward(double action, double rate, double rate_next, double portfolio,
                      double fee) {
    return action * (rate_next - rate) - fee * std::abs(action - portfolio);
}

double bandit_reward(double theta, long t, double amplitude, double frequency, double noise) {
    double ctx = amplitude * std::sin(frequency * t);
    double d = theta - ctx;
    return -d * d + noise;
}

std::pair<double, double> dam_step(double level, double inflow, double release,
                                   const DamConfig& cfg) {
    if (inflow < 0.0) throw ConfigError("dam inflow must be nonnegative");
    if (release < 0.0) throw std::domain_error("dam release must be nonnegative");
    double effective = std::clamp(release, 0.0, level);
    double next = level + inflow - effective;
    double flood = std::max(next - cfg.flood_level, 0.0);
    double dem = cfg.penalize_deficit ? std::max(cfg.demand - effective, 0.0)
                                      : std::max(effective - cfg.demand, 0.0);
    double cost = cfg.flood_weight * flood * flood + cfg.demand_weight * dem * dem;
    return {next, cost};
}

DamConfig dam_profile_config(int profile) {
    DamConfig cfg;
    switch (profile) {
        case 1:
            cfg.flood_weight = 0.3;
            cfg.demand_weight = 0.7;
            cfg.inflow_base = 10.0;
            cfg.inflow_amplitude = 6.0;
            cfg.inflow_phase = 0.0;
            break;
        case 2:
            cfg.flood_weight = 0.8;
            cfg.demand_weight = 0.2;
            cfg.inflow_base = 12.0;
            cfg.inflow_amplitude = 8.0;
            cfg.inflow_phase = 2.0 * M_PI / 3.0;
            break;
        case 3:
            cfg.flood_weight = 0.35;
            cfg.demand_weight = 0.65;
            cfg.inflow_base = 9.0;
            cfg.inflow_amplitude = 5.0;
            cfg.inflow_phase = 4.0 * M_PI / 3.0;
            break;
        default:
            throw ConfigError("dam inflow profile must be 1, 2 or 3");
    }
    return cfg;
}

void NonStationaryEnv::check_recorded(long from_t, long to_t, long end) const {
    if (from_t < 0 || from_t > to_t)
        throw std::out_of_range("invalid exogenous window [" + std::to_string(from_t) + ", " +
                                std::to_string(to_t) + "]");
    if (to_t > end)
        throw std::out_of_range("exogenous window reaches " + std::to_string(to_t) +
                                " but recording ends at " + std::to_string(end));
}

Vec NonStationaryEnv::exogenous_trace(long from_t, long to_t) const {
    Vec out;
    out.reserve(static_cast<size_t>(to_t - from_t + 1) * exogenous_dim());
    for (long t = from_t; t <= to_t; ++t) {
        Vec x = exogenous_at(t);
        out.insert(out.end(), x.begin(), x.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// TradingEnv

std::unique_ptr<TradingEnv> TradingEnv::vasicek(std::uint64_t master_seed, double reward_bound) {
    auto env = std::unique_ptr<TradingEnv>(new TradingEnv());
    env->vasicek_ = true;
    env->exo_rng_ = make_rng(master_seed, Stream::exogenous);
    env->rates_.push_back(0.0);  // p_0
    env->reward_bound_ = reward_bound;
    return env;
}

std::unique_ptr<TradingEnv> TradingEnv::from_series(Vec rates) {
    if (rates.size() < 2) throw ConfigError("rate series needs at least two points");
    auto env = std::unique_ptr<TradingEnv>(new TradingEnv());
    env->vasicek_ = false;
    double max_move = 0.0;
    for (size_t i = 1; i < rates.size(); ++i)
        max_move = std::max(max_move, std::abs(rates[i] - rates[i - 1]));
    env->reward_bound_ = max_move + 2.0 * env->fee_;
    env->rates_ = std::move(rates);
    return env;
}

double TradingEnv::rate_at(long t) const {
    if (t < 0 || t >= static_cast<long>(rates_.size()))
        throw std::out_of_range("rate at t=" + std::to_string(t) + " not recorded");
    note_read(t);
    return rates_[t];
}

StepOut TradingEnv::step(std::span<const double> theta) {
    if (theta.size() != 3) throw ConfigError("trading policy parameter must have dimension 3");
    const double rate = rates_[static_cast<size_t>(t_)];
    const double state[2] = {portfolio_, rate};
    const double a = affine_action(theta, state, -1.0, 1.0);
    if (vasicek_) {
        std::normal_distribution<double> normal(0.0, 1.0);
        rates_.push_back(vasicek_step(rates_.back(), normal(exo_rng_)));
    } else if (t_ + 1 >= static_cast<long>(rates_.size())) {
        throw std::out_of_range("prerecorded rate series exhausted at t=" + std::to_string(t_));
    }
    const double rate_next = rates_[static_cast<size_t>(t_) + 1];
    const double r = trading_reward(a, rate, rate_next, portfolio_, fee_);
    portfolio_hist_.push_back(portfolio_);
    portfolio_ = a;
    ++t_;
    return {r, a};
}

Vec TradingEnv::exogenous_at(long t) const { return {rate_at(t)}; }

Vec TradingEnv::replay(long from_t, long to_t, const ThetaProvider& theta_at, Rng&) const {
    check_recorded(from_t, to_t, static_cast<long>(rates_.size()) - 2);
    if (from_t >= static_cast<long>(portfolio_hist_.size()))
        throw std::out_of_range("replay start precedes recorded portfolio history");
    Vec rewards;
    rewards.reserve(to_t - from_t + 1);
    double portfolio = portfolio_hist_[static_cast<size_t>(from_t)];
    Vec theta(3);
    for (long t = from_t; t <= to_t; ++t) {
        theta_at(t, theta);
        const double rate = rate_at(t);
        const double state[2] = {portfolio, rate};
        const double a = affine_action(theta, state, -1.0, 1.0);
        rewards.push_back(trading_reward(a, rate, rate_at(t + 1), portfolio, fee_));
        portfolio = a;
    }
    return rewards;
}

// ---------------------------------------------------------------------------
// DamEnv

DamEnv::DamEnv(DamConfig cfg, std::uint64_t master_seed)
    : cfg_(cfg), exo_rng_(make_rng(master_seed, Stream::exogenous)), level_(cfg.initial_level) {
    if (cfg_.inflow_base < cfg_.inflow_amplitude)
        throw ConfigError("dam mean inflow would go negative");
}

double DamEnv::draw_inflow(long t) {
    double mean = cfg_.inflow_base +
                  cfg_.inflow_amplitude *
                      std::sin(2.0 * M_PI * static_cast<double>(t) / cfg_.inflow_period +
                               cfg_.inflow_phase);
    std::normal_distribution<double> normal(0.0, 1.0);
    double s = cfg_.inflow_lognorm_sigma;
    // mean-preserving lognormal noise
    return mean * std::exp(s * normal(exo_rng_) - 0.5 * s * s);
}

StepOut DamEnv::step(std::span<const double> theta) {
    if (theta.size() != 2) throw ConfigError("dam policy parameter must have dimension 2");
    const double state[1] = {level_};
    const double a = affine_action(theta, state, 0.0, cfg_.action_max);
    const double inflow = draw_inflow(t_);
    inflows_.push_back(inflow);
    level_hist_.push_back(level_);
    auto [next, cost] = dam_step(level_, inflow, a, cfg_);
    level_ = next;
    ++t_;
    return {-cost * cfg_.reward_scale, a};
}

Vec DamEnv::exogenous_at(long t) const {
    if (t < 0 || t >= static_cast<long>(inflows_.size()))
        throw std::out_of_range("inflow at t=" + std::to_string(t) + " not recorded");
    note_read(t);
    return {inflows_[static_cast<size_t>(t)]};
}

Vec DamEnv::replay(long from_t, long to_t, const ThetaProvider& theta_at, Rng&) const {
    check_recorded(from_t, to_t, static_cast<long>(inflows_.size()) - 1);
    Vec rewards;
    rewards.reserve(to_t - from_t + 1);
    double level = level_hist_[static_cast<size_t>(from_t)];
    Vec theta(2);
    for (long t = from_t; t <= to_t; ++t) {
        theta_at(t, theta);
        const double state[1] = {level};
        const double a = affine_action(theta, state, 0.0, cfg_.action_max);
        note_read(t);
        auto [next, cost] = dam_step(level, inflows_[static_cast<size_t>(t)], a, cfg_);
        level = next;
        rewards.push_back(-cost * cfg_.reward_scale);
    }
    return rewards;
}

// ---------------------------------------------------------------------------
// SinusoidalBanditEnv

SinusoidalBanditEnv::SinusoidalBanditEnv(double amplitude, double frequency, double noise_std,
                                         std::uint64_t master_seed)
    : amplitude_(amplitude),
      frequency_(frequency),
      noise_std_(noise_std),
      exo_rng_(make_rng(master_seed, Stream::exogenous)) {
    if (noise_std_ < 0.0) throw ConfigError("bandit noise std must be nonnegative");
}

StepOut SinusoidalBanditEnv::step(std::span<const double> theta) {
    if (theta.size() != 1) throw ConfigError("bandit policy parameter must have dimension 1");
    contexts_.push_back(context(t_));
    std::normal_distribution<double> normal(0.0, 1.0);
    double noise = noise_std_ > 0.0 ? noise_std_ * normal(exo_rng_) : 0.0;
    double r = bandit_reward(theta[0], t_, amplitude_, frequency_, noise);
    ++t_;
    return {r, theta[0]};
}

Vec SinusoidalBanditEnv::exogenous_at(long t) const {
    if (t < 0 || t >= static_cast<long>(contexts_.size()))
        throw std::out_of_range("context at t=" + std::to_string(t) + " not recorded");
    note_read(t);
    return {contexts_[static_cast<size_t>(t)]};
}

Vec SinusoidalBanditEnv::replay(long from_t, long to_t, const ThetaProvider& theta_at,
                                Rng& rng) const {
    check_recorded(from_t, to_t, static_cast<long>(contexts_.size()) - 1);
    Vec rewards;
    rewards.reserve(to_t - from_t + 1);
    Vec theta(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long t = from_t; t <= to_t; ++t) {
        theta_at(t, theta);
        note_read(t);
        double noise = noise_std_ > 0.0 ? noise_std_ * normal(rng) : 0.0;
        double d = theta[0] - contexts_[static_cast<size_t>(t)];
        rewards.push_back(-d * d + noise);
    }
    return rewards;
}

double SinusoidalBanditEnv::expected_reward(double mu, double sigma, long t) const {
    double d = mu - context(t);
    return -d * d - sigma * sigma;
}

// ---------------------------------------------------------------------------
// Rate CSV handling

Vec load_rates_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open rates file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    // Header row is mandatory; reject files that start with data.
    if (!line.empty() && (std::isdigit(static_cast<unsigned char>(line[0]))))
        throw ConfigError(path + ":1: missing header row");
    Vec rates;
    std::string prev_date;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'date,close'");
        std::string date = line.substr(0, comma);
        if (date.size() != 10 || date[4] != '-' || date[7] != '-')
            throw ConfigError(path + ":" + std::to_string(line_no) + ": date must be ISO yyyy-mm-dd");
        if (!prev_date.empty() && date <= prev_date)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": dates must be strictly increasing");
        prev_date = date;
        try {
            size_t used = 0;
            std::string value = line.substr(comma + 1);
            double rate = std::stod(value, &used);
            if (used != value.size())
                throw std::invalid_argument("trailing characters");
            rates.push_back(rate);
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": bad close value");
        }
    }
    if (rates.size() < 2) throw ConfigError(path + ": need at least two data rows");
    return rates;
}

void write_synthetic_rates_csv(const std::string& path, long n, std::uint64_t seed) {
    if (n < 2) throw ConfigError("synthetic series needs at least two points");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    Rng rng = make_rng(seed, Stream::exogenous);
    std::normal_distribution<double> normal(0.0, 1.0);
    out << "date,close\n";
    double rate = 1.3;
    // date arithmetic: fixed 365-day years starting 2009-01-01, months of 28
    // days; the loader only requires strict ordering.
    static const char* months[] = {"01", "02", "03", "04", "05", "06",
                                   "07", "08", "09", "10", "11", "12"};
    for (long i = 0; i < n; ++i) {
        long year = 2009 + i / 336;
        long rem = i % 336;
        const char* month = months[rem / 28];
        long day = rem % 28 + 1;
        char date[32];
        std::snprintf(date, sizeof(date), "%04ld-%s-%02ld", year, month, day);
        out << date << "," << fmt_double(rate) << "\n";
        rate += 0.02 * (1.2 - rate) + 0.005 * normal(rng);
    }
}

}  // namespace polis
