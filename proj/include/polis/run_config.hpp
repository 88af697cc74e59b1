#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "polis/common.hpp"

namespace polis {

struct TcnArch {
    int enc_dim = 8;
    double enc_base = 10000.0;
    std::vector<int> channels = {8, 8, 4};
    int kernel = 3;
};

struct SinusoidInit {
    double A = 1.0;
    double phi = M_PI;       // alternating mean; see bound-comparison defaults
    double psi = M_PI / 2.0;
    double B = 0.0;
};

// Everything Algorithm 1 and the experiment appendix parameterize. Defaults
// follow the trading setup; per-environment defaults are applied by
// apply_env_defaults() before file/flag overrides.
struct RunConfig {
    std::string env = "vasicek";      // vasicek | trading_csv | dam | bandit
    std::string mean_fn = "tcn";      // tcn | stationary | sinusoid
    long alpha = 500;
    long beta = 500;
    double gamma = 1.0;
    double omega = 1.0;
    double lambda = 10.0;
    long retrain_period = 50;  // h
    long epochs = 100;         // N
    long behavioral_len = 0;   // 0 means alpha
    long target_len = 500;
    int n_replays = 100;
    bool learn_sigma = false;
    bool use_future_term = true;
    double behavioral_log_sigma = 0.5;  // sigma = e^{1/2} while exploring
    double initial_log_sigma = -1.0;    // sigma = e^{-1} at the start of training
    double learning_rate = 1e-3;
    TcnArch tcn;
    SinusoidInit sinusoid;

    int dam_profile = 1;
    std::string dam_demand_penalty = "as_paper";  // or "deficit"
    std::string rates_csv;
    double bandit_amplitude = 1.0;
    double bandit_frequency = 0.05;
    double bandit_noise_std = 0.1;

    std::uint64_t seed = 0;  // per-run master seed

    long behavioral_length() const { return behavioral_len > 0 ? behavioral_len : alpha; }
    void validate() const;

    // Canonical key=value serialization; feeds the config hash and the JSON
    // sidecar so identical configs always produce identical artifacts.
    std::string canonical() const;
};

// Environment-specific defaults from the experiment appendix (dam: alpha=1000,
// beta=50, lambda=100, learned sigma; trading flavors: alpha=500, beta=500,
// lambda=10, fixed sigma).
void apply_env_defaults(RunConfig& cfg);

// Plain-text key=value file; '#' starts a comment. Unknown keys are rejected
// with the line number. Returns the keys in file order.
struct ConfigEntry {
    std::string key;
    std::string value;
    long line = 0;
};
std::vector<ConfigEntry> parse_config_file(const std::string& path);

// Applies key=value pairs onto a config. `where` prefixes error messages
// ("file.txt:3" or "--flag").
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        const std::string& where);

std::string config_hash(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds);

}  // namespace polis
