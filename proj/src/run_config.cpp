#include "polis/run_config.hpp"

#include <fstream>
#include <sstream>

namespace polis {

void RunConfig::validate() const {
    if (env != "vasicek" && env != "trading_csv" && env != "dam" && env != "bandit")
        throw ConfigError("unknown env '" + env + "'");
    if (mean_fn != "tcn" && mean_fn != "stationary" && mean_fn != "sinusoid")
        throw ConfigError("unknown mean_fn '" + mean_fn + "'");
    if (alpha < 1 || beta < 1) throw ConfigError("alpha and beta must be >= 1");
    if (gamma < 0 || gamma > 1 || omega < 0 || omega > 1)
        throw ConfigError("gamma and omega must lie in [0, 1]");
    if (lambda < 0) throw ConfigError("lambda must be nonnegative");
    if (retrain_period < 1) throw ConfigError("retrain period h must be >= 1");
    if (epochs < 1) throw ConfigError("training epochs N must be >= 1");
    if (target_len < 1) throw ConfigError("target period length must be >= 1");
    if (behavioral_length() < alpha)
        throw ConfigError("behavioral period must cover at least alpha steps");
    if (n_replays < 1) throw ConfigError("n_replays must be >= 1");
    if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
    if (dam_profile < 1 || dam_profile > 3) throw ConfigError("dam profile must be 1, 2 or 3");
    if (dam_demand_penalty != "as_paper" && dam_demand_penalty != "deficit")
        throw ConfigError("dam_demand_penalty must be 'as_paper' or 'deficit'");
    if (env == "trading_csv" && rates_csv.empty())
        throw ConfigError("trading_csv requires rates_csv=<path>");
}

void apply_env_defaults(RunConfig& cfg) {
    if (cfg.env == "dam") {
        cfg.alpha = 1000;
        cfg.beta = 50;
        cfg.lambda = 100.0;
        cfg.learn_sigma = true;
    } else if (cfg.env == "vasicek" || cfg.env == "trading_csv") {
        cfg.alpha = 500;
        cfg.beta = 500;
        cfg.lambda = 10.0;
        cfg.learn_sigma = false;
    } else if (cfg.env == "bandit") {
        cfg.alpha = 100;
        cfg.beta = 20;
        cfg.lambda = 1.0;
        cfg.learn_sigma = false;
    }
}

std::string RunConfig::canonical() const {
    std::ostringstream s;
    s << "env=" << env << "\n";
    s << "mean_fn=" << mean_fn << "\n";
    s << "alpha=" << alpha << "\n";
    s << "beta=" << beta << "\n";
    s << "gamma=" << fmt_double(gamma) << "\n";
    s << "omega=" << fmt_double(omega) << "\n";
    s << "lambda=" << fmt_double(lambda) << "\n";
    s << "h=" << retrain_period << "\n";
    s << "epochs=" << epochs << "\n";
    s << "behavioral_len=" << behavioral_length() << "\n";
    s << "target_len=" << target_len << "\n";
    s << "n_replays=" << n_replays << "\n";
    s << "learn_sigma=" << (learn_sigma ? 1 : 0) << "\n";
    s << "use_future_term=" << (use_future_term ? 1 : 0) << "\n";
    s << "behavioral_log_sigma=" << fmt_double(behavioral_log_sigma) << "\n";
    s << "initial_log_sigma=" << fmt_double(initial_log_sigma) << "\n";
    s << "learning_rate=" << fmt_double(learning_rate) << "\n";
    s << "enc_dim=" << tcn.enc_dim << "\n";
    s << "enc_base=" << fmt_double(tcn.enc_base) << "\n";
    s << "tcn_channels=";
    for (size_t i = 0; i < tcn.channels.size(); ++i)
        s << (i ? "," : "") << tcn.channels[i];
    s << "\n";
    s << "tcn_kernel=" << tcn.kernel << "\n";
    s << "sinusoid_A=" << fmt_double(sinusoid.A) << "\n";
    s << "sinusoid_phi=" << fmt_double(sinusoid.phi) << "\n";
    s << "sinusoid_psi=" << fmt_double(sinusoid.psi) << "\n";
    s << "sinusoid_B=" << fmt_double(sinusoid.B) << "\n";
    s << "dam_profile=" << dam_profile << "\n";
    s << "dam_demand_penalty=" << dam_demand_penalty << "\n";
    s << "rates_csv=" << rates_csv << "\n";
    s << "bandit_amplitude=" << fmt_double(bandit_amplitude) << "\n";
    s << "bandit_frequency=" << fmt_double(bandit_frequency) << "\n";
    s << "bandit_noise_std=" << fmt_double(bandit_noise_std) << "\n";
    return s.str();
}

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::vector<ConfigEntry> entries;
    std::string line;
    long line_no = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        auto a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        auto b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key or value");
        entries.push_back({key, value, line_no});
    }
    return entries;
}

namespace {

long to_long(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& v, const std::string& where) {
    std::vector<int> out;
    std::stringstream s(v);
    std::string item;
    while (std::getline(s, item, ','))
        out.push_back(static_cast<int>(to_long(item, where)));
    if (out.empty()) throw ConfigError(where + ": empty list");
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        const std::string& where) {
    if (key == "env") {
        cfg.env = value;
        apply_env_defaults(cfg);
    } else if (key == "mean_fn")
        cfg.mean_fn = value;
    else if (key == "alpha")
        cfg.alpha = to_long(value, where);
    else if (key == "beta")
        cfg.beta = to_long(value, where);
    else if (key == "gamma")
        cfg.gamma = to_double(value, where);
    else if (key == "omega")
        cfg.omega = to_double(value, where);
    else if (key == "lambda")
        cfg.lambda = to_double(value, where);
    else if (key == "h")
        cfg.retrain_period = to_long(value, where);
    else if (key == "epochs")
        cfg.epochs = to_long(value, where);
    else if (key == "behavioral_len")
        cfg.behavioral_len = to_long(value, where);
    else if (key == "target_len")
        cfg.target_len = to_long(value, where);
    else if (key == "n_replays")
        cfg.n_replays = static_cast<int>(to_long(value, where));
    else if (key == "learn_sigma")
        cfg.learn_sigma = to_bool(value, where);
    else if (key == "use_future_term")
        cfg.use_future_term = to_bool(value, where);
    else if (key == "behavioral_log_sigma")
        cfg.behavioral_log_sigma = to_double(value, where);
    else if (key == "initial_log_sigma")
        cfg.initial_log_sigma = to_double(value, where);
    else if (key == "learning_rate")
        cfg.learning_rate = to_double(value, where);
    else if (key == "enc_dim")
        cfg.tcn.enc_dim = static_cast<int>(to_long(value, where));
    else if (key == "enc_base")
        cfg.tcn.enc_base = to_double(value, where);
    else if (key == "tcn_channels")
        cfg.tcn.channels = to_int_list(value, where);
    else if (key == "tcn_kernel")
        cfg.tcn.kernel = static_cast<int>(to_long(value, where));
    else if (key == "sinusoid_A")
        cfg.sinusoid.A = to_double(value, where);
    else if (key == "sinusoid_phi")
        cfg.sinusoid.phi = to_double(value, where);
    else if (key == "sinusoid_psi")
        cfg.sinusoid.psi = to_double(value, where);
    else if (key == "sinusoid_B")
        cfg.sinusoid.B = to_double(value, where);
    else if (key == "dam_profile")
        cfg.dam_profile = static_cast<int>(to_long(value, where));
    else if (key == "dam_demand_penalty")
        cfg.dam_demand_penalty = value;
    else if (key == "rates_csv")
        cfg.rates_csv = value;
    else if (key == "bandit_amplitude")
        cfg.bandit_amplitude = to_double(value, where);
    else if (key == "bandit_frequency")
        cfg.bandit_frequency = to_double(value, where);
    else if (key == "bandit_noise_std")
        cfg.bandit_noise_std = to_double(value, where);
    else
        throw ConfigError(where + ": unknown key '" + key + "'");
}

std::string config_hash(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds) {
    std::string s = cfg.canonical();
    s += "seeds=";
    for (size_t i = 0; i < seeds.size(); ++i)
        s += (i ? "," : "") + std::to_string(seeds[i]);
    s += "\n";
    return hash_hex(fnv1a64(s));
}

}  // namespace polis
