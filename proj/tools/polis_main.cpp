#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "polis/commands.hpp"

namespace {

using namespace polis;

struct CommonFlags {
    std::string config_path;
    std::string env;
    std::string out_dir = ".";
    std::uint64_t seed_base = 0;
    long seed_count = 0;
    std::string seed_list;
    double lambda = std::nan("");
    long beta = -1, alpha = -1;
    double omega = std::nan(""), gamma = std::nan("");
    long inflow = -1;
    std::string rates;
    long target_len = -1, epochs = -1, h = -1;
    int workers = 0;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config_path, "key = value config file");
    app->add_option("--env", f.env, "vasicek | trading_csv | dam | bandit");
    app->add_option("--out", f.out_dir, "output directory");
    app->add_option("--seed", f.seed_base, "base seed (default 0)");
    app->add_option("--seeds", f.seed_count, "number of seeds, base..base+n-1");
    app->add_option("--seed-list", f.seed_list, "explicit comma-separated seed list");
    app->add_option("--lambda", f.lambda, "variance-penalty coefficient");
    app->add_option("--beta", f.beta, "steps ahead");
    app->add_option("--alpha", f.alpha, "steps behind");
    app->add_option("--omega", f.omega, "exponential weighting");
    app->add_option("--gamma", f.gamma, "future discount");
    app->add_option("--inflow", f.inflow, "dam inflow profile (1-3)");
    app->add_option("--rates", f.rates, "rates CSV for trading_csv");
    app->add_option("--target-len", f.target_len, "target period length");
    app->add_option("--epochs", f.epochs, "training epochs per retrain");
    app->add_option("--retrain-period", f.h, "retrain period h");
    app->add_option("--workers", f.workers, "max parallel seeds (0 = all cores)");
}

RunConfig build_config(const CommonFlags& f) {
    RunConfig cfg;
    // precedence: env defaults, then file, then flags
    if (!f.env.empty()) {
        cfg.env = f.env;
        apply_env_defaults(cfg);
    }
    if (!f.config_path.empty()) {
        for (const auto& e : parse_config_file(f.config_path))
            apply_config_entry(cfg, e.key, e.value,
                               f.config_path + ":" + std::to_string(e.line));
    }
    if (!f.env.empty()) cfg.env = f.env;  // flag wins over the file
    if (!std::isnan(f.lambda)) cfg.lambda = f.lambda;
    if (f.beta >= 0) cfg.beta = f.beta;
    if (f.alpha >= 0) cfg.alpha = f.alpha;
    if (!std::isnan(f.omega)) cfg.omega = f.omega;
    if (!std::isnan(f.gamma)) cfg.gamma = f.gamma;
    if (f.inflow >= 0) cfg.dam_profile = static_cast<int>(f.inflow);
    if (!f.rates.empty()) cfg.rates_csv = f.rates;
    if (f.target_len >= 0) cfg.target_len = f.target_len;
    if (f.epochs >= 0) cfg.epochs = f.epochs;
    if (f.h >= 0) cfg.retrain_period = f.h;
    return cfg;
}

std::vector<std::uint64_t> build_seeds(const CommonFlags& f) {
    std::vector<std::uint64_t> seeds;
    if (!f.seed_list.empty()) {
        std::stringstream s(f.seed_list);
        std::string item;
        while (std::getline(s, item, ',')) seeds.push_back(std::stoull(item));
    } else if (f.seed_count > 0) {
        for (long i = 0; i < f.seed_count; ++i) seeds.push_back(f.seed_base + i);
    } else {
        seeds.push_back(f.seed_base);
    }
    return seeds;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<long> parse_long_list(const std::string& s) {
    std::vector<long> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stol(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"POLIS: lifelong parameter-based policy optimization"};
    app.require_subcommand(1);

    CommonFlags run_f, sweep_f;
    std::string run_algorithm = "polis";
    auto* run = app.add_subcommand("run", "lifelong experiment, one run per seed");
    add_common(run, run_f);
    run->add_option("--algorithm", run_algorithm, "polis | stationary");

    auto* sweep = app.add_subcommand("sweep", "lambda/beta grid sweep");
    add_common(sweep, sweep_f);
    std::string lambda_grid = "10,100,1000", beta_grid = "10,100,500";
    sweep->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values");
    sweep->add_option("--beta-grid", beta_grid, "comma-separated beta values (beta > 1)");

    auto* bench = app.add_subcommand("bounds-bench", "benchmark the six mixture bounds");
    long bench_n = 200;
    std::uint64_t bench_seed = 0;
    std::string bench_out = ".";
    bool bench_skip_cmp = false;
    long bench_steps = 2000;
    bench->add_option("--instances", bench_n, "number of random mixture instances");
    bench->add_option("--seed", bench_seed, "instance generator seed");
    bench->add_option("--out", bench_out, "output directory");
    bench->add_option("--steps", bench_steps, "A-trajectory optimizer steps");
    bench->add_flag("--skip-comparison", bench_skip_cmp, "skip the A-trajectory experiment");

    auto* bias = app.add_subcommand("bias-bound", "evaluate the bias-bound formulas");
    BiasBoundOptions bias_opt;
    bias->add_option("--alpha", bias_opt.estimator.alpha)->required();
    bias->add_option("--beta", bias_opt.estimator.beta)->required();
    bias->add_option("--gamma", bias_opt.estimator.gamma)->required();
    bias->add_option("--omega", bias_opt.estimator.omega)->required();
    bias->add_option("--lm", bias_opt.inputs.env_lipschitz, "environment Lipschitz constant");
    bias->add_option("--lnu", bias_opt.inputs.policy_lipschitz, "hyper-policy Lipschitz constant");
    bias->add_option("--rmax", bias_opt.inputs.reward_bound, "reward bound");

    auto* gen = app.add_subcommand("gen-rates", "synthetic EUR-USD-shaped rates CSV");
    std::string gen_out = "rates.csv";
    long gen_n = 1100;
    std::uint64_t gen_seed = 0;
    gen->add_option("--out", gen_out, "output file");
    gen->add_option("--n", gen_n, "number of rows");
    gen->add_option("--seed", gen_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (run->parsed()) {
            RunOptions opt;
            opt.config = build_config(run_f);
            opt.seeds = build_seeds(run_f);
            opt.out_dir = run_f.out_dir;
            opt.algorithm = run_algorithm;
            opt.max_workers = run_f.workers;
            return cmd_run(opt, std::cout);
        }
        if (sweep->parsed()) {
            SweepOptions opt;
            opt.config = build_config(sweep_f);
            opt.seeds = build_seeds(sweep_f);
            opt.out_dir = sweep_f.out_dir;
            opt.lambda_grid = parse_double_list(lambda_grid);
            opt.beta_grid = parse_long_list(beta_grid);
            opt.max_workers = sweep_f.workers;
            return cmd_sweep(opt, std::cout);
        }
        if (bench->parsed()) {
            BoundsBenchOptions opt;
            opt.instances = bench_n;
            opt.seed = bench_seed;
            opt.out_dir = bench_out;
            opt.run_comparison = !bench_skip_cmp;
            opt.comparison.steps = bench_steps;
            return cmd_bounds_bench(opt, std::cout);
        }
        if (bias->parsed()) return cmd_bias_bound(bias_opt, std::cout);
        if (gen->parsed()) return cmd_gen_rates(gen_out, gen_n, gen_seed, std::cout);
    } catch (const polis::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const polis::DegeneracyError& e) {
        std::cerr << "degeneracy: " << e.what() << "\n";
        return kExitDegeneracy;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
