#include "polis/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace polis {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    return out;
}

// Bounded worker pool over a list of jobs; results land in submission order.
template <typename R>
std::vector<R> pooled(const std::vector<std::function<R()>>& jobs, int max_workers) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    const size_t workers =
        static_cast<size_t>(std::max(1, max_workers > 0 ? std::min(max_workers, hw) : hw));
    std::vector<R> results(jobs.size());
    std::vector<std::future<void>> inflight;
    size_t next = 0;
    auto drain_one = [&]() {
        inflight.front().get();
        inflight.erase(inflight.begin());
    };
    std::exception_ptr first_error;
    while (next < jobs.size() || !inflight.empty()) {
        while (next < jobs.size() && inflight.size() < workers) {
            size_t idx = next++;
            inflight.push_back(std::async(std::launch::async, [&jobs, &results, idx]() {
                results[idx] = jobs[idx]();
            }));
        }
        try {
            drain_one();
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

void write_run_csv(std::ostream& out, const RunRecord& rec, const std::string& hash) {
    const size_t d = rec.rows.empty() ? 0 : rec.rows.front().theta.size();
    out << "t,phase";
    for (size_t i = 0; i < d; ++i) out << ",theta_" << i;
    out << ",action,reward,cum_return,retrain,config_hash\n";
    for (const auto& r : rec.rows) {
        out << r.t << "," << (r.target_phase ? "target" : "behavioral");
        for (double v : r.theta) out << "," << fmt_double(v);
        out << "," << fmt_double(r.action) << "," << fmt_double(r.reward) << ","
            << fmt_double(r.cum_return) << "," << (r.retrained ? 1 : 0) << "," << hash << "\n";
    }
}

void write_diag_csv(std::ostream& out, const std::vector<std::pair<std::uint64_t, RunRecord>>& runs,
                    const std::string& hash) {
    out << "seed,retrain,t,epoch,j_past,j_future,B,penalty,grad_future_norm,grad_past_norm,"
           "grad_penalty_norm,degenerate,config_hash\n";
    for (const auto& [seed, rec] : runs) {
        for (const auto& dr : rec.diagnostics) {
            out << seed << "," << dr.retrain_index << "," << dr.t << "," << dr.epoch << ","
                << fmt_double(dr.j_past) << "," << fmt_double(dr.j_future) << ","
                << fmt_double(dr.B) << "," << fmt_double(dr.penalty) << ","
                << fmt_double(dr.grad_future_norm) << "," << fmt_double(dr.grad_past_norm) << ","
                << fmt_double(dr.grad_penalty_norm) << "," << (dr.degenerate ? 1 : 0) << ","
                << hash << "\n";
        }
    }
}

nlohmann::json config_json(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds) {
    nlohmann::json j;
    for (const auto& line : [&]() {
             std::vector<std::pair<std::string, std::string>> kv;
             std::istringstream in(cfg.canonical());
             std::string l;
             while (std::getline(in, l)) {
                 auto eq = l.find('=');
                 kv.emplace_back(l.substr(0, eq), l.substr(eq + 1));
             }
             return kv;
         }())
        j["config"][line.first] = line.second;
    j["seeds"] = seeds;
    j["config_hash"] = config_hash(cfg, seeds);
    return j;
}

}  // namespace

int cmd_run(const RunOptions& opt, std::ostream& log) {
    if (opt.seeds.empty()) throw ConfigError("seed list is empty");
    if (opt.algorithm != "polis" && opt.algorithm != "stationary")
        throw ConfigError("algorithm must be 'polis' or 'stationary'");
    opt.config.validate();
    ensure_dir(opt.out_dir);
    const std::string hash = config_hash(opt.config, opt.seeds);

    std::vector<std::function<RunRecord()>> jobs;
    for (std::uint64_t seed : opt.seeds) {
        RunConfig cfg = opt.config;
        cfg.seed = seed;
        const bool stationary = opt.algorithm == "stationary";
        jobs.push_back([cfg, stationary]() {
            return stationary ? run_baseline_stationary(cfg) : run_lifelong(cfg);
        });
    }
    std::vector<RunRecord> recs = pooled<RunRecord>(jobs, opt.max_workers);

    std::vector<std::pair<std::uint64_t, RunRecord>> runs;
    for (size_t i = 0; i < recs.size(); ++i) {
        auto path = fs::path(opt.out_dir) / ("run_seed" + std::to_string(opt.seeds[i]) + ".csv");
        auto out = open_out(path);
        write_run_csv(out, recs[i], hash);
        runs.emplace_back(opt.seeds[i], std::move(recs[i]));
    }

    {
        auto out = open_out(fs::path(opt.out_dir) / "aggregate.csv");
        out << "target_step,mean_cum_return,std_cum_return,config_hash\n";
        const long target_len = opt.config.target_len;
        const long B = opt.config.behavioral_length();
        for (long s = 0; s < target_len; ++s) {
            Vec vals;
            for (const auto& [seed, rec] : runs)
                vals.push_back(rec.rows[static_cast<size_t>(B + s)].cum_return);
            out << (s + 1) << "," << fmt_double(mean_of(vals)) << "," << fmt_double(stddev_of(vals))
                << "," << hash << "\n";
        }
    }
    {
        auto out = open_out(fs::path(opt.out_dir) / "diagnostics.csv");
        write_diag_csv(out, runs, hash);
    }
    {
        auto out = open_out(fs::path(opt.out_dir) / "run_meta.json");
        nlohmann::json j = config_json(opt.config, opt.seeds);
        j["algorithm"] = opt.algorithm;
        out << j.dump(2) << "\n";
    }

    Vec finals;
    int skipped = 0, total_retrains = 0;
    for (const auto& [seed, rec] : runs) {
        finals.push_back(rec.final_cum_return);
        skipped += rec.skipped_retrains;
        total_retrains += rec.retrains;
    }
    log << opt.algorithm << " on " << opt.config.env << ": " << runs.size()
        << " seed(s), final cumulative return " << fmt_double(mean_of(finals)) << " +- "
        << fmt_double(stddev_of(finals)) << "\n";
    if (skipped > 0)
        log << "warning: " << skipped << "/" << total_retrains
            << " retrains skipped on estimator degeneracy\n";
    // A run where every retrain degenerated never trained at all.
    return (total_retrains > 0 && skipped == total_retrains) ? kExitDegeneracy : kExitOk;
}

int cmd_sweep(const SweepOptions& opt, std::ostream& log) {
    if (opt.seeds.empty()) throw ConfigError("seed list is empty");
    if (opt.lambda_grid.empty() || opt.beta_grid.empty())
        throw ConfigError("sweep grid must be nonempty");
    for (long b : opt.beta_grid)
        if (b <= 1)
            throw ConfigError("beta=1 is not considered (no mixture in the variance bound)");
    opt.config.validate();
    ensure_dir(opt.out_dir);

    struct Cell {
        double lambda;
        long beta;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    std::vector<std::function<RunRecord()>> jobs;
    for (double l : opt.lambda_grid)
        for (long b : opt.beta_grid)
            for (std::uint64_t seed : opt.seeds) {
                RunConfig cfg = opt.config;
                cfg.lambda = l;
                cfg.beta = b;
                cfg.seed = seed;
                cells.push_back({l, b, seed});
                jobs.push_back([cfg]() { return run_lifelong(cfg); });
            }
    std::vector<RunRecord> recs = pooled<RunRecord>(jobs, opt.max_workers);

    const std::string hash = config_hash(opt.config, opt.seeds);
    auto out = open_out(fs::path(opt.out_dir) / "sweep.csv");
    out << "lambda,beta,seed,return,reward_std,config_hash\n";
    for (size_t i = 0; i < cells.size(); ++i)
        out << fmt_double(cells[i].lambda) << "," << cells[i].beta << "," << cells[i].seed << ","
            << fmt_double(recs[i].final_cum_return) << ","
            << fmt_double(recs[i].target_reward_std) << "," << hash << "\n";
    {
        auto meta = open_out(fs::path(opt.out_dir) / "sweep_meta.json");
        nlohmann::json j = config_json(opt.config, opt.seeds);
        j["lambda_grid"] = opt.lambda_grid;
        j["beta_grid"] = opt.beta_grid;
        meta << j.dump(2) << "\n";
    }
    log << "sweep: " << cells.size() << " rows written\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Bounds benchmark

namespace {

// Adaptive Simpson on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

// Composite: fixed panels so narrow peaks cannot slip between the sample
// points of the top-level rule.
double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const int panels = 256;
    const double w = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double pa = a + p * w, pb = pa + w, pm = 0.5 * (pa + pb);
        double fa = f(pa), fm = f(pm), fb = f(pb);
        double whole = w / 6.0 * (fa + 4.0 * fm + fb);
        total += adaptive_simpson(f, pa, pb, fa, fm, fb, whole, tol / panels, 40);
    }
    return total;
}

double mixture_log_pdf(double x, const Vec& means, const Vec& weights, double sigma) {
    double mx = -inf();
    Vec ls(means.size());
    for (size_t i = 0; i < means.size(); ++i) {
        double z = (x - means[i]) / sigma;
        ls[i] = std::log(weights[i]) - 0.5 * z * z;
        mx = std::max(mx, ls[i]);
    }
    double s = 0.0;
    for (double l : ls) s += std::exp(l - mx);
    return mx + std::log(s) - std::log(sigma * std::sqrt(2.0 * M_PI));
}

}  // namespace

double quadrature_mixture_d2(const Vec& future_means, const Vec& future_weights,
                             const Vec& past_means, const Vec& past_weights, double sigma) {
    double lo = inf(), hi = -inf();
    for (double m : future_means) lo = std::min(lo, m), hi = std::max(hi, m);
    for (double m : past_means) lo = std::min(lo, m), hi = std::max(hi, m);
    // psi^2/phi peaks at 2 mu_i - mu_j, outside the component means when the
    // mixtures are far apart; it also spans hundreds of orders of magnitude,
    // so integrate peak-normalized in log space.
    double span_lo = 2.0 * lo - hi, span_hi = 2.0 * hi - lo;
    lo = span_lo - 24.0 * sigma;
    hi = span_hi + 24.0 * sigma;
    auto log_f = [&](double x) {
        return 2.0 * mixture_log_pdf(x, future_means, future_weights, sigma) -
               mixture_log_pdf(x, past_means, past_weights, sigma);
    };
    double peak = -inf();
    const int grid = 4000;
    for (int i = 0; i <= grid; ++i) peak = std::max(peak, log_f(lo + (hi - lo) * i / grid));
    double integral =
        integrate([&](double x) { return std::exp(log_f(x) - peak); }, lo, hi, 1e-9 * (hi - lo));
    return std::exp(peak + std::log(integral));
}

int cmd_bounds_bench(const BoundsBenchOptions& opt, std::ostream& log) {
    if (opt.instances < 1) throw ConfigError("need at least one benchmark instance");
    ensure_dir(opt.out_dir);
    Rng rng = make_rng(opt.seed, Stream::bench);
    const std::string hash =
        hash_hex(fnv1a64("bounds_bench:" + std::to_string(opt.instances) + ":" +
                         std::to_string(opt.seed)));

    auto out = open_out(fs::path(opt.out_dir) / "bounds_bench.csv");
    out << "instance,method,bound,oracle,wall_time_us,config_hash\n";

    std::uniform_int_distribution<int> size_dist(1, 5);
    std::uniform_real_distribution<double> mean_dist(-3.0, 3.0);
    std::uniform_real_distribution<double> sigma_dist(0.5, 1.5);
    std::uniform_real_distribution<double> weight_dist(0.1, 1.0);

    Vec mean_bound_log(kNumBoundMethods, 0.0);
    std::optional<VariationalParams> carried;  // no-reset warm start across instances
    for (long inst = 0; inst < opt.instances; ++inst) {
        const int L = size_dist(rng), K = size_dist(rng);
        const double sigma = sigma_dist(rng);
        Vec fm(L), pm(K), zw(L), mw(K);
        for (auto& m : fm) m = mean_dist(rng);
        for (auto& m : pm) m = mean_dist(rng);
        double zs = 0.0, ms = 0.0;
        for (auto& w : zw) zs += (w = weight_dist(rng));
        for (auto& w : mw) ms += (w = weight_dist(rng));
        for (auto& w : zw) w /= zs;
        for (auto& w : mw) w /= ms;

        MixtureSpec spec;
        spec.zeta = zw;
        spec.mu = mw;
        Vec sig(1, sigma);
        spec.pairwise = pairwise_gaussian(fm, pm, 1, sig, 2.0);

        const double oracle = quadrature_mixture_d2(fm, zw, pm, mw, sigma);
        for (int mi = 0; mi < kNumBoundMethods; ++mi) {
            const BoundMethod method = static_cast<BoundMethod>(mi);
            auto t0 = std::chrono::steady_clock::now();
            double bound = 0.0;
            switch (method) {
                case BoundMethod::two_steps_psi_first:
                    bound = bound_two_steps_psi_first(spec);
                    break;
                case BoundMethod::two_steps_phi_first:
                    bound = bound_two_steps_phi_first(spec);
                    break;
                case BoundMethod::uniform_psi:
                    bound = bound_uniform_psi(spec);
                    break;
                case BoundMethod::uniform_phi:
                    bound = bound_uniform_phi(spec);
                    break;
                case BoundMethod::direct_opt_reset:
                    bound = bound_direct_opt(spec, std::nullopt, 20).bound;
                    break;
                case BoundMethod::direct_opt_no_reset: {
                    std::optional<VariationalParams> start;
                    if (carried && carried->L == spec.L() && carried->K == spec.K())
                        start = carried;
                    auto res = bound_direct_opt(spec, start, 20);
                    carried = res.vp;
                    bound = res.bound;
                    break;
                }
            }
            auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
            mean_bound_log[mi] += std::log(bound) / static_cast<double>(opt.instances);
            out << inst << "," << bound_method_name(method) << "," << fmt_double(bound) << ","
                << fmt_double(oracle) << "," << us << "," << hash << "\n";
        }
    }

    std::vector<int> order(kNumBoundMethods);
    for (int i = 0; i < kNumBoundMethods; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return mean_bound_log[a] < mean_bound_log[b]; });
    log << "tightness ranking (mean log bound, tighter first):\n";
    for (int i : order)
        log << "  " << bound_method_name(static_cast<BoundMethod>(i)) << " "
            << fmt_double(mean_bound_log[i]) << "\n";

    if (opt.run_comparison) {
        BoundComparisonResult cmp = run_bound_comparison(opt.comparison);
        auto cout2 = open_out(fs::path(opt.out_dir) / "bound_comparison.csv");
        cout2 << "method,step,A,log_bound,config_hash\n";
        for (int mi = 0; mi < kNumBoundMethods; ++mi)
            for (const auto& p : cmp.trajectories[mi])
                cout2 << bound_method_name(static_cast<BoundMethod>(mi)) << "," << p.step << ","
                      << fmt_double(p.A) << "," << fmt_double(p.log_bound) << "," << hash << "\n";
        log << "A-trajectory experiment written to bound_comparison.csv\n";
    }
    return kExitOk;
}

int cmd_bias_bound(const BiasBoundOptions& opt, std::ostream& log) {
    opt.estimator.validate();
    if (opt.estimator.gamma >= 1.0)
        throw ConfigError("bias bounds are undefined for gamma = 1 (1/(1-gamma) term)");
    const double tight = bias_bound_tight(opt.inputs, opt.estimator);
    log << "tight bound (0 < omega <= 1): " << fmt_double(tight);
    if (opt.estimator.omega == 1.0) log << "   [omega = 1 limit branch]";
    log << "\n";
    if (opt.estimator.omega < 1.0) {
        const double loose = bias_bound(opt.inputs, opt.estimator);
        log << "loose bound (omega < 1):     " << fmt_double(loose) << "\n";
    } else {
        log << "loose bound:                 not applicable at omega = 1\n";
    }
    return kExitOk;
}

int cmd_gen_rates(const std::string& out_path, long n, std::uint64_t seed, std::ostream& log) {
    write_synthetic_rates_csv(out_path, n, seed);
    log << "wrote " << n << " synthetic rates to " << out_path << "\n";
    return kExitOk;
}

}  // namespace polis
