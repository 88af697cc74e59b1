#include "polis/divergence_bounds.hpp"

#include <algorithm>
#include <cmath>

namespace polis {

void PairwiseDivergences::set(size_t i, size_t j, double log_value) {
    if (log_value > kLogDivergenceCap) {
        log_value = kLogDivergenceCap;
        saturated = true;
    }
    log_d[i * K + j] = log_value;
}

void MixtureSpec::validate() const {
    auto check_weights = [](const Vec& w, const char* which) {
        if (w.empty()) throw ConfigError(std::string(which) + " mixture has no components");
        double sum = 0.0;
        for (double x : w) {
            if (x < 0.0) throw ConfigError(std::string(which) + " mixture weight is negative");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ConfigError(std::string(which) + " mixture weights sum to " +
                              std::to_string(sum) + ", expected 1");
    };
    check_weights(zeta, "future");
    check_weights(mu, "past");
    if (pairwise.L != zeta.size() || pairwise.K != mu.size())
        throw ConfigError("pairwise divergence table does not match mixture sizes");
}

PairwiseDivergences pairwise_gaussian(std::span<const double> future_means,
                                      std::span<const double> past_means, int dim,
                                      std::span<const double> sigma, double order) {
    if (dim < 1 || future_means.size() % dim != 0 || past_means.size() % dim != 0)
        throw ConfigError("mean arrays must be multiples of the dimension");
    PairwiseDivergences pw;
    pw.L = future_means.size() / dim;
    pw.K = past_means.size() / dim;
    pw.order = order;
    pw.log_d.assign(pw.L * pw.K, 0.0);
    for (size_t i = 0; i < pw.L; ++i) {
        for (size_t j = 0; j < pw.K; ++j) {
            double q = 0.0;
            for (int m = 0; m < dim; ++m) {
                double d = future_means[i * dim + m] - past_means[j * dim + m];
                if (d == 0.0) continue;
                if (sigma[m] == 0.0) {
                    q = inf();
                    break;
                }
                q += d * d / (sigma[m] * sigma[m]);
            }
            pw.set(i, j, 0.5 * order * q);
        }
    }
    return pw;
}

MixtureSpec polis_mixture(const GaussianHyperPolicy& hp, const EstimatorConfig& cfg, long T) {
    cfg.validate();
    MixtureSpec spec;
    const double cg = c_gamma(cfg.gamma, cfg.beta);
    const double cw = c_omega(cfg.omega, cfg.alpha);
    spec.zeta.resize(cfg.beta);
    for (long j = 0; j < cfg.beta; ++j)
        spec.zeta[j] = std::pow(cfg.gamma, static_cast<double>(j)) / cg;
    spec.mu.resize(cfg.alpha);
    for (long k = 0; k < cfg.alpha; ++k)
        spec.mu[k] = std::pow(cfg.omega, static_cast<double>(cfg.alpha - 1 - k)) / cw;

    const int d = hp.theta_dim();
    Vec fut_means(static_cast<size_t>(cfg.beta) * d), win_means(static_cast<size_t>(cfg.alpha) * d);
    for (long j = 0; j < cfg.beta; ++j)
        hp.mean_into(T + 1 + j, {fut_means.data() + static_cast<size_t>(j) * d,
                                 static_cast<size_t>(d)});
    for (long k = 0; k < cfg.alpha; ++k)
        hp.mean_into(T - cfg.alpha + 1 + k, {win_means.data() + static_cast<size_t>(k) * d,
                                             static_cast<size_t>(d)});
    Vec sigma = hp.sigma();
    spec.pairwise = pairwise_gaussian(fut_means, win_means, d, sigma, 2.0);
    return spec;
}

PairwiseDivergences pairwise_d2(const GaussianHyperPolicy& hp, const EstimatorConfig& cfg,
                                long T) {
    return polis_mixture(hp, cfg, T).pairwise;
}

VariationalParams uniform_variational_params(const MixtureSpec& spec) {
    VariationalParams vp;
    vp.L = spec.L();
    vp.K = spec.K();
    vp.psi.resize(vp.L * vp.K);
    vp.phi.resize(vp.L * vp.K);
    for (size_t i = 0; i < vp.L; ++i)
        for (size_t j = 0; j < vp.K; ++j) {
            vp.psi_at(i, j) = spec.mu[j] / static_cast<double>(vp.L);
            vp.phi_at(i, j) = spec.zeta[i] / static_cast<double>(vp.K);
        }
    return vp;
}

void check_feasible(const MixtureSpec& spec, const VariationalParams& vp, double tol) {
    if (vp.L != spec.L() || vp.K != spec.K())
        throw ConfigError("variational parameters do not match the mixture sizes");
    for (double x : vp.psi)
        if (x < 0.0) throw ConfigError("psi has a negative entry");
    for (double x : vp.phi)
        if (x < 0.0) throw ConfigError("phi has a negative entry");
    for (size_t j = 0; j < vp.K; ++j) {
        double col = 0.0;
        for (size_t i = 0; i < vp.L; ++i) col += vp.psi_at(i, j);
        if (std::abs(col - spec.mu[j]) > tol)
            throw ConfigError("psi column " + std::to_string(j) + " sums to " +
                              std::to_string(col) + ", expected mu_j");
    }
    for (size_t i = 0; i < vp.L; ++i) {
        double row = 0.0;
        for (size_t j = 0; j < vp.K; ++j) row += vp.phi_at(i, j);
        if (std::abs(row - spec.zeta[i]) > tol)
            throw ConfigError("phi row " + std::to_string(i) + " sums to " +
                              std::to_string(row) + ", expected zeta_i");
    }
}

double bound_variational(const MixtureSpec& spec, const VariationalParams& vp, double order) {
    spec.validate();
    check_feasible(spec, vp);
    if (order <= 1.0) throw std::domain_error("variational bound needs order > 1");
    if (spec.pairwise.order != order)
        throw ConfigError("pairwise table was built at a different order");
    double sum = 0.0;
    for (size_t i = 0; i < vp.L; ++i)
        for (size_t j = 0; j < vp.K; ++j) {
            double phi = vp.phi_at(i, j), psi = vp.psi_at(i, j);
            if (phi == 0.0) continue;  // 0^order kills the term whatever psi is
            if (psi == 0.0) return inf();
            // phi^a psi^{1-a} d^{a-1}, evaluated in logs
            double lg = order * std::log(phi) + (1.0 - order) * std::log(psi) +
                        (order - 1.0) * spec.pairwise.log_at(i, j);
            sum += std::exp(lg);
        }
    return std::pow(sum, 1.0 / (order - 1.0));
}

Vec optimal_psi_given_phi(const MixtureSpec& spec, const Vec& phi, bool* fallback) {
    spec.validate();
    const size_t L = spec.L(), K = spec.K();
    const double e = (spec.pairwise.order - 1.0) / spec.pairwise.order;
    Vec psi(L * K, 0.0);
    if (fallback) *fallback = false;
    for (size_t j = 0; j < K; ++j) {
        double denom = 0.0;
        for (size_t i = 0; i < L; ++i)
            denom += phi[i * K + j] * std::exp(e * spec.pairwise.log_at(i, j));
        if (denom <= 0.0 || !std::isfinite(denom)) {
            if (fallback) *fallback = true;
            for (size_t i = 0; i < L; ++i) psi[i * K + j] = spec.mu[j] / static_cast<double>(L);
            continue;
        }
        for (size_t i = 0; i < L; ++i)
            psi[i * K + j] = spec.mu[j] * phi[i * K + j] *
                             std::exp(e * spec.pairwise.log_at(i, j)) / denom;
    }
    return psi;
}

Vec optimal_phi_given_psi(const MixtureSpec& spec, const Vec& psi, bool* fallback) {
    spec.validate();
    const size_t L = spec.L(), K = spec.K();
    Vec phi(L * K, 0.0);
    if (fallback) *fallback = false;
    for (size_t i = 0; i < L; ++i) {
        double denom = 0.0;
        for (size_t j = 0; j < K; ++j)
            denom += psi[i * K + j] * std::exp(-spec.pairwise.log_at(i, j));
        if (denom <= 0.0 || !std::isfinite(denom)) {
            if (fallback) *fallback = true;
            for (size_t j = 0; j < K; ++j) phi[i * K + j] = spec.zeta[i] / static_cast<double>(K);
            continue;
        }
        for (size_t j = 0; j < K; ++j)
            phi[i * K + j] = spec.zeta[i] * psi[i * K + j] *
                             std::exp(-spec.pairwise.log_at(i, j)) / denom;
    }
    return phi;
}

DirectOptResult bound_direct_opt(const MixtureSpec& spec,
                                 std::optional<VariationalParams> warm_start, int iters) {
    if (iters < 1) throw std::domain_error("direct optimization needs iters >= 1");
    spec.validate();
    VariationalParams vp = warm_start ? std::move(*warm_start) : uniform_variational_params(spec);
    check_feasible(spec, vp);
    DirectOptResult res;
    res.vp = std::move(vp);
    for (int it = 0; it < iters; ++it) {
        res.vp.phi = optimal_phi_given_psi(spec, res.vp.psi);
        res.vp.psi = optimal_psi_given_phi(spec, res.vp.phi);
        res.iterations = it + 1;
    }
    res.bound = bound_variational(spec, res.vp, spec.pairwise.order);
    return res;
}

double bound_two_steps_psi_first(const MixtureSpec& spec) {
    spec.validate();
    double s = 0.0;
    for (size_t i = 0; i < spec.L(); ++i) {
        double u = 0.0;  // harmonic-mean denominator for component i
        for (size_t j = 0; j < spec.K(); ++j)
            u += spec.mu[j] * std::exp(-spec.pairwise.log_at(i, j));
        s += spec.zeta[i] / std::sqrt(u);
    }
    return s * s;
}

double bound_two_steps_phi_first(const MixtureSpec& spec) {
    spec.validate();
    double w = 0.0;
    for (size_t j = 0; j < spec.K(); ++j) {
        double z = 0.0;
        for (size_t i = 0; i < spec.L(); ++i)
            z += spec.zeta[i] * std::exp(0.5 * spec.pairwise.log_at(i, j));
        w += spec.mu[j] / (z * z);
    }
    return 1.0 / w;
}

double bound_uniform_psi(const MixtureSpec& spec) {
    spec.validate();
    const double L = static_cast<double>(spec.L());
    double s = 0.0;
    for (size_t i = 0; i < spec.L(); ++i) {
        double u = 0.0;
        for (size_t j = 0; j < spec.K(); ++j)
            u += spec.mu[j] * std::exp(-spec.pairwise.log_at(i, j));
        s += spec.zeta[i] * spec.zeta[i] * L / u;
    }
    return s;
}

double bound_uniform_phi(const MixtureSpec& spec) {
    spec.validate();
    const double K = static_cast<double>(spec.K());
    double s = 0.0;
    for (size_t j = 0; j < spec.K(); ++j) {
        double z = 0.0;
        for (size_t i = 0; i < spec.L(); ++i)
            z += spec.zeta[i] * std::exp(0.5 * spec.pairwise.log_at(i, j));
        s += z * z / (spec.mu[j] * K * K);
    }
    return s;
}

PolisDivergenceBound polis_divergence_bound_from_spec(const MixtureSpec& spec,
                                                      const EstimatorConfig& cfg) {
    PolisDivergenceBound out;
    out.d2_bound = bound_two_steps_psi_first(spec);
    out.saturated = spec.pairwise.saturated;
    const double cw = c_omega(cfg.omega, cfg.alpha);
    const double cg = c_gamma(cfg.gamma, cfg.beta);
    out.B = out.d2_bound * cg * cg / cw;
    return out;
}

PolisDivergenceBound polis_divergence_bound(const GaussianHyperPolicy& hp,
                                            const EstimatorConfig& cfg, long T) {
    return polis_divergence_bound_from_spec(polis_mixture(hp, cfg, T), cfg);
}

double variance_bound(double reward_bound, const EstimatorConfig& cfg, double d2_value) {
    if (d2_value < 1.0) throw std::domain_error("d2 divergence value must be >= 1");
    if (reward_bound < 0.0) throw std::domain_error("reward bound must be nonnegative");
    const double ca = c_gamma(cfg.gamma, cfg.alpha);
    const double cb = c_gamma(cfg.gamma, cfg.beta);
    return 2.0 * reward_bound * reward_bound * (ca * ca + cb * cb * d2_value);
}

double cantelli_lower_bound(double j_bar, double delta, double reward_bound,
                            const EstimatorConfig& cfg, double B_value) {
    if (delta <= 0.0 || delta >= 1.0) throw std::domain_error("delta must lie in (0, 1)");
    const double ca = c_gamma(cfg.gamma, cfg.alpha);
    const double cw = c_omega(cfg.omega, cfg.alpha);
    return j_bar - std::sqrt((1.0 - delta) / delta * 2.0 * reward_bound * reward_bound *
                             (ca * ca + cw * B_value));
}

}  // namespace polis
