#pragma once

#include <optional>
#include <span>

#include "polis/estimation.hpp"
#include "polis/hyper_policy.hpp"

namespace polis {

// Pairwise exponentiated alpha-Renyi divergences between the future mixture
// components P_i (rows) and past components Q_j (columns), stored as logs.
// Entries are capped at exp(700) with a sticky saturation flag so orderings
// survive overflow.
struct PairwiseDivergences {
    size_t L = 0, K = 0;
    double order = 2.0;
    Vec log_d;  // L x K row-major, entries >= 0 after capping
    bool saturated = false;

    double log_at(size_t i, size_t j) const { return log_d[i * K + j]; }
    double at(size_t i, size_t j) const { return std::exp(log_at(i, j)); }
    void set(size_t i, size_t j, double log_value);
};

// Future mixture Psi (weights zeta over rows) against past mixture Phi
// (weights mu over columns), with their pairwise divergences at order 2.
struct MixtureSpec {
    Vec zeta;
    Vec mu;
    PairwiseDivergences pairwise;

    void validate() const;
    size_t L() const { return zeta.size(); }
    size_t K() const { return mu.size(); }
};

// Pairwise table from shared-sigma Gaussians given by their means (1-D rows/
// columns are mean values; multivariate uses flat [index][dim]).
PairwiseDivergences pairwise_gaussian(std::span<const double> future_means,
                                      std::span<const double> past_means, int dim,
                                      std::span<const double> sigma, double order = 2.0);

// The POLIS mixtures at retrain time T: zeta_s = gamma-hat^s / C_gamma(beta),
// mu_t = omega^{T-t} / C_omega, components nu_rho(.|time).
MixtureSpec polis_mixture(const GaussianHyperPolicy& hp, const EstimatorConfig& cfg, long T);

// beta x alpha table of renyi2_exp values for the POLIS mixtures.
PairwiseDivergences pairwise_d2(const GaussianHyperPolicy& hp, const EstimatorConfig& cfg,
                                long T);

struct VariationalParams {
    size_t L = 0, K = 0;
    Vec psi;  // columns sum to mu_j
    Vec phi;  // rows sum to zeta_i

    double& psi_at(size_t i, size_t j) { return psi[i * K + j]; }
    double& phi_at(size_t i, size_t j) { return phi[i * K + j]; }
    double psi_at(size_t i, size_t j) const { return psi[i * K + j]; }
    double phi_at(size_t i, size_t j) const { return phi[i * K + j]; }
};

VariationalParams uniform_variational_params(const MixtureSpec& spec);
void check_feasible(const MixtureSpec& spec, const VariationalParams& vp, double tol = 1e-10);

// Lemma-style variational bound, returned on the d_alpha scale (the
// (order-1)-th root of the double sum).
double bound_variational(const MixtureSpec& spec, const VariationalParams& vp,
                         double order = 2.0);

// Closed-form coordinate minimizers; both restore feasibility exactly.
// Degenerate all-zero columns/rows fall back to the uniform split and set
// *fallback when provided.
Vec optimal_psi_given_phi(const MixtureSpec& spec, const Vec& phi, bool* fallback = nullptr);
Vec optimal_phi_given_psi(const MixtureSpec& spec, const Vec& psi, bool* fallback = nullptr);

struct DirectOptResult {
    double bound = 0.0;
    VariationalParams vp;
    int iterations = 0;
};

// Alternating closed-form updates (phi first, then psi); monotone in the
// variational bound. warm_start gives the no-reset variant.
DirectOptResult bound_direct_opt(const MixtureSpec& spec,
                                 std::optional<VariationalParams> warm_start = std::nullopt,
                                 int iters = 20);

// The four closed-form mixture bounds at order 2, all on the d_2 scale.
double bound_two_steps_psi_first(const MixtureSpec& spec);
double bound_two_steps_phi_first(const MixtureSpec& spec);
double bound_uniform_psi(const MixtureSpec& spec);
double bound_uniform_phi(const MixtureSpec& spec);

// The bound POLIS trains against (Lemma 3): d2 <= (C_omega / C_gamma(beta)^2) B.
struct PolisDivergenceBound {
    double d2_bound = 1.0;  // bound on d2(Psi || Phi)
    double B = 0.0;         // the underbraced B_{T,alpha,beta}
    bool saturated = false;
};
PolisDivergenceBound polis_divergence_bound(const GaussianHyperPolicy& hp,
                                            const EstimatorConfig& cfg, long T);
PolisDivergenceBound polis_divergence_bound_from_spec(const MixtureSpec& spec,
                                                      const EstimatorConfig& cfg);

// Lemma 2: Var[J-bar] <= 2 R^2 (C_gamma(alpha)^2 + C_gamma(beta)^2 d2).
double variance_bound(double reward_bound, const EstimatorConfig& cfg, double d2_value);

// Theorem 1: J-bar - sqrt((1-delta)/delta 2 R^2 (C_gamma(alpha)^2 + C_omega B)).
double cantelli_lower_bound(double j_bar, double delta, double reward_bound,
                            const EstimatorConfig& cfg, double B_value);

}  // namespace polis
