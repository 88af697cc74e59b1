#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "polis/divergence_bounds.hpp"

using namespace polis;

namespace {

struct Instance {
    Vec fut_means, fut_w, past_means, past_w;
    double sigma = 1.0;
    MixtureSpec spec;
};

Instance random_instance(Rng& rng, double order = 2.0, int max_size = 5) {
    std::uniform_int_distribution<int> size_dist(1, max_size);
    std::uniform_real_distribution<double> mean_dist(-3.0, 3.0);
    std::uniform_real_distribution<double> sigma_dist(0.5, 1.5);
    std::uniform_real_distribution<double> weight_dist(0.1, 1.0);
    Instance in;
    int L = size_dist(rng), K = size_dist(rng);
    in.sigma = sigma_dist(rng);
    in.fut_means.resize(L);
    in.past_means.resize(K);
    in.fut_w.resize(L);
    in.past_w.resize(K);
    for (auto& m : in.fut_means) m = mean_dist(rng);
    for (auto& m : in.past_means) m = mean_dist(rng);
    double zs = 0.0, ms = 0.0;
    for (auto& w : in.fut_w) zs += (w = weight_dist(rng));
    for (auto& w : in.past_w) ms += (w = weight_dist(rng));
    for (auto& w : in.fut_w) w /= zs;
    for (auto& w : in.past_w) w /= ms;
    in.spec.zeta = in.fut_w;
    in.spec.mu = in.past_w;
    Vec sg(1, in.sigma);
    in.spec.pairwise = pairwise_gaussian(in.fut_means, in.past_means, 1, sg, order);
    return in;
}

// Mixtures whose components are all the same Gaussian.
MixtureSpec equal_component_spec(const Vec& zeta, const Vec& mu) {
    MixtureSpec spec;
    spec.zeta = zeta;
    spec.mu = mu;
    Vec f(zeta.size(), 0.7), p(mu.size(), 0.7), sg(1, 0.9);
    spec.pairwise = pairwise_gaussian(f, p, 1, sg, 2.0);
    return spec;
}

double eval_bound(int method, const MixtureSpec& spec) {
    switch (method) {
        case 0: return bound_two_steps_psi_first(spec);
        case 1: return bound_two_steps_phi_first(spec);
        case 2: return bound_uniform_psi(spec);
        case 3: return bound_uniform_phi(spec);
        case 4: return bound_direct_opt(spec, std::nullopt, 20).bound;
        default: return bound_direct_opt(spec, uniform_variational_params(spec), 20).bound;
    }
}

}  // namespace

TEST_CASE("pairwise divergences: symmetry, floor, saturation") {
    GaussianHyperPolicy hp(MeanFunction(SinusoidSpec{1}), {0.7, 0.9, 0.2, 0.1}, false, {-0.4});
    EstimatorConfig cfg{6, 4, 0.9, 0.8};
    PairwiseDivergences pw = pairwise_d2(hp, cfg, 10);
    REQUIRE(pw.L == 4);
    REQUIRE(pw.K == 6);
    for (size_t i = 0; i < pw.L; ++i)
        for (size_t j = 0; j < pw.K; ++j) CHECK(pw.at(i, j) >= 1.0);
    CHECK_FALSE(pw.saturated);

    // stationary hyper-policy: all-ones matrix
    GaussianHyperPolicy st(MeanFunction(StationarySpec{2}), {1.0, -1.0}, false, {0.0, 0.0});
    PairwiseDivergences pst = pairwise_d2(st, cfg, 10);
    for (double l : pst.log_d) CHECK(l == 0.0);

    // saturation snaps to exp(700) and flags
    GaussianHyperPolicy tight(MeanFunction(SinusoidSpec{1}), {30.0, M_PI, M_PI / 2.0, 0.0},
                              false, {-3.0});
    PairwiseDivergences sat = pairwise_d2(tight, {4, 2, 1.0, 1.0}, 10);
    CHECK(sat.saturated);
    double mx = 0.0;
    for (double l : sat.log_d) mx = std::max(mx, l);
    CHECK(mx == 700.0);

    // symmetry of the underlying closed form
    CHECK(hp.renyi2_exp(3, 9) == doctest::Approx(hp.renyi2_exp(9, 3)).epsilon(1e-13));
}

TEST_CASE("pairwise entries match the quadrature oracle") {
    Rng rng = make_rng(5, Stream::bench);
    std::uniform_real_distribution<double> u(-2.0, 2.0), sg(0.4, 1.4);
    for (int rep = 0; rep < 50; ++rep) {
        double m1 = u(rng), m2 = u(rng), s = sg(rng);
        Vec f{m1}, p{m2}, sig{s};
        PairwiseDivergences pw = pairwise_gaussian(f, p, 1, sig, 2.0);
        double want = oracle::mixture_d_alpha({m1}, {1.0}, {m2}, {1.0}, s, 2.0);
        CHECK(pw.at(0, 0) == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("variational bound: feasibility and degenerate cases") {
    Rng rng = make_rng(7, Stream::bench);
    Instance in = random_instance(rng);
    VariationalParams vp = uniform_variational_params(in.spec);
    check_feasible(in.spec, vp);

    // infeasible parameters are rejected
    VariationalParams bad = vp;
    bad.psi[0] += 0.01;
    CHECK_THROWS_AS(bound_variational(in.spec, bad, 2.0), ConfigError);

    // L = K = 1: the bound *is* the pairwise divergence
    Vec f{0.4}, p{-0.3}, sg{0.8};
    MixtureSpec one;
    one.zeta = {1.0};
    one.mu = {1.0};
    one.pairwise = pairwise_gaussian(f, p, 1, sg, 2.0);
    VariationalParams vp1 = uniform_variational_params(one);
    CHECK(bound_variational(one, vp1, 2.0) == doctest::Approx(one.pairwise.at(0, 0)));

    // uniform psi and phi on equal-component identical mixtures give exactly 1
    MixtureSpec eq = equal_component_spec({0.25, 0.25, 0.25, 0.25}, {0.5, 0.5});
    VariationalParams veq = uniform_variational_params(eq);
    CHECK(bound_variational(eq, veq, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("variational bound dominates the oracle at several orders") {
    Rng rng = make_rng(9, Stream::bench);
    for (double order : {1.5, 2.0, 4.0}) {
        for (int rep = 0; rep < 200; ++rep) {
            Instance in = random_instance(rng, order, 2);
            VariationalParams vp = uniform_variational_params(in.spec);
            // random feasible perturbation: blend uniform with a random split
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (size_t j = 0; j < vp.K; ++j) {
                Vec col(vp.L);
                double s = 0.0;
                for (auto& c : col) s += (c = u(rng) + 1e-3);
                for (size_t i = 0; i < vp.L; ++i)
                    vp.psi_at(i, j) = in.spec.mu[j] * col[i] / s;
            }
            for (size_t i = 0; i < vp.L; ++i) {
                Vec row(vp.K);
                double s = 0.0;
                for (auto& c : row) s += (c = u(rng) + 1e-3);
                for (size_t j = 0; j < vp.K; ++j)
                    vp.phi_at(i, j) = in.spec.zeta[i] * row[j] / s;
            }
            double bound = bound_variational(in.spec, vp, order);
            double want = oracle::mixture_d_alpha(in.fut_means, in.fut_w, in.past_means,
                                                  in.past_w, in.sigma, order);
            CHECK(bound >= want * (1.0 - 1e-6));
        }
    }
}

TEST_CASE("closed-form coordinate updates") {
    Rng rng = make_rng(11, Stream::bench);
    for (int rep = 0; rep < 50; ++rep) {
        Instance in = random_instance(rng);
        VariationalParams vp = uniform_variational_params(in.spec);

        // updates restore feasibility exactly and never increase the bound
        double prev = bound_variational(in.spec, vp, 2.0);
        for (int it = 0; it < 50; ++it) {
            vp.phi = optimal_phi_given_psi(in.spec, vp.psi);
            vp.psi = optimal_psi_given_phi(in.spec, vp.phi);
            check_feasible(in.spec, vp, 1e-9);
            double cur = bound_variational(in.spec, vp, 2.0);
            CHECK(cur <= prev * (1.0 + 1e-12));
            prev = cur;
        }
    }

    // fixed point on the 1x1 mixture
    Vec f{0.4}, p{-0.3}, sg{0.8};
    MixtureSpec one;
    one.zeta = {1.0};
    one.mu = {1.0};
    one.pairwise = pairwise_gaussian(f, p, 1, sg, 2.0);
    Vec phi = optimal_phi_given_psi(one, Vec{1.0});
    CHECK(phi[0] == doctest::Approx(1.0));
    Vec psi = optimal_psi_given_phi(one, phi);
    CHECK(psi[0] == doctest::Approx(1.0));

    // all-zero column falls back to the uniform split with a diagnostic
    Rng rng2 = make_rng(12, Stream::bench);
    Instance in2 = random_instance(rng2);
    Vec zero_phi(in2.spec.L() * in2.spec.K(), 0.0);
    bool fellback = false;
    Vec psi2 = optimal_psi_given_phi(in2.spec, zero_phi, &fellback);
    CHECK(fellback);
    for (size_t j = 0; j < in2.spec.K(); ++j) {
        double col = 0.0;
        for (size_t i = 0; i < in2.spec.L(); ++i) col += psi2[i * in2.spec.K() + j];
        CHECK(col == doctest::Approx(in2.spec.mu[j]));
    }
}

TEST_CASE("direct optimization against a brute-force grid on a 2x2 instance") {
    Rng rng = make_rng(13, Stream::bench);
    Instance in = random_instance(rng, 2.0, 2);
    while (in.spec.L() != 2 || in.spec.K() != 2) in = random_instance(rng, 2.0, 2);

    DirectOptResult res = bound_direct_opt(in.spec, std::nullopt, 200);

    // Independent grid-search oracle over the 4 free fractions (psi columns
    // and phi rows are 1-D once feasibility pins their sums), refined twice
    // around the incumbent.
    const double d00 = in.spec.pairwise.at(0, 0), d01 = in.spec.pairwise.at(0, 1);
    const double d10 = in.spec.pairwise.at(1, 0), d11 = in.spec.pairwise.at(1, 1);
    const double z0 = in.spec.zeta[0], z1 = in.spec.zeta[1];
    const double m0 = in.spec.mu[0], m1 = in.spec.mu[1];
    auto value = [&](double a, double b, double c, double d) {
        // psi column j splits mu_j by (a, 1-a), (b, 1-b); phi row i splits
        // zeta_i by (c, 1-c), (d, 1-d)
        double psi00 = m0 * a, psi10 = m0 * (1 - a);
        double psi01 = m1 * b, psi11 = m1 * (1 - b);
        double phi00 = z0 * c, phi01 = z0 * (1 - c);
        double phi10 = z1 * d, phi11 = z1 * (1 - d);
        return phi00 * phi00 / psi00 * d00 + phi01 * phi01 / psi01 * d01 +
               phi10 * phi10 / psi10 * d10 + phi11 * phi11 / psi11 * d11;
    };
    double best = 1e300;
    double ca = 0.5, cb = 0.5, cc = 0.5, cd = 0.5, half = 0.5;
    for (int stage = 0; stage < 3; ++stage) {
        const int n = 40;
        double ba = ca, bb = cb, bc = cc, bd = cd;
        for (int ia = 0; ia <= n; ++ia)
            for (int ib = 0; ib <= n; ++ib)
                for (int ic = 0; ic <= n; ++ic)
                    for (int id = 0; id <= n; ++id) {
                        double a = std::clamp(ca + half * (2.0 * ia / n - 1.0), 1e-6, 1 - 1e-6);
                        double b = std::clamp(cb + half * (2.0 * ib / n - 1.0), 1e-6, 1 - 1e-6);
                        double c = std::clamp(cc + half * (2.0 * ic / n - 1.0), 1e-6, 1 - 1e-6);
                        double d = std::clamp(cd + half * (2.0 * id / n - 1.0), 1e-6, 1 - 1e-6);
                        double v = value(a, b, c, d);
                        if (v < best) best = v, ba = a, bb = b, bc = c, bd = d;
                    }
        ca = ba, cb = bb, cc = bc, cd = bd;
        half *= 2.0 / n;  // zoom in around the incumbent
    }
    CHECK(res.bound == doctest::Approx(best).epsilon(1e-4));
}

TEST_CASE("six bounds dominate the quadrature oracle") {
    Rng rng = make_rng(15, Stream::bench);
    for (int rep = 0; rep < 200; ++rep) {
        Instance in = random_instance(rng);
        double want = oracle::mixture_d_alpha(in.fut_means, in.fut_w, in.past_means, in.past_w,
                                              in.sigma, 2.0);
        for (int method = 0; method < 6; ++method) {
            double bound = eval_bound(method, in.spec);
            CHECK(bound >= want * (1.0 - 1e-6));
        }
    }
}

TEST_CASE("identical equal-component mixtures: psi-first, phi-first, direct hit 1") {
    Rng rng = make_rng(17, Stream::bench);
    std::uniform_int_distribution<int> size_dist(1, 5);
    std::uniform_real_distribution<double> w(0.1, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        int L = size_dist(rng), K = size_dist(rng);
        Vec zeta(L), mu(K);
        double zs = 0.0, ms = 0.0;
        for (auto& x : zeta) zs += (x = w(rng));
        for (auto& x : mu) ms += (x = w(rng));
        for (auto& x : zeta) x /= zs;
        for (auto& x : mu) x /= ms;
        MixtureSpec spec = equal_component_spec(zeta, mu);
        CHECK(bound_two_steps_psi_first(spec) == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(bound_two_steps_phi_first(spec) == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(bound_direct_opt(spec, std::nullopt, 20).bound ==
              doctest::Approx(1.0).epsilon(1e-8));
        // uniform psi hits L sum zeta^2 (1 only for uniform weights)
        double lsz = 0.0;
        for (double z : zeta) lsz += z * z;
        CHECK(bound_uniform_psi(spec) == doctest::Approx(L * lsz).epsilon(1e-10));
    }
}

TEST_CASE("degenerate single-component mixtures: every bound equals d2") {
    Vec f{1.1}, p{-0.2}, sg{0.7};
    MixtureSpec one;
    one.zeta = {1.0};
    one.mu = {1.0};
    one.pairwise = pairwise_gaussian(f, p, 1, sg, 2.0);
    double d2 = one.pairwise.at(0, 0);
    for (int method = 0; method < 6; ++method)
        CHECK(eval_bound(method, one) == doctest::Approx(d2).epsilon(1e-12));
}

TEST_CASE("direct optimization with reset dominates uniform psi") {
    Rng rng = make_rng(19, Stream::bench);
    for (int rep = 0; rep < 50; ++rep) {
        Instance in = random_instance(rng);
        double uni = bound_uniform_psi(in.spec);
        double direct = bound_direct_opt(in.spec, std::nullopt, 20).bound;
        CHECK(direct <= uni * (1.0 + 1e-10));
    }
}

TEST_CASE("warm-started direct optimization never loses to its warm start") {
    Rng rng = make_rng(21, Stream::bench);
    Instance in = random_instance(rng);
    DirectOptResult first = bound_direct_opt(in.spec, std::nullopt, 5);
    DirectOptResult second = bound_direct_opt(in.spec, first.vp, 5);
    CHECK(second.bound <= first.bound * (1.0 + 1e-12));
}

TEST_CASE("polis divergence bound: stationary case is tight at 1") {
    GaussianHyperPolicy st(MeanFunction(StationarySpec{1}), {0.2}, false, {-0.5});
    EstimatorConfig cfg{50, 10, 1.0, 1.0};
    PolisDivergenceBound b = polis_divergence_bound(st, cfg, 100);
    CHECK(b.d2_bound == doctest::Approx(1.0).epsilon(1e-10));
    // B = beta^2 / alpha when all divergences are 1 and gamma = omega = 1
    CHECK(b.B == doctest::Approx(100.0 / 50.0).epsilon(1e-10));
}

TEST_CASE("variance bound values") {
    EstimatorConfig cfg{3, 2, 0.9, 0.5};
    double ca = c_gamma(0.9, 3), cb = c_gamma(0.9, 2);
    CHECK(variance_bound(1.0, cfg, 2.0) ==
          doctest::Approx(2.0 * (ca * ca + cb * cb * 2.0)).epsilon(1e-14));
    CHECK(variance_bound(0.0, cfg, 5.0) == 0.0);
    EstimatorConfig u{4, 3, 1.0, 1.0};
    CHECK(variance_bound(2.0, u, 1.0) == doctest::Approx(2.0 * 4.0 * (16.0 + 9.0)));
    CHECK_THROWS_AS(variance_bound(1.0, cfg, 0.5), std::domain_error);
}

TEST_CASE("cantelli lower bound") {
    EstimatorConfig cfg{4, 2, 1.0, 1.0};
    // delta = 0.5: multiplier 1
    CHECK(cantelli_lower_bound(10.0, 0.5, 1.0, cfg, 0.0) ==
          doctest::Approx(10.0 - std::sqrt(2.0 * 16.0)));
    // B = 0, gamma = 1: J - alpha R sqrt(2) sqrt((1-d)/d)
    double d = 0.2;
    CHECK(cantelli_lower_bound(3.0, d, 2.0, cfg, 0.0) ==
          doctest::Approx(3.0 - 4.0 * 2.0 * std::sqrt(2.0) * std::sqrt((1.0 - d) / d)));
    // delta -> 1 removes the penalty
    CHECK(cantelli_lower_bound(3.0, 1.0 - 1e-12, 2.0, cfg, 5.0) ==
          doctest::Approx(3.0).epsilon(1e-5));
    // monotone in delta, decreasing in B
    double prev = -1e18;
    for (double dd : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        double v = cantelli_lower_bound(0.0, dd, 1.0, cfg, 1.0);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(cantelli_lower_bound(0.0, 0.3, 1.0, cfg, 2.0) <
          cantelli_lower_bound(0.0, 0.3, 1.0, cfg, 1.0));
    CHECK_THROWS_AS(cantelli_lower_bound(0.0, 0.0, 1.0, cfg, 1.0), std::domain_error);
    CHECK_THROWS_AS(cantelli_lower_bound(0.0, 1.0, 1.0, cfg, 1.0), std::domain_error);
}
