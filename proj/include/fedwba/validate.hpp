#pragma once

// Oracle/validation suites behind `validate` and the acceptance criteria:
// the OT brute-force equivalence check, the conjugate-Gaussian KL
// monotonicity check (the per-iteration ELBO-increase claim, observed as a
// nonincreasing KL to the analytic posterior), and the barycenter
// contraction check (W2 to the true parameter shrinking with client data
// size).

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "fedwba/barycenter.hpp"
#include "fedwba/metrics.hpp"
#include "fedwba/numerics.hpp"
#include "fedwba/ot.hpp"
#include "fedwba/svgd.hpp"

namespace fedwba {

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// solve_exact vs N! enumeration on random clouds, N in {2..6}, M in {1,2,5}.
inline SuiteResult ot_oracle_suite(std::uint64_t seed = 7, std::size_t instances = 200,
                                   double tol = 1e-9) {
    Rng rng(seed);
    const std::size_t ns[] = {2, 3, 4, 5, 6};
    const std::size_t ms[] = {1, 2, 5};
    double worst = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = ns[rng.uniform_index(5)];
        const std::size_t m = ms[rng.uniform_index(3)];
        Matrix a(n, m), b(n, m);
        for (double& v : a.data) v = 3.0 * rng.normal();
        for (double& v : b.data) v = 3.0 * rng.normal();
        const Matrix cost = cost_matrix(a, b);
        const double solver = solve_exact(cost).objective;
        const double oracle = brute_force_min_cost(cost);
        worst = std::max(worst, std::abs(solver - oracle));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max |assignment - enumeration| = %.3g over %zu instances",
                  worst, instances);
    return {"ot-oracle", worst <= tol, buf};
}

struct KlSuiteConfig {
    std::size_t particles = 50;
    std::size_t iterations = 300;
    std::size_t burn_in = 20;
    std::size_t seeds = 10;
    double eta = 0.02;
    double adagrad_lambda = 1e-8;
    double momentum = 0.9;
    double required_fraction = 0.95;   // nonincreasing steps after burn-in
    double required_final_ratio = 0.05;  // final KL vs initial KL
};

// Conjugate 2D Gaussian model: Gaussian prior, Gaussian likelihood, analytic
// posterior. Fits a Gaussian to the ensemble each iteration and tracks the
// closed-form KL to the truth.
inline SuiteResult kl_monotonicity_suite(std::uint64_t seed = 11,
                                         KlSuiteConfig cfg = {}) {
    const double prior_var = 4.0;   // prior N(0, prior_var I)
    const double noise_var = 1.0;   // y ~ N(theta, noise_var I)
    const std::size_t num_obs = 20;
    const std::size_t dim = 2;

    double worst_fraction = 1.0;
    double worst_ratio = 0.0;
    bool pass = true;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
        Rng rng = Rng(seed).split(s);
        const std::array<double, 2> theta_true = {1.5, -0.5};
        std::vector<std::array<double, 2>> obs(num_obs);
        for (auto& y : obs)
            for (std::size_t d = 0; d < dim; ++d)
                y[d] = theta_true[d] + std::sqrt(noise_var) * rng.normal();

        // posterior N(mu_p, var_p I)
        const double post_prec = 1.0 / prior_var + static_cast<double>(num_obs) / noise_var;
        const double var_p = 1.0 / post_prec;
        std::array<double, 2> obs_sum = {0.0, 0.0};
        for (const auto& y : obs)
            for (std::size_t d = 0; d < dim; ++d) obs_sum[d] += y[d];
        std::array<double, 2> mu_p;
        for (std::size_t d = 0; d < dim; ++d) mu_p[d] = var_p * obs_sum[d] / noise_var;
        Matrix true_cov(dim, dim, 0.0);
        true_cov(0, 0) = true_cov(1, 1) = var_p;

        Matrix init(cfg.particles, dim);
        for (double& v : init.data) v = 3.0 + rng.normal();

        TargetGrad score = [&](std::size_t, std::span<const double> theta,
                               std::span<double> grad) {
            for (std::size_t d = 0; d < dim; ++d) {
                grad[d] = -theta[d] / prior_var;
                grad[d] += (obs_sum[d] - static_cast<double>(num_obs) * theta[d]) / noise_var;
            }
        };

        SvgdConfig svgd;
        svgd.iterations = cfg.iterations;
        svgd.step_eta = cfg.eta;
        svgd.adagrad_lambda = cfg.adagrad_lambda;
        svgd.momentum = cfg.momentum;

        std::vector<double> kls;
        kls.push_back(gaussian_fit_kl(init, mu_p, true_cov));
        IterationObserver observer = [&](std::size_t, const Matrix& particles) {
            kls.push_back(gaussian_fit_kl(particles, mu_p, true_cov));
        };
        Rng run_rng = rng.split(999);
        run_svgd(init, score, svgd, run_rng, observer);

        std::size_t nonincreasing = 0, steps = 0;
        for (std::size_t t = cfg.burn_in; t + 1 < kls.size(); ++t) {
            ++steps;
            if (kls[t + 1] <= kls[t] + 1e-12) ++nonincreasing;
        }
        const double fraction = static_cast<double>(nonincreasing) / static_cast<double>(steps);
        const double ratio = kls.back() / kls.front();
        worst_fraction = std::min(worst_fraction, fraction);
        worst_ratio = std::max(worst_ratio, ratio);
        if (fraction < cfg.required_fraction || ratio >= cfg.required_final_ratio) pass = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "worst nonincreasing fraction = %.4f (need >= %.2f), worst final/initial KL "
                  "= %.4g (need < %.2g)",
                  worst_fraction, cfg.required_fraction, worst_ratio, cfg.required_final_ratio);
    return {"kl-monotonicity", pass, buf};
}

// K=5 clients, 1D Gaussian-mean model, analytic per-client posteriors
// sampled as 10-particle ensembles; the W2 from the aggregated barycenter to
// the true mean must shrink as the per-client data size grows.
inline SuiteResult barycenter_contraction_suite(std::uint64_t seed = 13,
                                                std::size_t seeds = 10) {
    const std::size_t num_clients = 5;
    const std::size_t particles = 10;
    const double theta_true = 1.7;
    const double noise_var = 1.0;
    const double prior_var = 100.0;
    const std::array<std::size_t, 3> sizes = {10, 100, 1000};

    std::array<double, 3> medians{};
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::size_t s = sizes[si];
        std::vector<double> dists;
        for (std::size_t run = 0; run < seeds; ++run) {
            Rng rng = Rng(seed).split(run * 10 + si);
            std::vector<Matrix> ensembles;
            for (std::size_t k = 0; k < num_clients; ++k) {
                double sum = 0.0;
                for (std::size_t i = 0; i < s; ++i)
                    sum += theta_true + std::sqrt(noise_var) * rng.normal();
                const double prec = 1.0 / prior_var + static_cast<double>(s) / noise_var;
                const double mu = (sum / noise_var) / prec;
                const double sd = std::sqrt(1.0 / prec);
                Matrix e(particles, 1);
                for (double& v : e.data) v = mu + sd * rng.normal();
                ensembles.push_back(std::move(e));
            }
            Matrix global(particles, 1);
            for (double& v : global.data) v = rng.normal();
            const Matrix bary = aggregate(global, ensembles, AggregationConfig{});
            const double point[1] = {theta_true};
            dists.push_back(w2_to_point(bary, point));
        }
        medians[si] = median(std::move(dists));
    }
    const bool pass = medians[0] > medians[1] && medians[1] > medians[2];
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "median W2 to true mean: s=10 -> %.4g, s=100 -> %.4g, s=1000 -> %.4g",
                  medians[0], medians[1], medians[2]);
    return {"barycenter-contraction", pass, buf};
}

inline std::vector<SuiteResult> run_all_suites() {
    return {ot_oracle_suite(), kl_monotonicity_suite(), barycenter_contraction_suite()};
}

}  // namespace fedwba
