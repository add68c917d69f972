#pragma once

// Continuous global prior rebuilt from prior particles: an equally weighted
// mixture of isotropic Gaussians (stddev = bandwidth). log_density keeps the
// normalizing constant (the KL oracles need it); grad_log_density shares the
// same responsibility computation, where the constant cancels.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "fedwba/numerics.hpp"

namespace fedwba {

struct GlobalPrior {
    Matrix particles;  // N x M
    double bandwidth = 0.55;

    void validate() const {
        require(bandwidth > 0.0, "GlobalPrior: bandwidth must be positive");
        require(particles.rows >= 1, "GlobalPrior: need at least one particle");
        require(particles.all_finite(), "GlobalPrior: non-finite particle entries");
    }
};

namespace detail {

// un-normalized log mixture weights: -||theta - p_i||^2 / (2 bw^2)
inline std::vector<double> kde_exponents(const GlobalPrior& prior,
                                         std::span<const double> theta) {
    require(theta.size() == prior.particles.cols, "kde: dimension mismatch");
    const double inv2bw2 = 1.0 / (2.0 * prior.bandwidth * prior.bandwidth);
    std::vector<double> e(prior.particles.rows);
    for (std::size_t i = 0; i < prior.particles.rows; ++i)
        e[i] = -sq_dist(prior.particles.row_span(i), theta) * inv2bw2;
    return e;
}

}  // namespace detail

// Softmax responsibilities of the mixture components at theta; nonnegative,
// sum to 1.
inline std::vector<double> responsibilities(const GlobalPrior& prior,
                                            std::span<const double> theta) {
    prior.validate();
    auto e = detail::kde_exponents(prior, theta);
    const double lse = log_sum_exp(e);
    for (double& v : e) v = std::exp(v - lse);
    return e;
}

// log of (1/N) sum_i Gaussian(theta; p_i, bw^2 I)
inline double log_density(const GlobalPrior& prior, std::span<const double> theta) {
    prior.validate();
    const auto e = detail::kde_exponents(prior, theta);
    const double m = static_cast<double>(prior.particles.cols);
    const double log_norm =
        -0.5 * m * std::log(2.0 * std::numbers::pi * prior.bandwidth * prior.bandwidth);
    return log_sum_exp(e) - std::log(static_cast<double>(prior.particles.rows)) + log_norm;
}

// grad_theta log_density = sum_i w_i(theta) (p_i - theta) / bw^2, accumulated
// into grad_out on top of whatever is already there.
inline void add_grad_log_density(const GlobalPrior& prior, std::span<const double> theta,
                                 std::span<double> grad_out) {
    prior.validate();
    require(grad_out.size() == prior.particles.cols, "kde: gradient length mismatch");
    auto e = detail::kde_exponents(prior, theta);
    const double lse = log_sum_exp(e);
    const double inv_bw2 = 1.0 / (prior.bandwidth * prior.bandwidth);
    for (std::size_t i = 0; i < prior.particles.rows; ++i) {
        const double w = std::exp(e[i] - lse) * inv_bw2;
        if (w == 0.0) continue;
        const double* p = prior.particles.row(i);
        for (std::size_t d = 0; d < theta.size(); ++d)
            grad_out[d] += w * (p[d] - theta[d]);
    }
}

inline std::vector<double> grad_log_density(const GlobalPrior& prior,
                                            std::span<const double> theta) {
    std::vector<double> g(theta.size(), 0.0);
    add_grad_log_density(prior, theta, g);
    return g;
}

}  // namespace fedwba
