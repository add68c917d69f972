#pragma once

// Stein variational gradient descent: kernels with median-heuristic
// bandwidth, the particle update transported through AdaGrad with momentum,
// and a V-statistic kernelized Stein discrepancy estimator.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedwba/numerics.hpp"

namespace fedwba {

enum class KernelKind { Rbf, Laplacian, Polynomial, Sigmoid };

inline std::string kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Laplacian: return "laplacian";
        case KernelKind::Polynomial: return "polynomial";
        case KernelKind::Sigmoid: return "sigmoid";
    }
    return "?";
}

struct SvgdKernel {
    KernelKind kind = KernelKind::Rbf;
    // 0 means: resolve from the median heuristic each iteration (RBF/Laplacian).
    double bandwidth = 0.0;
    double poly_degree = 2.0;    // k = (x.y + 1)^d
    double sigmoid_alpha = 1.0;  // k = tanh(alpha x.y + c); ablation mode only
    double sigmoid_bias = 0.0;

    void validate() const {
        require(bandwidth >= 0.0, "SvgdKernel: bandwidth must be >= 0");
        require(poly_degree >= 1.0, "SvgdKernel: polynomial exponent must be >= 1");
        require(sigmoid_alpha != 0.0, "SvgdKernel: sigmoid alpha must be nonzero");
    }
};

struct SvgdConfig {
    std::size_t iterations = 30;
    double step_eta = 0.01;       // AdaGrad global learning rate
    double adagrad_lambda = 1e-8; // AdaGrad smoothing term
    double momentum = 0.9;        // 0 recovers plain AdaGrad
    std::size_t minibatch = 0;    // 0 = full batch; consumed by the caller's target
    SvgdKernel kernel;
    std::size_t workers = 1;      // per-particle gradient evaluations

    void validate() const {
        require(iterations >= 1, "SvgdConfig: iterations must be >= 1");
        require(step_eta > 0.0, "SvgdConfig: step_eta must be positive");
        require(adagrad_lambda > 0.0, "SvgdConfig: adagrad_lambda must be positive");
        require(momentum >= 0.0 && momentum < 1.0, "SvgdConfig: momentum must be in [0,1)");
        kernel.validate();
    }
};

struct SvgdState {
    Matrix particles;   // N x M
    Matrix grad_accum;  // running sum of squared directions
    Matrix velocity;

    explicit SvgdState(Matrix init)
        : particles(std::move(init)),
          grad_accum(particles.rows, particles.cols, 0.0),
          velocity(particles.rows, particles.cols, 0.0) {}
};

// h = med^2 / ln N over the N(N-1)/2 pairwise Euclidean distances; falls back
// to 1.0 for a single particle or a fully degenerate ensemble.
inline double median_bandwidth(const Matrix& particles) {
    const std::size_t n = particles.rows;
    if (n <= 1) return 1.0;
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dists.push_back(std::sqrt(sq_dist(particles.row_span(i), particles.row_span(j))));
    const double med = median(std::move(dists));
    if (med == 0.0) return 1.0;
    return med * med / std::log(static_cast<double>(n));
}

inline double resolve_bandwidth(const SvgdKernel& kernel, const Matrix& particles) {
    if (kernel.kind == KernelKind::Polynomial || kernel.kind == KernelKind::Sigmoid)
        return 0.0;  // unused
    return kernel.bandwidth > 0.0 ? kernel.bandwidth : median_bandwidth(particles);
}

namespace detail {

inline double kernel_value(const SvgdKernel& k, double h, std::span<const double> a,
                           std::span<const double> b) {
    switch (k.kind) {
        case KernelKind::Rbf: return std::exp(-sq_dist(a, b) / h);
        case KernelKind::Laplacian: return std::exp(-std::sqrt(sq_dist(a, b)) / h);
        case KernelKind::Polynomial: return std::pow(dot(a, b) + 1.0, k.poly_degree);
        case KernelKind::Sigmoid: return std::tanh(k.sigmoid_alpha * dot(a, b) + k.sigmoid_bias);
    }
    return 0.0;
}

}  // namespace detail

// K(j,i) = k(theta_j, theta_i) with the bandwidth resolved once for this
// ensemble.
struct KernelEval {
    Matrix values;
    double bandwidth;  // resolved h (0 for dot-product kernels)
};

inline KernelEval kernel_matrix(const SvgdKernel& kernel, const Matrix& particles) {
    kernel.validate();
    require(particles.all_finite(), "kernel_matrix: non-finite particles");
    const double h = resolve_bandwidth(kernel, particles);
    const std::size_t n = particles.rows;
    Matrix k(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            k(j, i) = detail::kernel_value(kernel, h, particles.row_span(j),
                                           particles.row_span(i));
    return {std::move(k), h};
}

// grad_{theta_j} k(theta_j, theta_i)
inline std::vector<double> kernel_grad(const SvgdKernel& kernel, double h,
                                       const Matrix& particles, std::size_t j,
                                       std::size_t i) {
    const auto tj = particles.row_span(j);
    const auto ti = particles.row_span(i);
    const std::size_t m = particles.cols;
    std::vector<double> g(m, 0.0);
    switch (kernel.kind) {
        case KernelKind::Rbf: {
            const double kv = std::exp(-sq_dist(tj, ti) / h);
            for (std::size_t d = 0; d < m; ++d) g[d] = -2.0 / h * (tj[d] - ti[d]) * kv;
            break;
        }
        case KernelKind::Laplacian: {
            const double r = std::sqrt(sq_dist(tj, ti));
            if (r == 0.0) break;
            const double kv = std::exp(-r / h);
            for (std::size_t d = 0; d < m; ++d) g[d] = -(tj[d] - ti[d]) / (r * h) * kv;
            break;
        }
        case KernelKind::Polynomial: {
            const double c = kernel.poly_degree *
                             std::pow(dot(tj, ti) + 1.0, kernel.poly_degree - 1.0);
            for (std::size_t d = 0; d < m; ++d) g[d] = c * ti[d];
            break;
        }
        case KernelKind::Sigmoid: {
            const double t = std::tanh(kernel.sigmoid_alpha * dot(tj, ti) + kernel.sigmoid_bias);
            const double c = kernel.sigmoid_alpha * (1.0 - t * t);
            for (std::size_t d = 0; d < m; ++d) g[d] = c * ti[d];
            break;
        }
    }
    return g;
}

// Materialized (K, gradK) pair; gradK[j * N + i] = grad_{theta_j} k(theta_j, theta_i).
// Meant for tests and small ensembles; the step itself uses a fused loop.
inline std::pair<KernelEval, std::vector<std::vector<double>>> kernel_and_grad(
    const SvgdKernel& kernel, const Matrix& particles) {
    KernelEval eval = kernel_matrix(kernel, particles);
    const std::size_t n = particles.rows;
    std::vector<std::vector<double>> grads(n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            grads[j * n + i] = kernel_grad(kernel, eval.bandwidth, particles, j, i);
    return {std::move(eval), std::move(grads)};
}

// phi(theta_i) = (1/N) sum_j [ K(j,i) grad_log_post[j] + grad_{theta_j} k(theta_j, theta_i) ]
inline Matrix svgd_direction(const SvgdKernel& kernel, const Matrix& particles,
                             const Matrix& grad_log_post) {
    require(grad_log_post.same_shape(particles), "svgd_direction: gradient shape mismatch");
    require(grad_log_post.all_finite(), "svgd_direction: non-finite gradient input");
    const KernelEval eval = kernel_matrix(kernel, particles);
    const std::size_t n = particles.rows;
    const std::size_t m = particles.cols;
    const double h = eval.bandwidth;
    Matrix phi(n, m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* out = phi.row(i);
        const double* ti = particles.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double kv = eval.values(j, i);
            const double* gj = grad_log_post.row(j);
            const double* tj = particles.row(j);
            switch (kernel.kind) {
                case KernelKind::Rbf: {
                    const double c = 2.0 / h * kv;
                    for (std::size_t d = 0; d < m; ++d)
                        out[d] += kv * gj[d] + c * (ti[d] - tj[d]);
                    break;
                }
                case KernelKind::Laplacian: {
                    const double r = std::sqrt(sq_dist({tj, m}, {ti, m}));
                    const double c = r == 0.0 ? 0.0 : kv / (r * h);
                    for (std::size_t d = 0; d < m; ++d)
                        out[d] += kv * gj[d] + c * (ti[d] - tj[d]);
                    break;
                }
                case KernelKind::Polynomial: {
                    const double c = kernel.poly_degree *
                                     std::pow(dot({tj, m}, {ti, m}) + 1.0,
                                              kernel.poly_degree - 1.0);
                    for (std::size_t d = 0; d < m; ++d) out[d] += kv * gj[d] + c * ti[d];
                    break;
                }
                case KernelKind::Sigmoid: {
                    const double t = kv;  // tanh value
                    const double c = kernel.sigmoid_alpha * (1.0 - t * t);
                    for (std::size_t d = 0; d < m; ++d) out[d] += kv * gj[d] + c * ti[d];
                    break;
                }
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t d = 0; d < m; ++d) out[d] *= inv_n;
    }
    return phi;
}

// One update: phi -> AdaGrad-with-momentum transform -> particles move.
//   G += phi^2;  step = eta * phi / sqrt(G + lambda);  v = m*v + step;  theta += v
inline void svgd_step(SvgdState& state, const Matrix& grad_log_post, const SvgdConfig& config) {
    config.validate();
    Matrix phi = svgd_direction(config.kernel, state.particles, grad_log_post);
    const std::size_t total = state.particles.data.size();
    for (std::size_t t = 0; t < total; ++t) {
        const double p = phi.data[t];
        state.grad_accum.data[t] += p * p;
        const double step =
            config.step_eta * p / std::sqrt(state.grad_accum.data[t] + config.adagrad_lambda);
        state.velocity.data[t] = config.momentum * state.velocity.data[t] + step;
        state.particles.data[t] += state.velocity.data[t];
    }
}

// Per-particle target score: fills grad_out with grad_theta log p~(theta|D)
// evaluated at the given particle.
using TargetGrad =
    std::function<void(std::size_t particle, std::span<const double> theta,
                       std::span<double> grad_out)>;

// Called once per iteration before the (possibly parallel) per-particle
// gradient evaluations; the place to draw minibatch indices.
using IterationSetup = std::function<void(std::size_t iteration, Rng& rng)>;
using IterationObserver = std::function<void(std::size_t iteration, const Matrix& particles)>;

// Runs `iterations` svgd_steps, re-resolving the median bandwidth each
// iteration. Deterministic given (init, config, rng seed) for any worker
// count: each particle's gradient is written to its own row.
inline Matrix run_svgd(const Matrix& init, const TargetGrad& target_grad,
                       const SvgdConfig& config, Rng& rng,
                       const IterationObserver& observer = nullptr,
                       const IterationSetup& setup = nullptr) {
    config.validate();
    require(init.rows >= 1, "run_svgd: need at least one particle");
    require(init.all_finite(), "run_svgd: non-finite initial particles");
    SvgdState state(init);
    Matrix grads(init.rows, init.cols);
    for (std::size_t l = 0; l < config.iterations; ++l) {
        if (setup) setup(l, rng);
        parallel_for(init.rows, config.workers, [&](std::size_t i) {
            target_grad(i, state.particles.row_span(i), grads.row_span(i));
        });
        svgd_step(state, grads, config);
        if (observer) observer(l, state.particles);
    }
    return std::move(state.particles);
}

// Square root of the V-statistic estimator of the squared KSD:
//   KSD^2 = (1/N^2) sum_{i,j} u_p(x_i, x_j)
// with u_p the Stein kernel of k and the target score. Supported for the
// smooth positive-definite kernels (RBF, polynomial).
inline double ksd(const Matrix& particles, const TargetGrad& target_grad,
                  const SvgdKernel& kernel) {
    require(particles.rows >= 2, "ksd: need at least two particles");
    require(kernel.kind == KernelKind::Rbf || kernel.kind == KernelKind::Polynomial,
            "ksd: kernel not supported for KSD (" + kernel_name(kernel.kind) + ")");
    const std::size_t n = particles.rows;
    const std::size_t m = particles.cols;
    Matrix scores(n, m);
    for (std::size_t i = 0; i < n; ++i)
        target_grad(i, particles.row_span(i), scores.row_span(i));
    require(scores.all_finite(), "ksd: non-finite target score");

    const double h = resolve_bandwidth(kernel, particles);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = particles.row_span(i);
        const auto si = scores.row_span(i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto xj = particles.row_span(j);
            const auto sj = scores.row_span(j);
            double u = 0.0;
            if (kernel.kind == KernelKind::Rbf) {
                const double r2 = sq_dist(xi, xj);
                const double kv = std::exp(-r2 / h);
                double ss = 0.0, diff_s = 0.0;
                for (std::size_t d = 0; d < m; ++d) {
                    ss += si[d] * sj[d];
                    diff_s += (si[d] - sj[d]) * (xi[d] - xj[d]);
                }
                // s_i.s_j k + (2/h)(s_i - s_j).(x_i - x_j) k + k (2m/h - 4 r2/h^2)
                u = kv * (ss + 2.0 / h * diff_s + 2.0 * static_cast<double>(m) / h -
                          4.0 * r2 / (h * h));
            } else {  // polynomial
                const double b = dot(xi, xj) + 1.0;
                const double d0 = kernel.poly_degree;
                const double kv = std::pow(b, d0);
                const double kp = d0 * std::pow(b, d0 - 1.0);
                double ss = 0.0;
                for (std::size_t d = 0; d < m; ++d) ss += si[d] * sj[d];
                const double si_xi = dot(si, xi), sj_xj = dot(sj, xj);
                const double trace = d0 * (d0 - 1.0) * std::pow(b, d0 - 2.0) * (b - 1.0) +
                                     kp * static_cast<double>(m);
                u = kv * ss + kp * (si_xi + sj_xj) + trace;
            }
            total += u;
        }
    }
    const double v_stat = total / (static_cast<double>(n) * static_cast<double>(n));
    return std::sqrt(std::max(0.0, v_stat));
}

}  // namespace fedwba
