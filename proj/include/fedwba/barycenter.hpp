#pragma once

// Server-side aggregation: the free-support Wasserstein barycenter of the K
// uploaded ensembles. Each fixed-point iteration solves one exact transport
// plan per client against the current global support, then applies the
// closed-form update: each global particle becomes the plan-weighted convex
// combination of client particles (rows of N*T_k are row-stochastic because
// the row marginals are 1/N).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fedwba/numerics.hpp"
#include "fedwba/ot.hpp"

namespace fedwba {

struct AggregationConfig {
    std::size_t fixed_point_iters = 1;
    std::vector<double> client_weights;  // empty = uniform 1/K

    void validate(std::size_t num_clients) const {
        require(fixed_point_iters >= 1, "AggregationConfig: fixed_point_iters must be >= 1");
        if (client_weights.empty()) return;
        require(client_weights.size() == num_clients,
                "AggregationConfig: weight count does not match client count");
        double sum = 0.0;
        for (double w : client_weights) {
            require(w >= 0.0, "AggregationConfig: negative client weight");
            sum += w;
        }
        require(std::abs(sum - 1.0) <= 1e-12, "AggregationConfig: weights must sum to 1");
    }
};

// (1/K) sum_k <M_k, T_k>_F under the provided plans.
inline double objective_value(const Matrix& global_particles,
                              std::span<const Matrix> client_ensembles,
                              std::span<const TransportPlan> plans) {
    require(client_ensembles.size() == plans.size(),
            "objective_value: plan count does not match client count");
    require(!client_ensembles.empty(), "objective_value: no clients");
    double total = 0.0;
    for (std::size_t k = 0; k < client_ensembles.size(); ++k) {
        const Matrix& client = client_ensembles[k];
        require(client.rows == global_particles.rows && client.cols == global_particles.cols,
                "objective_value: ensemble shape mismatch");
        require(plans[k].n == global_particles.rows, "objective_value: plan size mismatch");
        const Matrix cost = cost_matrix(global_particles, client);
        for (std::size_t i = 0; i < cost.rows; ++i)
            for (std::size_t j = 0; j < cost.cols; ++j)
                total += cost(i, j) * plans[k].entries(i, j);
    }
    return total / static_cast<double>(client_ensembles.size());
}

struct AggregateDiag {
    // objective after each fixed-point update, under that iteration's plans;
    // nonincreasing across iterations
    std::vector<double> objectives;
};

inline Matrix aggregate(const Matrix& global_particles,
                        std::span<const Matrix> client_ensembles,
                        const AggregationConfig& config, AggregateDiag* diag = nullptr) {
    const std::size_t num_clients = client_ensembles.size();
    require(num_clients >= 1, "aggregate: need at least one client ensemble");
    config.validate(num_clients);
    const std::size_t n = global_particles.rows;
    const std::size_t m = global_particles.cols;
    for (const Matrix& c : client_ensembles)
        require(c.rows == n && c.cols == m, "aggregate: ensemble shape mismatch");

    std::vector<double> weights = config.client_weights;
    if (weights.empty())
        weights.assign(num_clients, 1.0 / static_cast<double>(num_clients));

    Matrix current = global_particles;
    std::vector<TransportPlan> plans(num_clients);
    for (std::size_t it = 0; it < config.fixed_point_iters; ++it) {
        for (std::size_t k = 0; k < num_clients; ++k)
            plans[k] = solve_exact(cost_matrix(current, client_ensembles[k])).plan;

        Matrix next(n, m, 0.0);
        const double scale_n = static_cast<double>(n);
        for (std::size_t k = 0; k < num_clients; ++k) {
            const Matrix& client = client_ensembles[k];
            const Matrix& t = plans[k].entries;
            const double wk = weights[k];
            for (std::size_t i = 0; i < n; ++i) {
                double* out = next.row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    const double coeff = wk * scale_n * t(i, j);
                    if (coeff == 0.0) continue;
                    const double* cj = client.row(j);
                    for (std::size_t d = 0; d < m; ++d) out[d] += coeff * cj[d];
                }
            }
        }
        current = std::move(next);
        if (diag) diag->objectives.push_back(objective_value(current, client_ensembles, plans));
    }
    return current;
}

// Baseline aggregation for comparison runs: element-wise particle averaging,
// theta_i <- (1/K) sum_k theta_{k,i}.
inline Matrix param_average(std::span<const Matrix> client_ensembles) {
    require(!client_ensembles.empty(), "param_average: no clients");
    const Matrix& first = client_ensembles[0];
    Matrix out(first.rows, first.cols, 0.0);
    for (const Matrix& c : client_ensembles) {
        require(c.same_shape(first), "param_average: ensemble shape mismatch");
        for (std::size_t t = 0; t < out.data.size(); ++t) out.data[t] += c.data[t];
    }
    const double inv = 1.0 / static_cast<double>(client_ensembles.size());
    for (double& v : out.data) v *= inv;
    return out;
}

}  // namespace fedwba
