#pragma once

// Exact discrete 2-Wasserstein transport between two uniform N-particle
// clouds. Both marginals are uniform with equal support size, so an optimal
// vertex of the transport polytope is a permutation matrix scaled by 1/N
// (Birkhoff); the LP reduces to a min-cost assignment, solved by the
// shortest-augmenting-path method with potentials in O(N^3). A factorial
// brute-force enumeration is kept alongside as the independent oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "fedwba/numerics.hpp"

namespace fedwba {

struct TransportPlan {
    std::size_t n = 0;
    Matrix entries;  // N x N, rows and columns each sum to 1/N

    bool marginals_ok(double tol = 1e-9) const {
        const double target = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            double rs = 0.0, cs = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (entries(i, j) < 0.0 || entries(j, i) < 0.0) return false;
                rs += entries(i, j);
                cs += entries(j, i);
            }
            if (std::abs(rs - target) > tol || std::abs(cs - target) > tol) return false;
        }
        return true;
    }
};

struct ExactPlan {
    TransportPlan plan;
    double objective = 0.0;          // <M, T>_F — the squared W2 distance
    std::vector<std::size_t> match;  // match[i] = target index paired with source i
};

// M[i][j] = ||source_i - target_j||^2
inline Matrix cost_matrix(const Matrix& source, const Matrix& target) {
    require(source.rows == target.rows, "cost_matrix: particle counts differ");
    require(source.cols == target.cols, "cost_matrix: dimensions differ");
    return pairwise_sq_dists(source, target);
}

// col_of_row[i] = column assigned to row i, minimizing sum_i cost(i, col_of_row[i]).
// Deterministic tie-breaking by scan order (lowest index first).
inline std::vector<std::size_t> min_cost_assignment(const Matrix& cost) {
    require(cost.rows == cost.cols, "min_cost_assignment: cost matrix not square");
    require(cost.rows >= 1, "min_cost_assignment: empty cost matrix");
    require(cost.all_finite(), "min_cost_assignment: non-finite cost");
    const std::size_t n = cost.rows;
    const double inf = std::numeric_limits<double>::infinity();

    // 1-based potentials; p[j] = row matched to column j, column 0 is virtual
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> col_of_row(n);
    for (std::size_t j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

inline ExactPlan solve_exact(const Matrix& cost) {
    auto match = min_cost_assignment(cost);
    const std::size_t n = cost.rows;
    ExactPlan out;
    out.match = std::move(match);
    out.plan.n = n;
    out.plan.entries = Matrix(n, n, 0.0);
    const double mass = 1.0 / static_cast<double>(n);
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.plan.entries(i, out.match[i]) = mass;
        objective += cost(i, out.match[i]);
    }
    out.objective = objective * mass;
    return out;
}

// Minimum of (1/N) sum_i cost(i, sigma(i)) over all N! permutations.
// Independent of the assignment solver; usable up to N ~ 10.
inline double brute_force_min_cost(const Matrix& cost) {
    require(cost.rows == cost.cols, "brute_force_min_cost: cost matrix not square");
    require(cost.rows <= 10, "brute_force_min_cost: N too large for enumeration");
    const std::size_t n = cost.rows;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cost(i, perm[i]);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

inline double w2_distance(const Matrix& source, const Matrix& target) {
    const Matrix cost = cost_matrix(source, target);
    return std::sqrt(std::max(0.0, solve_exact(cost).objective));
}

}  // namespace fedwba
