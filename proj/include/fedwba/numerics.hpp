#pragma once

// Dense row-major matrix, deterministic seeded RNG, and the small numeric
// helpers every other header leans on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fedwba {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        Matrix m;
        m.rows = rws.size();
        m.cols = rws.size() ? rws.begin()->size() : 0;
        m.data.reserve(m.rows * m.cols);
        for (const auto& r : rws) {
            if (r.size() != m.cols)
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            m.data.insert(m.data.end(), r.begin(), r.end());
        }
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// out[i][j] = sum_d (a[i][d] - b[j][d])^2
inline Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols, "pairwise_sq_dists: dimension mismatch (" +
                                  std::to_string(a.cols) + " vs " + std::to_string(b.cols) + ")");
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t d = 0; d < a.cols; ++d) {
                const double diff = ai[d] - bj[d];
                s += diff * diff;
            }
            out(i, j) = s;
        }
    }
    return out;
}

inline double median(std::vector<double> v) {
    require(!v.empty(), "median: empty input");
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

inline double median(std::span<const double> v) {
    return median(std::vector<double>(v.begin(), v.end()));
}

// log(sum_i exp(v_i)) by max shifting; exact for a single element.
inline double log_sum_exp(std::span<const double> v) {
    require(!v.empty(), "log_sum_exp: empty input");
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;  // all -inf, or a +inf/NaN dominates
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// --- deterministic RNG -----------------------------------------------------
//
// xoshiro256** seeded through splitmix64. Same seed, same stream, on any
// platform; std::normal_distribution is implementation-defined so normals are
// drawn by Box-Muller on our own uniforms. Instances are single-owner: never
// share one across workers, derive children with split(tag) instead.

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1) with 53 bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // [0, n) without modulo bias
    std::size_t uniform_index(std::size_t n) {
        require(n > 0, "Rng::uniform_index: n must be positive");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<std::size_t>(r % bound);
    }

    // k distinct indices from [0, n), partial Fisher-Yates order
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        require(k <= n, "Rng::sample_without_replacement: k > n");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i)
            std::swap(idx[i], idx[i + uniform_index(n - i)]);
        idx.resize(k);
        return idx;
    }

    // Child generator derived from the base seed and a tag only; independent
    // of how much of this stream has been consumed.
    Rng split(std::uint64_t tag) const {
        std::uint64_t x = seed_ ^ (0xA24BAED4963EE407ULL * (tag + 1));
        const std::uint64_t a = splitmix64(x);
        return Rng(splitmix64(x) ^ a);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

// --- small parallel helper -------------------------------------------------
//
// Static chunking over [0, n); fn(i) must write only to slots owned by i so
// results cannot depend on the worker count.

inline std::size_t hardware_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers == 0) workers = hardware_workers();
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        const std::size_t lo = n * t / workers;
        const std::size_t hi = n * (t + 1) / workers;
        pool.emplace_back([&, t, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// --- tiny Cholesky kit (used by the Gaussian-fit KL oracle) -----------------

// Lower-triangular factor of a symmetric positive-definite matrix.
inline Matrix cholesky(const Matrix& a) {
    require(a.rows == a.cols, "cholesky: matrix not square");
    const std::size_t n = a.rows;
    Matrix l(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                require(s > 0.0, "cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

// Solves L x = b for lower-triangular L.
inline std::vector<double> forward_solve(const Matrix& l, std::span<const double> b) {
    const std::size_t n = l.rows;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

}  // namespace fedwba
