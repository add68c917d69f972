#pragma once

// Evaluation of particle ensembles: posterior-predictive accuracy, expected
// calibration error with exportable reliability bins, and the analytic
// oracles (Gaussian-fit KL, W2 to a point mass) behind the convergence checks.

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "fedwba/data.hpp"
#include "fedwba/model.hpp"
#include "fedwba/numerics.hpp"

namespace fedwba {

struct ReliabilityBins {
    std::array<double, 11> edges{};  // equal-width over [0, 1]
    struct Bin {
        std::size_t count = 0;
        double mean_confidence = 0.0;
        double mean_accuracy = 0.0;
    };
    std::vector<Bin> bins;
};

// Posterior predictive: uniform mixture of per-particle forward outputs.
inline std::vector<double> predict_ensemble(const Matrix& particles, const MlpShape& shape,
                                            std::span<const double> x) {
    require(particles.rows >= 1, "predict_ensemble: empty ensemble");
    require(particles.cols == shape.flat_len(), "predict_ensemble: particle length mismatch");
    std::vector<double> mean(shape.classes, 0.0);
    for (std::size_t i = 0; i < particles.rows; ++i) {
        const auto p = forward(shape, particles.row_span(i), x);
        for (std::size_t c = 0; c < shape.classes; ++c) mean[c] += p[c];
    }
    const double inv = 1.0 / static_cast<double>(particles.rows);
    for (double& v : mean) v *= inv;
    return mean;
}

struct EvalResult {
    double accuracy = 0.0;
    double ece = 0.0;
    ReliabilityBins bins;
};

// One pass over the dataset computing accuracy and ECE together (predictions
// are the expensive part). Argmax ties break toward the lowest class index;
// confidence is the max predicted probability, binned into `num_bins`
// equal-width bins; empty bins contribute 0.
inline EvalResult evaluate_ensemble(const Matrix& particles, const MlpShape& shape,
                                    const Dataset& data, std::size_t num_bins = 10) {
    require(data.size() > 0, "evaluate_ensemble: empty dataset");
    require(num_bins >= 1, "evaluate_ensemble: need at least one bin");
    EvalResult out;
    out.bins.bins.resize(num_bins);
    for (std::size_t b = 0; b <= 10; ++b)
        out.bins.edges[b] = static_cast<double>(b) / 10.0;

    std::vector<double> conf_sum(num_bins, 0.0), acc_sum(num_bins, 0.0);
    std::vector<std::size_t> counts(num_bins, 0);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto probs = predict_ensemble(particles, shape, data.features.row_span(s));
        std::size_t arg = 0;
        for (std::size_t c = 1; c < probs.size(); ++c)
            if (probs[c] > probs[arg]) arg = c;
        const bool hit = static_cast<int>(arg) == data.labels[s];
        if (hit) ++correct;
        const double conf = probs[arg];
        std::size_t b = static_cast<std::size_t>(conf * static_cast<double>(num_bins));
        if (b >= num_bins) b = num_bins - 1;
        ++counts[b];
        conf_sum[b] += conf;
        acc_sum[b] += hit ? 1.0 : 0.0;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    double ece = 0.0;
    for (std::size_t b = 0; b < num_bins; ++b) {
        auto& bin = out.bins.bins[b];
        bin.count = counts[b];
        if (counts[b] == 0) continue;
        bin.mean_confidence = conf_sum[b] / static_cast<double>(counts[b]);
        bin.mean_accuracy = acc_sum[b] / static_cast<double>(counts[b]);
        ece += static_cast<double>(counts[b]) / static_cast<double>(data.size()) *
               std::abs(bin.mean_accuracy - bin.mean_confidence);
    }
    out.ece = ece;
    return out;
}

inline double accuracy(const Matrix& particles, const Dataset& data, const MlpShape& shape) {
    return evaluate_ensemble(particles, shape, data).accuracy;
}

inline std::pair<double, ReliabilityBins> ece(const Matrix& particles, const Dataset& data,
                                              const MlpShape& shape, std::size_t bins = 10) {
    auto r = evaluate_ensemble(particles, shape, data, bins);
    return {r.ece, std::move(r.bins)};
}

// Reliability bins as CSV: bin_low, bin_high, count, mean_conf, mean_acc.
inline void write_reliability_csv(const ReliabilityBins& bins, const std::string& path) {
    std::ofstream f(path);
    require(static_cast<bool>(f), "write_reliability_csv: cannot open " + path);
    f << "bin_low,bin_high,count,mean_conf,mean_acc\n";
    const std::size_t n = bins.bins.size();
    char buf[160];
    for (std::size_t b = 0; b < n; ++b) {
        const double lo = static_cast<double>(b) / static_cast<double>(n);
        const double hi = static_cast<double>(b + 1) / static_cast<double>(n);
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%zu,%.10g,%.10g\n", lo, hi,
                      bins.bins[b].count, bins.bins[b].mean_confidence,
                      bins.bins[b].mean_accuracy);
        f << buf;
    }
}

// Fits a Gaussian (sample mean, sample covariance + jitter on the diagonal)
// to the particles and returns the closed-form KL to N(true_mean, true_cov).
// diag_fit keeps only the covariance diagonal, for N <= M ensembles.
inline double gaussian_fit_kl(const Matrix& particles, std::span<const double> true_mean,
                              const Matrix& true_cov, bool diag_fit = false,
                              double jitter = 1e-6) {
    const std::size_t n = particles.rows;
    const std::size_t m = particles.cols;
    require(true_mean.size() == m, "gaussian_fit_kl: mean dimension mismatch");
    require(true_cov.rows == m && true_cov.cols == m, "gaussian_fit_kl: covariance shape mismatch");
    require(n >= 2, "gaussian_fit_kl: need at least two particles");

    std::vector<double> mean(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < m; ++d) mean[d] += particles(i, d);
    for (double& v : mean) v /= static_cast<double>(n);

    Matrix cov(m, m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < m; ++a) {
            const double da = particles(i, a) - mean[a];
            if (diag_fit) {
                cov(a, a) += da * da;
            } else {
                for (std::size_t b = 0; b <= a; ++b)
                    cov(a, b) += da * (particles(i, b) - mean[b]);
            }
        }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            cov(a, b) /= denom;
            cov(b, a) = cov(a, b);
        }
    for (std::size_t a = 0; a < m; ++a) cov(a, a) += jitter;

    // KL(N_fit || N_true) =
    //   0.5 [ tr(St^-1 Sf) + (mt-mf)' St^-1 (mt-mf) - m + ln det St - ln det Sf ]
    const Matrix lt = cholesky(true_cov);
    const Matrix lf = cholesky(cov);
    double trace = 0.0;
    std::vector<double> col(m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t a = 0; a < m; ++a) col[a] = lf(a, j);
        const auto y = forward_solve(lt, col);  // Lt^-1 (column of Lf)
        for (double v : y) trace += v * v;      // ||Lt^-1 Lf||_F^2
    }
    std::vector<double> delta(m);
    for (std::size_t d = 0; d < m; ++d) delta[d] = mean[d] - true_mean[d];
    const auto z = forward_solve(lt, delta);
    double maha = 0.0;
    for (double v : z) maha += v * v;
    double logdet_t = 0.0, logdet_f = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
        logdet_t += 2.0 * std::log(lt(d, d));
        logdet_f += 2.0 * std::log(lf(d, d));
    }
    return 0.5 * (trace + maha - static_cast<double>(m) + logdet_t - logdet_f);
}

// W2 distance from the empirical particle measure to the point mass at
// `point`; every transport plan to a point is the same, so this is just
// sqrt of the mean squared distance.
inline double w2_to_point(const Matrix& particles, std::span<const double> point) {
    require(particles.cols == point.size(), "w2_to_point: dimension mismatch");
    require(particles.rows >= 1, "w2_to_point: empty ensemble");
    double s = 0.0;
    for (std::size_t i = 0; i < particles.rows; ++i)
        s += sq_dist(particles.row_span(i), point);
    return std::sqrt(s / static_cast<double>(particles.rows));
}

}  // namespace fedwba
