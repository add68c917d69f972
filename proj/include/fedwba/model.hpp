#pragma once

// Single-hidden-layer MLP classifier over flattened parameter vectors.
// A particle is one such vector; the categorical log-likelihood and its
// exact gradient (manual backprop) are what SVGD consumes.
//
// Flat layout: [W1 (hidden x input, row-major) | b1 | W2 (classes x hidden) | b2].
// Hidden activation is ReLU with subgradient 0 at 0.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedwba/numerics.hpp"

namespace fedwba {

struct MlpShape {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t classes = 0;

    std::size_t flat_len() const {
        return input_dim * hidden_dim + hidden_dim + hidden_dim * classes + classes;
    }
    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return input_dim * hidden_dim; }
    std::size_t w2_offset() const { return b1_offset() + hidden_dim; }
    std::size_t b2_offset() const { return w2_offset() + hidden_dim * classes; }

    void validate() const {
        require(input_dim >= 1 && hidden_dim >= 1 && classes >= 1,
                "MlpShape: all dims must be >= 1");
    }
};

struct FlatParams {
    MlpShape shape;
    std::vector<double> theta;

    FlatParams() = default;
    explicit FlatParams(const MlpShape& s) : shape(s), theta(s.flat_len(), 0.0) {}
    FlatParams(const MlpShape& s, std::vector<double> t) : shape(s), theta(std::move(t)) {
        require(theta.size() == s.flat_len(), "FlatParams: length does not match shape");
    }
};

// Structured view into one flat vector; flatten/unflatten is just this view.
struct MlpView {
    std::span<const double> w1, b1, w2, b2;
};
struct MlpViewMut {
    std::span<double> w1, b1, w2, b2;
};

inline MlpView view_params(const MlpShape& s, std::span<const double> theta) {
    require(theta.size() == s.flat_len(), "view_params: length does not match shape");
    return {theta.subspan(s.w1_offset(), s.input_dim * s.hidden_dim),
            theta.subspan(s.b1_offset(), s.hidden_dim),
            theta.subspan(s.w2_offset(), s.hidden_dim * s.classes),
            theta.subspan(s.b2_offset(), s.classes)};
}

inline MlpViewMut view_params(const MlpShape& s, std::span<double> theta) {
    require(theta.size() == s.flat_len(), "view_params: length does not match shape");
    return {theta.subspan(s.w1_offset(), s.input_dim * s.hidden_dim),
            theta.subspan(s.b1_offset(), s.hidden_dim),
            theta.subspan(s.w2_offset(), s.hidden_dim * s.classes),
            theta.subspan(s.b2_offset(), s.classes)};
}

namespace detail {

// logits and hidden activations for one sample; buffers are caller-owned
inline void mlp_logits(const MlpShape& s, std::span<const double> theta,
                       std::span<const double> x, std::span<double> hidden,
                       std::span<double> logits) {
    const double* w1 = theta.data() + s.w1_offset();
    const double* b1 = theta.data() + s.b1_offset();
    const double* w2 = theta.data() + s.w2_offset();
    const double* b2 = theta.data() + s.b2_offset();
    for (std::size_t j = 0; j < s.hidden_dim; ++j) {
        const double* row = w1 + j * s.input_dim;
        double z = b1[j];
        for (std::size_t d = 0; d < s.input_dim; ++d) z += row[d] * x[d];
        hidden[j] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t c = 0; c < s.classes; ++c) {
        const double* row = w2 + c * s.hidden_dim;
        double z = b2[c];
        for (std::size_t j = 0; j < s.hidden_dim; ++j) z += row[j] * hidden[j];
        logits[c] = z;
    }
}

// max-shifted log normalizer
inline double log_softmax_denom(std::span<const double> logits, double& mx) {
    mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : logits) s += std::exp(v - mx);
    return mx + std::log(s);
}

}  // namespace detail

// Class probabilities for one input (softmax over logits).
inline std::vector<double> forward(const MlpShape& shape, std::span<const double> theta,
                                   std::span<const double> x) {
    shape.validate();
    require(theta.size() == shape.flat_len(), "forward: parameter length mismatch");
    require(x.size() == shape.input_dim, "forward: input dimension mismatch");
    for (double v : theta)
        require(std::isfinite(v), "forward: non-finite parameters");

    std::vector<double> hidden(shape.hidden_dim), logits(shape.classes);
    detail::mlp_logits(shape, theta, x, hidden, logits);
    double mx;
    const double lse = detail::log_softmax_denom(logits, mx);
    std::vector<double> probs(shape.classes);
    for (std::size_t c = 0; c < shape.classes; ++c) probs[c] = std::exp(logits[c] - lse);
    return probs;
}

inline std::vector<double> forward(const FlatParams& p, std::span<const double> x) {
    return forward(p.shape, p.theta, x);
}

// Sum over the batch of log p(y_i | x_i, theta). `idx` selects rows of X;
// empty idx means the whole batch.
inline double log_likelihood(const MlpShape& shape, std::span<const double> theta,
                             const Matrix& x, std::span<const int> y,
                             std::span<const std::size_t> idx = {}) {
    shape.validate();
    require(theta.size() == shape.flat_len(), "log_likelihood: parameter length mismatch");
    require(x.cols == shape.input_dim, "log_likelihood: feature dimension mismatch");
    require(x.rows == y.size(), "log_likelihood: feature/label count mismatch");
    require(x.rows > 0, "log_likelihood: empty batch");

    std::vector<double> hidden(shape.hidden_dim), logits(shape.classes);
    double total = 0.0;
    const std::size_t n = idx.empty() ? x.rows : idx.size();
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t i = idx.empty() ? t : idx[t];
        const int label = y[i];
        require(label >= 0 && static_cast<std::size_t>(label) < shape.classes,
                "log_likelihood: label out of range: " + std::to_string(label));
        detail::mlp_logits(shape, theta, x.row_span(i), hidden, logits);
        double mx;
        const double lse = detail::log_softmax_denom(logits, mx);
        total += logits[static_cast<std::size_t>(label)] - lse;
    }
    return total;
}

inline double log_likelihood(const FlatParams& p, const Matrix& x, std::span<const int> y) {
    return log_likelihood(p.shape, p.theta, x, y);
}

// Exact gradient of log_likelihood at theta, accumulated into grad_out
// (which is zeroed first). `scale` multiplies the result; minibatch callers
// pass |D|/batch. Returns the log-likelihood of the same batch for free.
inline double grad_log_likelihood(const MlpShape& shape, std::span<const double> theta,
                                  const Matrix& x, std::span<const int> y,
                                  std::span<double> grad_out,
                                  std::span<const std::size_t> idx = {},
                                  double scale = 1.0) {
    shape.validate();
    require(theta.size() == shape.flat_len(), "grad_log_likelihood: parameter length mismatch");
    require(grad_out.size() == shape.flat_len(), "grad_log_likelihood: gradient length mismatch");
    require(x.cols == shape.input_dim, "grad_log_likelihood: feature dimension mismatch");
    require(x.rows == y.size(), "grad_log_likelihood: feature/label count mismatch");
    require(x.rows > 0, "grad_log_likelihood: empty batch");

    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    double* gw1 = grad_out.data() + shape.w1_offset();
    double* gb1 = grad_out.data() + shape.b1_offset();
    double* gw2 = grad_out.data() + shape.w2_offset();
    double* gb2 = grad_out.data() + shape.b2_offset();
    const double* w2 = theta.data() + shape.w2_offset();

    std::vector<double> hidden(shape.hidden_dim), logits(shape.classes),
        delta(shape.classes), dhidden(shape.hidden_dim);
    double total = 0.0;
    const std::size_t n = idx.empty() ? x.rows : idx.size();
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t i = idx.empty() ? t : idx[t];
        const int label = y[i];
        require(label >= 0 && static_cast<std::size_t>(label) < shape.classes,
                "grad_log_likelihood: label out of range: " + std::to_string(label));
        const double* xi = x.row(i);
        detail::mlp_logits(shape, theta, {xi, shape.input_dim}, hidden, logits);
        double mx;
        const double lse = detail::log_softmax_denom(logits, mx);
        total += logits[static_cast<std::size_t>(label)] - lse;

        // d log p / d logit_c = 1[c == y] - softmax_c
        for (std::size_t c = 0; c < shape.classes; ++c)
            delta[c] = (static_cast<std::size_t>(label) == c ? 1.0 : 0.0) -
                       std::exp(logits[c] - lse);

        for (std::size_t c = 0; c < shape.classes; ++c) {
            const double dc = delta[c];
            gb2[c] += dc;
            double* grow = gw2 + c * shape.hidden_dim;
            for (std::size_t j = 0; j < shape.hidden_dim; ++j) grow[j] += dc * hidden[j];
        }
        for (std::size_t j = 0; j < shape.hidden_dim; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < shape.classes; ++c)
                s += delta[c] * w2[c * shape.hidden_dim + j];
            dhidden[j] = hidden[j] > 0.0 ? s : 0.0;  // ReLU subgradient, 0 at 0
        }
        for (std::size_t j = 0; j < shape.hidden_dim; ++j) {
            const double dj = dhidden[j];
            if (dj == 0.0) continue;
            gb1[j] += dj;
            double* grow = gw1 + j * shape.input_dim;
            for (std::size_t d = 0; d < shape.input_dim; ++d) grow[d] += dj * xi[d];
        }
    }
    if (scale != 1.0)
        for (double& g : grad_out) g *= scale;
    return total * scale;
}

inline std::vector<double> grad_log_likelihood(const FlatParams& p, const Matrix& x,
                                               std::span<const int> y) {
    std::vector<double> grad(p.shape.flat_len());
    grad_log_likelihood(p.shape, p.theta, x, y, grad);
    return grad;
}

}  // namespace fedwba
