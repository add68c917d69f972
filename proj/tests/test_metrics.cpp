#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fedwba/metrics.hpp"
#include "fedwba/ot.hpp"
#include "fedwba/validate.hpp"

using namespace fedwba;

namespace {

// 2-class model whose logits for a fixed input are (l0, l1): hidden unit 0
// fires with activation 1, W2 column carries the logits.
std::vector<double> params_with_logits(const MlpShape& shape, double l0, double l1) {
    std::vector<double> theta(shape.flat_len(), 0.0);
    auto v = view_params(shape, std::span<double>(theta));
    v.b1[0] = 1.0;  // hidden0 = 1 regardless of x
    v.w2[0] = l0;   // class0 <- hidden0
    v.w2[shape.hidden_dim] = l1;
    return theta;
}

}  // namespace

TEST_CASE("predict_ensemble with one particle equals forward") {
    const MlpShape shape{2, 2, 2};
    Matrix particles(1, shape.flat_len());
    Rng rng(3);
    for (double& v : particles.data) v = 0.3 * rng.normal();
    const double x[] = {0.5, 0.1};
    const auto mixed = predict_ensemble(particles, shape, x);
    const auto single = forward(shape, particles.row_span(0), x);
    for (std::size_t c = 0; c < 2; ++c) CHECK(mixed[c] == Approx(single[c]));
}

TEST_CASE("predict_ensemble averages two particles") {
    const MlpShape shape{1, 1, 2};
    Matrix particles(2, shape.flat_len());
    const auto a = params_with_logits(shape, 2.0, 0.0);
    const auto b = params_with_logits(shape, 0.0, 1.0);
    std::copy(a.begin(), a.end(), particles.row(0));
    std::copy(b.begin(), b.end(), particles.row(1));
    const double x[] = {0.0};
    const auto pa = forward(shape, a, x);
    const auto pb = forward(shape, b, x);
    const auto mix = predict_ensemble(particles, shape, x);
    for (std::size_t c = 0; c < 2; ++c)
        CHECK(mix[c] == Approx(0.5 * (pa[c] + pb[c])).epsilon(1e-12));
    CHECK(mix[0] + mix[1] == Approx(1.0).epsilon(1e-12));

    // identical particles are idempotent
    std::copy(a.begin(), a.end(), particles.row(1));
    const auto same = predict_ensemble(particles, shape, x);
    for (std::size_t c = 0; c < 2; ++c) CHECK(same[c] == Approx(pa[c]).epsilon(1e-12));
}

TEST_CASE("accuracy on hand-built datasets") {
    // logits track the input coordinates, so argmax(prob) == argmax(x)
    const MlpShape shape{2, 2, 2};
    std::vector<double> theta(shape.flat_len(), 0.0);
    auto v = view_params(shape, std::span<double>(theta));
    v.w1[0] = 5.0;                    // hidden0 <- 5 x0
    v.w1[shape.input_dim + 1] = 5.0;  // hidden1 <- 5 x1
    v.w2[0] = 5.0;                    // class0 <- hidden0
    v.w2[shape.hidden_dim + 1] = 5.0; // class1 <- hidden1
    Matrix particles(1, shape.flat_len());
    std::copy(theta.begin(), theta.end(), particles.row(0));

    Dataset d;
    d.classes = 2;
    d.features = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}});
    d.labels = {0, 1, 0, 0};  // 3 of 4 predicted correctly
    CHECK(accuracy(particles, d, shape) == Approx(0.75));

    d.labels = {0, 1, 0, 1};
    CHECK(accuracy(particles, d, shape) == 1.0);
    d.labels = {1, 0, 1, 0};
    CHECK(accuracy(particles, d, shape) == 0.0);
}

TEST_CASE("ece of a single confident correct sample") {
    const MlpShape shape{1, 1, 2};
    Matrix particles(1, shape.flat_len());
    const auto theta = params_with_logits(shape, std::log(9.0), 0.0);  // probs (0.9, 0.1)
    std::copy(theta.begin(), theta.end(), particles.row(0));
    Dataset d;
    d.classes = 2;
    d.features = Matrix(1, 1, 0.0);
    d.labels = {0};
    const auto [value, bins] = ece(particles, d, shape);
    CHECK(value == Approx(0.1).epsilon(1e-9));
    CHECK(bins.bins[9].count == 1);
    CHECK(bins.bins[9].mean_confidence == Approx(0.9).epsilon(1e-9));
}

TEST_CASE("ece of a perfectly calibrated constructed set is zero") {
    // ten samples, every confidence exactly 0.8, eight of them correct
    const MlpShape shape{1, 1, 2};
    Matrix particles(1, shape.flat_len());
    const auto theta = params_with_logits(shape, std::log(4.0), 0.0);  // probs (0.8, 0.2)
    std::copy(theta.begin(), theta.end(), particles.row(0));
    Dataset d;
    d.classes = 2;
    d.features = Matrix(10, 1, 0.0);
    d.labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
    const auto [value, bins] = ece(particles, d, shape);
    CHECK(value == Approx(0.0).margin(1e-9));
    CHECK(bins.bins[8].count == 10);
}

TEST_CASE("ece of a four-sample two-bin case matches the hand-computed sum") {
    // two samples at confidence 0.65 (one correct), two at 0.95 (both correct):
    // ECE = .5 |.5 - .65| + .5 |1 - .95| = 0.1
    const MlpShape shape{1, 1, 2};
    const auto lo = params_with_logits(shape, std::log(65.0 / 35.0), 0.0);
    const auto hi = params_with_logits(shape, std::log(19.0), 0.0);

    Matrix lo_p(1, shape.flat_len()), hi_p(1, shape.flat_len());
    std::copy(lo.begin(), lo.end(), lo_p.row(0));
    std::copy(hi.begin(), hi.end(), hi_p.row(0));

    Dataset lo_d, hi_d;
    lo_d.classes = hi_d.classes = 2;
    lo_d.features = Matrix(2, 1, 0.0);
    lo_d.labels = {0, 1};
    hi_d.features = Matrix(2, 1, 0.0);
    hi_d.labels = {0, 0};

    // evaluate the two halves separately, then combine by bin arithmetic
    const auto [lo_e, lo_bins] = ece(lo_p, lo_d, shape);
    const auto [hi_e, hi_bins] = ece(hi_p, hi_d, shape);
    CHECK(lo_e == Approx(0.15).epsilon(1e-9));
    CHECK(hi_e == Approx(0.05).epsilon(1e-9));
    const double combined = 0.5 * lo_e + 0.5 * hi_e;
    CHECK(combined == Approx(0.1).epsilon(1e-9));
}

TEST_CASE("ece of a one-hot always-correct predictor is ~0 and within [0,1]") {
    const MlpShape shape{1, 1, 2};
    Matrix particles(1, shape.flat_len());
    const auto theta = params_with_logits(shape, 50.0, 0.0);
    std::copy(theta.begin(), theta.end(), particles.row(0));
    Dataset d;
    d.classes = 2;
    d.features = Matrix(5, 1, 0.0);
    d.labels = {0, 0, 0, 0, 0};
    const auto [value, bins] = ece(particles, d, shape);
    CHECK(value == Approx(0.0).margin(1e-12));
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
}

TEST_CASE("gaussian_fit_kl is ~0 when the moments match exactly") {
    const Matrix particles = Matrix::from_rows({{-1.0}, {1.0}});  // mean 0, var 2
    const Matrix cov = Matrix::from_rows({{2.0}});
    const double mean[] = {0.0};
    CHECK(gaussian_fit_kl(particles, mean, cov) == Approx(0.0).margin(1e-9));
}

TEST_CASE("gaussian_fit_kl shifted-mean closed form and quadratic scaling") {
    const double s = 1.0 / std::sqrt(2.0);  // two points at delta +- s: sample var 1
    const Matrix cov = Matrix::from_rows({{1.0}});
    const double mean[] = {0.0};

    const double delta = 0.7;
    const Matrix p1 = Matrix::from_rows({{delta - s}, {delta + s}});
    const double kl1 = gaussian_fit_kl(p1, mean, cov);
    CHECK(kl1 == Approx(delta * delta / 2.0).epsilon(1e-4));

    const Matrix p2 = Matrix::from_rows({{2.0 * delta - s}, {2.0 * delta + s}});
    const double kl2 = gaussian_fit_kl(p2, mean, cov);
    CHECK(kl2 == Approx(4.0 * kl1).epsilon(1e-4));
}

TEST_CASE("w2_to_point examples") {
    const Matrix at_point = Matrix::from_rows({{2.0, 3.0}, {2.0, 3.0}});
    const double point[] = {2.0, 3.0};
    CHECK(w2_to_point(at_point, point) == 0.0);

    const Matrix single = Matrix::from_rows({{3.0, 7.0}});
    const double origin[] = {0.0, 3.0};
    CHECK(w2_to_point(single, origin) == Approx(5.0));

    const Matrix pair = Matrix::from_rows({{0.0}, {2.0}});
    const double one[] = {1.0};
    CHECK(w2_to_point(pair, one) == Approx(1.0));
}

TEST_CASE("w2_to_point agrees with the OT distance to a replicated point cloud") {
    Rng rng(19);
    Matrix particles(6, 3);
    for (double& v : particles.data) v = rng.normal();
    const std::vector<double> point = {0.3, -0.7, 1.1};
    Matrix replicated(6, 3);
    for (std::size_t i = 0; i < 6; ++i)
        std::copy(point.begin(), point.end(), replicated.row(i));
    CHECK(w2_to_point(particles, point) ==
          Approx(w2_distance(particles, replicated)).epsilon(1e-12));
}

TEST_CASE("reliability bins export as CSV") {
    const MlpShape shape{1, 1, 2};
    Matrix particles(1, shape.flat_len());
    const auto theta = params_with_logits(shape, std::log(4.0), 0.0);
    std::copy(theta.begin(), theta.end(), particles.row(0));
    Dataset d;
    d.classes = 2;
    d.features = Matrix(4, 1, 0.0);
    d.labels = {0, 0, 0, 1};
    const auto [value, bins] = ece(particles, d, shape);

    const auto path = (std::filesystem::temp_directory_path() / "fedwba_bins.csv").string();
    write_reliability_csv(bins, path);
    std::ifstream f(path);
    std::string header, row;
    std::getline(f, header);
    CHECK(header == "bin_low,bin_high,count,mean_conf,mean_acc");
    std::size_t rows = 0;
    while (std::getline(f, row)) ++rows;
    CHECK(rows == 10);
}

TEST_CASE("barycenter contraction suite: W2 to the true mean shrinks with data size") {
    const auto result = barycenter_contraction_suite();
    INFO(result.detail);
    CHECK(result.pass);
}
