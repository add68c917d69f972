#include <catch2/catch.hpp>

#include <cmath>

#include "fedwba/numerics.hpp"

using namespace fedwba;

TEST_CASE("pairwise_sq_dists matches hand values") {
    const Matrix zero = Matrix::from_rows({{0.0, 0.0}});
    const Matrix d = pairwise_sq_dists(zero, zero);
    CHECK(d(0, 0) == 0.0);

    const Matrix p345 = Matrix::from_rows({{3.0, 4.0}});
    CHECK(pairwise_sq_dists(zero, p345)(0, 0) == Approx(25.0));

    const Matrix a = Matrix::from_rows({{1.0, 2.0}, {0.0, 0.0}});
    const Matrix b = Matrix::from_rows({{1.0, 2.0}});
    const Matrix out = pairwise_sq_dists(a, b);
    CHECK(out.rows == 2);
    CHECK(out.cols == 1);
    CHECK(out(0, 0) == Approx(0.0));
    CHECK(out(1, 0) == Approx(5.0));
}

TEST_CASE("pairwise_sq_dists of a cloud with itself is symmetric with zero diagonal") {
    Rng rng(42);
    Matrix a(6, 3);
    for (double& v : a.data) v = rng.normal();
    const Matrix d = pairwise_sq_dists(a, a);
    for (std::size_t i = 0; i < a.rows; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < a.rows; ++j) {
            CHECK(d(i, j) == Approx(d(j, i)));
            CHECK(d(i, j) >= 0.0);
        }
    }
}

TEST_CASE("pairwise_sq_dists rejects mismatched dims") {
    CHECK_THROWS_AS(pairwise_sq_dists(Matrix(1, 2), Matrix(1, 3)), std::invalid_argument);
}

TEST_CASE("median") {
    CHECK(median(std::vector<double>{3.0}) == 3.0);
    CHECK(median(std::vector<double>{1.0, 2.0, 3.0, 4.0}) == Approx(2.5));
    CHECK(median(std::vector<double>{5.0, 1.0, 9.0}) == 5.0);
    CHECK_THROWS_AS(median(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("median is permutation-invariant") {
    Rng rng(7);
    std::vector<double> v(11);
    for (double& x : v) x = rng.normal();
    const double base = median(v);
    for (int t = 0; t < 20; ++t) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.uniform_index(i)]);
        CHECK(median(v) == base);
    }
}

TEST_CASE("log_sum_exp") {
    const double single[] = {0.0};
    CHECK(log_sum_exp(single) == 0.0);

    const double pair[] = {2.5, 2.5};
    CHECK(log_sum_exp(pair) == Approx(2.5 + std::log(2.0)));

    // overflow-safe: naive exp(1000) is inf
    const double big[] = {1000.0, 1000.0};
    CHECK(log_sum_exp(big) == Approx(1000.0 + std::log(2.0)));

    CHECK_THROWS_AS(log_sum_exp(std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("log_sum_exp shift identity") {
    Rng rng(3);
    std::vector<double> v(9);
    for (double& x : v) x = 2.0 * rng.normal();
    const double base = log_sum_exp(v);
    for (double c : {-5.0, 0.25, 12.0}) {
        std::vector<double> shifted = v;
        for (double& x : shifted) x += c;
        CHECK(log_sum_exp(shifted) == Approx(base + c).epsilon(1e-12));
    }
}

TEST_CASE("Rng is reproducible and splits are stable") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(123);
    c.next_u64();  // consuming the parent stream must not move children
    Rng child1 = Rng(123).split(5);
    Rng child2 = c.split(5);
    for (int i = 0; i < 10; ++i) CHECK(child1.next_u64() == child2.next_u64());

    Rng other = Rng(123).split(6);
    CHECK(other.next_u64() != Rng(123).split(5).next_u64());
}

TEST_CASE("Rng normal moments are sane") {
    Rng rng(99);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(sum / n == Approx(0.0).margin(0.03));
    CHECK(sq / n == Approx(1.0).margin(0.05));
}

TEST_CASE("sample_without_replacement returns distinct indices") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        auto s = rng.sample_without_replacement(10, 4);
        REQUIRE(s.size() == 4);
        std::sort(s.begin(), s.end());
        CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
        for (auto i : s) CHECK(i < 10);
    }
}

TEST_CASE("parallel_for output is independent of worker count") {
    std::vector<double> one(1000), four(1000);
    auto fill = [](std::vector<double>& out) {
        return [&out](std::size_t i) {
            out[i] = std::sin(static_cast<double>(i)) * 3.0;
        };
    };
    parallel_for(one.size(), 1, fill(one));
    parallel_for(four.size(), 4, fill(four));
    CHECK(one == four);
}

TEST_CASE("cholesky round-trips a small SPD matrix") {
    const Matrix a = Matrix::from_rows({{4.0, 1.0}, {1.0, 3.0}});
    const Matrix l = cholesky(a);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 2; ++k) s += l(i, k) * l(j, k);
            CHECK(s == Approx(a(i, j)));
        }
    const double b[] = {1.0, 2.0};
    const auto x = forward_solve(l, b);
    CHECK(l(0, 0) * x[0] == Approx(1.0));
    CHECK(l(1, 0) * x[0] + l(1, 1) * x[1] == Approx(2.0));
}
