#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "f3i/neighbors.hpp"

using namespace f3i;

namespace {

DataMatrix random_matrix(std::size_t n, std::size_t f, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n * f);
    for (double& x : v) x = d(rng);
    return DataMatrix::complete(n, f, v);
}

std::vector<Neighbor> brute_knn(const DataMatrix& z, std::span<const double> x, std::size_t k) {
    std::vector<Neighbor> all;
    for (std::size_t j = 0; j < z.rows(); ++j) all.push_back({j, chebyshev_distance(x, z.row(j))});
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    });
    all.resize(k);
    return all;
}

// Direct sum of kernel terms in long double, no log-sum-exp.
long double direct_log_density(const DataMatrix& z, std::span<const double> x, double h) {
    long double total = 0.0L;
    for (std::size_t j = 0; j < z.rows(); ++j) {
        long double sq = 0.0L;
        for (std::size_t f = 0; f < x.size(); ++f) {
            const long double d = static_cast<long double>(x[f]) - z.value(j, f);
            sq += d * d;
        }
        total += std::exp(-sq / (4.0L * h));
    }
    const long double norm = std::sqrt(2.0L * std::numbers::pi_v<long double>) * h;
    return std::log(total / z.rows()) - static_cast<long double>(x.size()) * std::log(norm);
}

}  // namespace

TEST(NeighborIndex, RejectsBadInput) {
    EXPECT_THROW(NeighborIndex(DataMatrix::from_nan(2, 1, {1.0, kMissing}), 1.0), Error);
    EXPECT_THROW(NeighborIndex(DataMatrix::complete(1, 1, {1.0}), 0.0), Error);
    NeighborIndex idx(DataMatrix::complete(2, 1, {0.0, 1.0}), 1.0);
    EXPECT_THROW(idx.knn_chebyshev(std::vector<double>{0.0}, 3), Error);
    EXPECT_THROW(idx.knn_chebyshev(std::vector<double>{NAN}, 1), Error);
}

TEST(NeighborIndex, SinglePoint) {
    NeighborIndex idx(DataMatrix::complete(1, 2, {3.0, 4.0}), 0.7);
    const auto r = idx.knn_chebyshev(std::vector<double>{-10.0, 2.0}, 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].index, 0u);
    EXPECT_DOUBLE_EQ(r[0].distance, 13.0);
}

TEST(NeighborIndex, OneDimensionalExample) {
    NeighborIndex idx(DataMatrix::complete(4, 1, {0.0, 1.0, 2.0, 10.0}), 1.0);
    const auto r = idx.knn_chebyshev(std::vector<double>{1.4}, 2);
    EXPECT_EQ(r[0].index, 1u);
    EXPECT_EQ(r[1].index, 2u);
}

TEST(NeighborIndex, TiesBrokenByIndex) {
    // Points 0 and 2 are both at distance 1 from the query; 1 is farther.
    NeighborIndex idx(DataMatrix::complete(3, 1, {1.0, 5.0, -1.0}), 1.0);
    const auto r = idx.knn_chebyshev(std::vector<double>{0.0}, 2);
    EXPECT_EQ(r[0].index, 0u);
    EXPECT_EQ(r[1].index, 2u);
    // Many duplicates: order must be purely by index.
    NeighborIndex dup(DataMatrix::complete(20, 1, std::vector<double>(20, 3.0)), 1.0);
    const auto d = dup.knn_chebyshev(std::vector<double>{0.0}, 5);
    for (std::size_t q = 0; q < 5; ++q) EXPECT_EQ(d[q].index, q);
}

TEST(NeighborIndex, SelfQueryReturnsRow) {
    std::mt19937_64 rng(1);
    const auto z = random_matrix(100, 4, rng);
    NeighborIndex idx(z, 1.0);
    for (std::size_t j = 0; j < 100; ++j) {
        const auto r = idx.knn_chebyshev(z.row(j), 1);
        EXPECT_EQ(r[0].index, j);
        EXPECT_EQ(r[0].distance, 0.0);
    }
}

TEST(NeighborIndex, MatchesBruteForce) {
    std::mt19937_64 rng(2);
    const auto z = random_matrix(200, 5, rng);
    NeighborIndex idx(z, 1.0);
    std::normal_distribution<double> d(0.0, 1.2);
    for (int q = 0; q < 50; ++q) {
        std::vector<double> x(5);
        for (double& v : x) v = d(rng);
        const auto got = idx.knn_chebyshev(x, 7);
        const auto want = brute_knn(z, x, 7);
        for (std::size_t k = 0; k < 7; ++k) {
            EXPECT_EQ(got[k].index, want[k].index);
            EXPECT_EQ(got[k].distance, want[k].distance);
        }
    }
}

TEST(NeighborIndex, MatchesBruteForceOnQuantizedData) {
    // Integer grid values force many exact ties.
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> u(0, 3);
    std::vector<double> v(150 * 3);
    for (double& x : v) x = u(rng);
    const auto z = DataMatrix::complete(150, 3, v);
    NeighborIndex idx(z, 1.0);
    for (int q = 0; q < 40; ++q) {
        std::vector<double> x{double(u(rng)), double(u(rng)), double(u(rng))};
        const auto got = idx.knn_chebyshev(x, 9);
        const auto want = brute_knn(z, x, 9);
        for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(got[k].index, want[k].index);
    }
}

TEST(LogDensity, ClosedFormSinglePoint) {
    NeighborIndex idx(DataMatrix::complete(1, 1, {0.25}), 1.0);
    EXPECT_NEAR(idx.log_density(std::vector<double>{0.25}), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(idx.log_density(std::vector<double>{0.25}), -0.918939, 1e-6);
}

TEST(LogDensity, TranslationInvariant) {
    std::mt19937_64 rng(4);
    const auto z = random_matrix(30, 3, rng);
    const std::vector<double> shift{0.5, -2.0, 7.0};
    std::vector<double> moved = z.values();
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t f = 0; f < 3; ++f) moved[i * 3 + f] += shift[f];
    NeighborIndex a(z, 0.8), b(DataMatrix::complete(30, 3, moved), 0.8);
    std::vector<double> x{0.1, 0.2, 0.3}, y(3);
    for (std::size_t f = 0; f < 3; ++f) y[f] = x[f] + shift[f];
    EXPECT_NEAR(a.log_density(x), b.log_density(y), 1e-12);
}

TEST(LogDensity, PeakAtSinglePoint) {
    NeighborIndex idx(DataMatrix::complete(1, 2, {1.0, -1.0}), 0.5);
    const double peak = idx.log_density(std::vector<double>{1.0, -1.0});
    for (double t : {-1.0, -0.1, 0.01, 0.3}) EXPECT_LT(idx.log_density(std::vector<double>{1.0 + t, -1.0 + t}), peak);
}

TEST(LogDensity, MatchesExtendedPrecisionSum) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto z = random_matrix(100, 10, rng, 0.3);
        const double h = 0.2 + 0.1 * trial;
        NeighborIndex idx(z, h);
        std::vector<double> x(10);
        std::normal_distribution<double> d(0.0, 0.3);
        for (double& v : x) v = d(rng);
        const long double want = direct_log_density(z, x, h);
        EXPECT_NEAR(idx.log_density(x), static_cast<double>(want), 1e-10 * std::abs(double(want)) + 1e-12);
    }
}

TEST(LogDensity, WeightsAreSoftmaxOfKernel) {
    std::mt19937_64 rng(6);
    const auto z = random_matrix(10, 2, rng);
    NeighborIndex idx(z, 0.6);
    std::vector<double> x{0.1, -0.2}, w;
    idx.log_density(x, w);
    double s = 0.0, denom = 0.0;
    for (double v : w) s += v;
    EXPECT_NEAR(s, 1.0, 1e-14);
    for (std::size_t j = 0; j < 10; ++j) denom += std::exp(-squared_distance(x, z.row(j)) / 2.4);
    for (std::size_t j = 0; j < 10; ++j)
        EXPECT_NEAR(w[j], std::exp(-squared_distance(x, z.row(j)) / 2.4) / denom, 1e-14);
}

TEST(LogDensity, StableInHighDimension) {
    // (sqrt(2 pi) h)^-F underflows a naive product at F = 400.
    std::mt19937_64 rng(7);
    const auto z = random_matrix(20, 400, rng, 0.1);
    NeighborIndex idx(z, 0.01);
    const double v = idx.log_density(z.row(3));
    EXPECT_TRUE(std::isfinite(v));
}
