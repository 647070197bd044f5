#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "f3i/imputer.hpp"
#include "f3i/objective.hpp"
#include "f3i/synthgen.hpp"

using namespace f3i;

namespace {

struct Instance {
    DataMatrix x0;  // initial imputation (masked)
    double h;
};

Instance make_instance(std::size_t n, std::size_t f, std::size_t k, double p, std::uint64_t seed,
                       double h = 0.0) {
    const auto params = draw_gaussian_params(f, 0.1, seed);
    const auto truth = generate_complete(n, f, params, seed + 1);
    const auto masked = apply_mcar(truth, p, seed + 2);
    Instance in{knn_initial_impute(masked, k), h > 0 ? h : solve_bandwidth(1.0, k, 0.001, n)};
    return in;
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> a(k);
    double s = 0.0;
    for (double& v : a) s += (v = e(rng));
    for (double& v : a) v /= s;
    return a;
}

double direct_log_density(const DataMatrix& z, std::span<const double> x, double h) {
    std::vector<double> terms;
    for (std::size_t j = 0; j < z.rows(); ++j) terms.push_back(-squared_distance(x, z.row(j)) / (4 * h));
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s / z.rows()) - x.size() * std::log(std::sqrt(2 * std::numbers::pi) * h);
}

// G from its definition: brute-force Chebyshev neighbors in `ref`, density over `dens`.
double direct_G(const DataMatrix& ref, const DataMatrix& dens, const DataMatrix& state, double h, double eta,
                std::size_t k, std::span<const double> alpha) {
    double total = 0.0;
    for (std::size_t i = 0; i < state.rows(); ++i) {
        const auto x = state.row(i);
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t j = 0; j < ref.rows(); ++j) {
            double m = 0.0;
            for (std::size_t f = 0; f < x.size(); ++f) m = std::max(m, std::abs(x[f] - ref.value(j, f)));
            d.push_back({m, j});
        }
        std::sort(d.begin(), d.end());
        std::vector<double> y(x.begin(), x.end());
        for (std::size_t f = 0; f < x.size(); ++f) {
            if (!state.missing(i, f)) continue;
            y[f] = 0.0;
            for (std::size_t q = 0; q < k; ++q) y[f] += alpha[q] * ref.value(d[q].second, f);
        }
        total += direct_log_density(dens, y, h) - direct_log_density(dens, x, h);
    }
    double sq = 0.0;
    for (double a : alpha) sq += a * a;
    return total / state.rows() - eta * sq;
}

}  // namespace

TEST(Objective, NoMissingReducesToPenalty) {
    const auto x = DataMatrix::complete(6, 2, {0, 1, 1, 0, 2, 2, 0.5, 0.5, 1, 1, 3, 0});
    NeighborIndex idx(x, 1.0);
    ObjectiveContext ctx(idx, idx, x, 0.01, 3);
    const std::vector<double> a{0.2, 0.3, 0.5};
    EXPECT_NEAR(ctx.value(a), -0.01 * 0.38, 1e-15);
    const auto g = ctx.gradient(a);
    for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(g[q], -0.02 * a[q], 1e-15);
    const auto hm = ctx.hessian(a);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(hm[r * 3 + c], r == c ? -0.02 : 0.0, 1e-15);
}

TEST(Objective, ZeroWhenImputationUnchanged) {
    // Each row of X^0 is its own nearest reference row, so alpha = e_1 reproduces X^0.
    const auto in = make_instance(20, 4, 3, 0.2, 1);
    NeighborIndex idx(in.x0, in.h);
    ObjectiveContext ctx(idx, idx, in.x0, 0.0, 3);
    const std::vector<double> e1{1.0, 0.0, 0.0};
    EXPECT_EQ(ctx.impute(e1).values(), in.x0.values());
    EXPECT_EQ(ctx.value(e1), 0.0);
}

TEST(Objective, MatchesDirectDefinition) {
    std::mt19937_64 rng(2);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto in = make_instance(20, 5, 3, 0.3, 10 + s);
        NeighborIndex idx(in.x0, in.h);
        const auto a0 = random_simplex(3, rng);
        ObjectiveContext ctx0(idx, idx, in.x0, 0.001, 3);
        const auto state = ctx0.impute(a0);  // a later iterate X^1
        ObjectiveContext ctx(idx, idx, state, 0.001, 3);
        const auto a = random_simplex(3, rng);
        EXPECT_NEAR(ctx.value(a), direct_G(in.x0, in.x0, state, in.h, 0.001, 3, a), 1e-10);
    }
}

TEST(Objective, GroundTruthVariantMatchesDirectDefinition) {
    std::mt19937_64 rng(3);
    const auto params = draw_gaussian_params(5, 0.1, 3);
    const auto truth = generate_complete(20, 5, params, 4);
    const auto x0 = knn_initial_impute(apply_mcar(truth, 0.3, 5), 3);
    const double h = solve_bandwidth(1.0, 3, 0.001, 20);
    NeighborIndex ref(x0, h), star(truth, h);
    ObjectiveContext ctx(ref, star, x0, 0.001, 3);
    const auto a = random_simplex(3, rng);
    EXPECT_NEAR(ctx.value(a), direct_G(x0, truth, x0, h, 0.001, 3, a), 1e-10);
    // With the density on an identical copy of X^0 the two objectives coincide.
    NeighborIndex copy(x0, h);
    ObjectiveContext same(ref, copy, x0, 0.001, 3);
    ObjectiveContext plain(ref, ref, x0, 0.001, 3);
    EXPECT_EQ(same.value(a), plain.value(a));
}

TEST(Objective, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto in = make_instance(25, 6, 4, 0.3, 100 + s);
        NeighborIndex idx(in.x0, in.h);
        ObjectiveContext ctx(idx, idx, in.x0, 0.001, 4);
        const auto a = random_simplex(4, rng);
        const auto g = ctx.gradient(a);
        double scale = 0.0;
        for (double v : g) scale = std::max(scale, std::abs(v));
        for (std::size_t q = 0; q < 4; ++q) {
            auto ap = a, am = a;
            ap[q] += 1e-5;
            am[q] -= 1e-5;
            const double fd = (ctx.value(ap) - ctx.value(am)) / 2e-5;
            EXPECT_LT(std::abs(fd - g[q]), 1e-5 * std::max(scale, 1e-12)) << "coordinate " << q;
        }
        std::vector<double> g2;
        EXPECT_NEAR(ctx.value_and_gradient(a, g2), ctx.value(a), 1e-15);
        EXPECT_EQ(g2, g);
    }
}

TEST(Objective, HessianMatchesDifferentiatedGradient) {
    std::mt19937_64 rng(5);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto in = make_instance(25, 6, 3, 0.3, 200 + s);
        NeighborIndex idx(in.x0, in.h);
        ObjectiveContext ctx(idx, idx, in.x0, 0.001, 3);
        const auto a = random_simplex(3, rng);
        const auto hm = ctx.hessian(a);
        double scale = 0.0;
        for (double v : hm) scale = std::max(scale, std::abs(v));
        for (std::size_t q = 0; q < 3; ++q) {
            auto ap = a, am = a;
            ap[q] += 1e-5;
            am[q] -= 1e-5;
            const auto gp = ctx.gradient(ap), gm = ctx.gradient(am);
            for (std::size_t r = 0; r < 3; ++r)
                EXPECT_LT(std::abs((gp[r] - gm[r]) / 2e-5 - hm[r * 3 + q]), 1e-4 * scale);
        }
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(hm[r * 3 + c], hm[c * 3 + r], 1e-12 * scale);
    }
}

TEST(Objective, GradientSymmetricUnderNeighborExchange) {
    // Two identical reference rows are interchangeable, so their coordinates of the
    // gradient agree whenever their weights agree.
    const auto x = DataMatrix::from_nan(4, 2, {0.0, kMissing, 0.1, 1.0, 0.1, 1.0, 5.0, 5.0});
    const auto filled = x.with_values({0.0, 2.0, 0.1, 1.0, 0.1, 1.0, 5.0, 5.0});
    NeighborIndex idx(filled, 1.0);
    ObjectiveContext ctx(idx, idx, filled, 0.0, 3);
    ASSERT_EQ(ctx.neighbors(0)[1], 1u);
    ASSERT_EQ(ctx.neighbors(0)[2], 2u);
    const auto g = ctx.gradient(std::vector<double>{0.2, 0.4, 0.4});
    EXPECT_NEAR(g[1], g[2], 1e-15);
}

TEST(Objective, ConcaveAtSolvedBandwidth) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto in = make_instance(30, 8, 5, 0.3, 300 + s);
        NeighborIndex idx(in.x0, in.h);
        ObjectiveContext ctx(idx, idx, in.x0, 0.001, 5);
        const auto hm = ctx.hessian(random_simplex(5, rng));
        for (int t = 0; t < 20; ++t) {
            std::vector<double> v(5);
            double nn = 0.0;
            for (double& x : v) nn += (x = nd(rng)) * x;
            for (double& x : v) x /= std::sqrt(nn);
            double q = 0.0;
            for (std::size_t r = 0; r < 5; ++r)
                for (std::size_t c = 0; c < 5; ++c) q += v[r] * hm[r * 5 + c] * v[c];
            EXPECT_LT(q, 0.0);
        }
    }
}

TEST(Objective, GradientLipschitzRatioBounded) {
    std::mt19937_64 rng(7);
    const auto in = make_instance(20, 5, 3, 0.3, 400);
    NeighborIndex idx(in.x0, in.h);
    ObjectiveContext ctx(idx, idx, in.x0, 0.001, 3);
    double worst = 0.0;
    for (int t = 0; t < 2000; ++t) {
        const auto a = random_simplex(3, rng), b = random_simplex(3, rng);
        const auto ga = ctx.gradient(a), gb = ctx.gradient(b);
        const double ratio = std::sqrt(squared_distance(ga, gb)) / std::sqrt(squared_distance(a, b));
        worst = std::max(worst, ratio);
    }
    EXPECT_TRUE(std::isfinite(worst));
    // Spectral norm of the Hessian bounds the ratio for a smooth function; allow slack.
    EXPECT_LT(worst, 1e6);
}

TEST(Bandwidth, MatchesBisectionOracle) {
    const double s = 1.0, eta = 0.001;
    const std::size_t k = 2, n = 50;
    const double b = (4 * s * s * k - eta) / (2 * k * s);
    EXPECT_NEAR(b, 1.99975, 1e-12);
    double lo = b / 3, hi = 1e3;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (bandwidth_cubic(mid, s, k, eta, n) > 0 ? lo : hi) = mid;
    }
    const double h = solve_bandwidth(s, k, eta, n);
    EXPECT_NEAR(h, 0.5 * (lo + hi), 1e-10);
    EXPECT_GT(h, b / 3);
    EXPECT_LT(std::abs(bandwidth_cubic(h, s, k, eta, n)), 1e-8 * 625);
    EXPECT_LT(bandwidth_cubic(h * (1 + 1e-9), s, k, eta, n), 0.0);
}

TEST(Bandwidth, ReferenceValueAndLimits) {
    EXPECT_NEAR(solve_bandwidth(1.0, 5, 0.001, 50), 7.136, 1e-3);
    // c small against b^3: root approaches b / 2.
    const double s = 100.0;
    const double b = (4 * s * s * 5) / (2 * 5 * s);
    const double h = solve_bandwidth(s, 5, 0.0, 1);
    EXPECT_NEAR(h / (b / 2), 1.0, 1e-3);
    EXPECT_THROW(solve_bandwidth(1.0, 5, 20.0, 50), Error);
}

TEST(Bandwidth, ResidualAcrossParameters) {
    for (double s : {0.1, 1.0, 4.0})
        for (std::size_t k : {2u, 5u, 10u})
            for (std::size_t n : {10u, 50u, 1000u}) {
                const double h = solve_bandwidth(s, k, 0.001, n);
                const double c = double(n) * n * s / 4;
                EXPECT_LT(std::abs(bandwidth_cubic(h, s, k, 0.001, n)), 1e-8 * std::max(1.0, c));
                EXPECT_LT(bandwidth_cubic(h * (1 + 1e-9), s, k, 0.001, n), 0.0);
            }
}

TEST(Telescope, ResidualOnCompletedRuns) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto params = draw_gaussian_params(20, 0.1, s);
        const auto x = apply_mcar(generate_complete(40, 20, params, s + 1), 0.25, s + 2);
        Config cfg;
        cfg.max_iter = 5;
        cfg.bandwidth = 0.05;  // small bandwidth keeps G positive for several rounds
        cfg.seed = s;
        const auto run = f3i_run(x, cfg);
        const auto& tr = run.trace;
        EXPECT_LT(telescope_residual(tr.g_values, tr.log_density_start, tr.log_density_end, cfg.eta, tr.alphas),
                  1e-8);
    }
}

TEST(Telescope, SingleStepIsExact) {
    const auto params = draw_gaussian_params(10, 0.1, 9);
    const auto x = apply_mcar(generate_complete(30, 10, params, 10), 0.25, 11);
    Config cfg;
    cfg.max_iter = 1;
    const auto run = f3i_run(x, cfg);
    const auto& tr = run.trace;
    EXPECT_LT(telescope_residual(tr.g_values, tr.log_density_start, tr.log_density_end, cfg.eta, tr.alphas), 1e-12);
}
