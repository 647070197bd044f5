#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "f3i/imputer.hpp"
#include "f3i/objective.hpp"
#include "f3i/synthgen.hpp"

using namespace f3i;

namespace {

DataMatrix masked_gaussian(std::size_t n, std::size_t f, double p, std::uint64_t seed) {
    const auto params = draw_gaussian_params(f, 0.1, seed);
    return apply_mcar(generate_complete(n, f, params, seed + 1), p, seed + 2);
}

// Cell-by-cell exhaustive KNN: distances over shared observed coordinates scaled by F / shared.
double oracle_cell(const DataMatrix& x, std::size_t i, std::size_t f, std::size_t k, bool inverse) {
    std::vector<std::pair<double, std::size_t>> c;
    for (std::size_t j = 0; j < x.rows(); ++j) {
        if (j == i || x.missing(j, f)) continue;
        double s = 0.0;
        std::size_t shared = 0;
        for (std::size_t q = 0; q < x.cols(); ++q)
            if (!x.missing(i, q) && !x.missing(j, q)) s += std::pow(x.value(i, q) - x.value(j, q), 2), ++shared;
        if (shared == 0) continue;
        c.push_back({std::sqrt(double(x.cols()) / shared * s), j});
    }
    std::sort(c.begin(), c.end());
    k = std::min(k, c.size());
    bool exact = false;
    for (std::size_t q = 0; q < k; ++q) exact |= c[q].first == 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
        double w = 1.0;
        if (inverse) w = exact ? (c[q].first == 0.0 ? 1.0 : 0.0) : 1.0 / c[q].first;
        num += w * x.value(c[q].second, f);
        den += w;
    }
    return num / den;
}

}  // namespace

TEST(KnnImpute, NoMissingIsIdentity) {
    const auto x = DataMatrix::complete(3, 2, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(knn_initial_impute(x, 2).values(), x.values());
}

TEST(KnnImpute, SingleFeatureMean) {
    const auto x = DataMatrix::from_nan(4, 1, {1, 2, 3, kMissing});
    const auto r = knn_initial_impute(x, 3);
    EXPECT_DOUBLE_EQ(r.value(3, 0), 2.0);
    EXPECT_TRUE(r.missing(3, 0));
}

TEST(KnnImpute, MatchesExhaustiveOracle) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto x = masked_gaussian(30, 6, 0.3, s * 7);
        for (bool inverse : {false, true}) {
            const auto r = knn_impute(x, 4, inverse ? Weighting::inverse_distance : Weighting::uniform);
            for (std::size_t i = 0; i < 30; ++i)
                for (std::size_t f = 0; f < 6; ++f) {
                    if (x.missing(i, f))
                        EXPECT_NEAR(r.value(i, f), oracle_cell(x, i, f, 4, inverse), 1e-14);
                    else
                        EXPECT_EQ(r.value(i, f), x.value(i, f));
                }
        }
    }
}

TEST(KnnImpute, NanEuclideanScaling) {
    const std::vector<double> a{1.0, kMissing, 3.0}, b{2.0, 5.0, kMissing};
    const std::vector<std::uint8_t> ma{0, 1, 0}, mb{0, 0, 1};
    EXPECT_DOUBLE_EQ(nan_euclidean(a, ma, b, mb), std::sqrt(3.0 * 1.0));
    const std::vector<std::uint8_t> none{1, 1, 1};
    EXPECT_TRUE(std::isinf(nan_euclidean(a, none, b, mb)));
}

TEST(KnnImpute, ClampsNeighborCountAndRejectsSparseFeature) {
    const auto x = DataMatrix::from_nan(4, 2, {1, 0, 2, 1, kMissing, 1, kMissing, 2});
    // Column 0 has two observed values; K = 3 is clamped with a warning.
    static int warnings = 0;
    set_warning_sink([](const char*) { ++warnings; });
    const auto r = knn_initial_impute(x, 3);
    set_warning_sink(nullptr);
    EXPECT_GE(warnings, 1);
    EXPECT_DOUBLE_EQ(r.value(2, 0), 1.5);
    const auto bad = DataMatrix::from_nan(3, 1, {1, kMissing, kMissing});
    EXPECT_THROW(knn_initial_impute(bad, 2), Error);
}

TEST(KnnImpute, DistanceWeightingSpecialCases) {
    // Row 0 equidistant from rows 1 and 2: inverse weights match uniform ones.
    const auto x = DataMatrix::from_nan(3, 2, {0, kMissing, 1, 10, -1, 20});
    EXPECT_DOUBLE_EQ(knn_distance_impute(x, 2).value(0, 1), knn_initial_impute(x, 2).value(0, 1));
    // Exact match copies that donor.
    const auto y = DataMatrix::from_nan(3, 2, {0, kMissing, 0, 10, 3, 20});
    EXPECT_DOUBLE_EQ(knn_distance_impute(y, 2).value(0, 1), 10.0);
}

TEST(MeanImpute, ColumnMeans) {
    const auto x = DataMatrix::from_nan(3, 2, {1, 5, 3, kMissing, kMissing, 7});
    const auto r = mean_impute(x);
    EXPECT_DOUBLE_EQ(r.value(2, 0), 2.0);
    EXPECT_DOUBLE_EQ(r.value(1, 1), 6.0);
    EXPECT_THROW(mean_impute(DataMatrix::from_nan(2, 1, {kMissing, kMissing})), Error);
    const auto c = DataMatrix::complete(2, 1, {1, 2});
    EXPECT_EQ(mean_impute(c).values(), c.values());
}

TEST(MeanImpute, MatchesDirectOracle) {
    const auto x = masked_gaussian(40, 5, 0.3, 3);
    const auto r = mean_impute(x);
    for (std::size_t f = 0; f < 5; ++f) {
        double s = 0.0;
        int c = 0;
        for (std::size_t i = 0; i < 40; ++i)
            if (!x.missing(i, f)) s += x.value(i, f), ++c;
        for (std::size_t i = 0; i < 40; ++i)
            if (x.missing(i, f)) EXPECT_EQ(r.value(i, f), s / c);
    }
}

TEST(ImputeStep, SpecExamples) {
    const auto z = DataMatrix::complete(3, 2, {1, 2, 1, 4, 9, 9});
    NeighborIndex idx(z, 1.0);
    const std::vector<double> x{1.0, 3.0};
    const std::vector<std::uint8_t> mask{0, 1};
    const auto r = impute_step(x, mask, std::vector<double>{0.5, 0.5}, idx, 2);
    EXPECT_DOUBLE_EQ(r[0], 1.0);
    EXPECT_DOUBLE_EQ(r[1], 3.0);
    // Vertex weights copy the nearest neighbor (row 0 at Chebyshev distance 1 wins the tie by index).
    const auto v = impute_step(x, mask, std::vector<double>{1.0, 0.0}, idx, 2);
    EXPECT_DOUBLE_EQ(v[1], 2.0);
    const std::vector<std::uint8_t> none{0, 0};
    EXPECT_EQ(impute_step(x, none, std::vector<double>{0.5, 0.5}, idx, 2), x);
    EXPECT_THROW(impute_step(x, mask, std::vector<double>{0.25, 0.25, 0.25, 0.25}, idx, 4), Error);
}

TEST(ImputeStep, ConvexHull) {
    std::mt19937_64 rng(5);
    const auto x = masked_gaussian(40, 5, 0.3, 9);
    const auto x0 = knn_initial_impute(x, 4);
    NeighborIndex idx(x0, 1.0);
    std::exponential_distribution<double> e(1.0);
    for (std::size_t i = 0; i < 40; ++i) {
        std::vector<double> a(4);
        double s = 0.0;
        for (double& v : a) s += (v = e(rng));
        for (double& v : a) v /= s;
        const auto out = impute_step(x0.row(i), x0.mask_row(i), a, idx, 4);
        const auto nb = idx.knn_chebyshev(x0.row(i), 4);
        for (std::size_t f = 0; f < 5; ++f) {
            if (!x0.missing(i, f)) continue;
            double lo = 1e300, hi = -1e300;
            for (const auto& n : nb) lo = std::min(lo, idx.point(n.index)[f]), hi = std::max(hi, idx.point(n.index)[f]);
            EXPECT_GE(out[f], lo - 1e-15);
            EXPECT_LE(out[f], hi + 1e-15);
        }
    }
}

TEST(F3IRun, NoMissingStopsImmediately) {
    const auto x = DataMatrix::complete(10, 2, {0, 1, 1, 0, 2, 2, 0.5, 0.5, 1, 1, 3, 0, 4, 4, 2, 1, 0, 3, 1, 2});
    const auto r = f3i_run(x, Config{});
    EXPECT_EQ(r.trace.final_t, 1u);
    EXPECT_EQ(r.trace.stop_reason, StopReason::early_stop);
    EXPECT_EQ(r.imputed.values(), x.values());
}

TEST(F3IRun, ContractsOnSyntheticData) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto x = masked_gaussian(50, 100, 0.25, 50 + s);
        Config cfg;
        cfg.seed = s;
        const auto r = f3i_run(x, cfg);
        const auto& tr = r.trace;
        EXPECT_EQ(tr.alphas.size(), tr.final_t);
        EXPECT_EQ(tr.g_values.size(), tr.final_t);
        EXPECT_EQ(tr.stop_reason == StopReason::early_stop, tr.g_values.back() <= 0.0);
        for (std::size_t t = 0; t + 1 < tr.final_t; ++t) EXPECT_GT(tr.g_values[t], 0.0);
        EXPECT_LT(telescope_residual(tr.g_values, tr.log_density_start, tr.log_density_end, cfg.eta, tr.alphas), 1e-8);
        for (std::size_t i = 0; i < 50; ++i)
            for (std::size_t f = 0; f < 100; ++f)
                if (!x.missing(i, f)) EXPECT_EQ(r.imputed.value(i, f), x.value(i, f));
        EXPECT_TRUE(r.imputed.all_finite());
        EXPECT_EQ(r.imputed.mask(), x.mask());
    }
}

TEST(F3IRun, Deterministic) {
    const auto x = masked_gaussian(30, 10, 0.3, 77);
    Config cfg;
    cfg.bandwidth = 0.05;
    cfg.max_iter = 8;
    const auto a = f3i_run(x, cfg), b = f3i_run(x, cfg);
    EXPECT_EQ(a.imputed.values(), b.imputed.values());
    EXPECT_EQ(a.trace.alphas, b.trace.alphas);
}

TEST(F3IRun, ReturnsLastIterateOnlyWhenBudgetExhausted) {
    const auto x = masked_gaussian(30, 10, 0.3, 78);
    Config cfg;
    cfg.bandwidth = 0.05;
    cfg.max_iter = 3;
    RunOptions opts;
    opts.keep_states = true;
    const auto r = f3i_run(x, cfg, opts);
    NeighborIndex idx(r.initial, *cfg.bandwidth);
    const auto& last_state = r.states.back();
    ObjectiveContext ctx(idx, idx, last_state, cfg.eta, cfg.n_neighbors);
    const auto last_iterate = ctx.impute(r.trace.alphas.back());
    if (r.trace.final_t == cfg.max_iter)
        EXPECT_EQ(r.imputed.values(), last_iterate.values());
    else
        EXPECT_EQ(r.imputed.values(), last_state.values());
}

TEST(F3IRun, EarlyStopReturnsPreviousIterate) {
    // Default bandwidth is large on this data so G turns nonpositive quickly.
    const auto x = masked_gaussian(50, 20, 0.25, 79);
    Config cfg;
    cfg.max_iter = 50;
    RunOptions opts;
    opts.keep_states = true;
    const auto r = f3i_run(x, cfg, opts);
    ASSERT_EQ(r.trace.stop_reason, StopReason::early_stop);
    ASSERT_LT(r.trace.final_t, cfg.max_iter);
    EXPECT_EQ(r.imputed.values(), r.states.back().values());
}

TEST(F3IRun, NormalizationRoundTrip) {
    const auto x = masked_gaussian(30, 8, 0.25, 80);
    Config cfg;
    cfg.normalize = true;
    const auto r = f3i_run(x, cfg);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t f = 0; f < 8; ++f)
            if (!x.missing(i, f)) EXPECT_NEAR(r.imputed.value(i, f), x.value(i, f), 1e-12);
}

TEST(OutOfSample, ReplaysTrainingRow) {
    const auto x = masked_gaussian(40, 10, 0.3, 81);
    Config cfg;
    cfg.bandwidth = 0.05;
    cfg.max_iter = 4;
    const auto r = f3i_run(x, cfg);
    for (std::size_t i = 0; i < 40; ++i) {
        const auto got = out_of_sample_impute(r, x.row(i), x.mask_row(i));
        const auto want = impute_step(r.initial.row(i), x.mask_row(i), r.final_alpha(), *r.index, cfg.n_neighbors);
        for (std::size_t f = 0; f < 10; ++f) EXPECT_NEAR(got[f], want[f], 1e-15);
    }
}

TEST(OutOfSample, CompleteRowUnchangedAndObservedPreserved) {
    const auto x = masked_gaussian(40, 10, 0.3, 82);
    const auto r = f3i_run(x, Config{});
    std::vector<double> row(10, 0.01);
    std::vector<std::uint8_t> mask(10, 0);
    EXPECT_EQ(out_of_sample_impute(r, row, mask), row);
    row[3] = kMissing;
    mask[3] = 1;
    const auto out = out_of_sample_impute(r, row, mask);
    for (std::size_t f = 0; f < 10; ++f)
        if (f != 3) EXPECT_EQ(out[f], 0.01);
    EXPECT_TRUE(std::isfinite(out[3]));
}

TEST(NormCap, ImputedCellsStayInColumnRange) {
    // Coordinatewise convexity: each filled cell lies between its column's observed extremes,
    // so a row's squared norm is bounded by the per-column box, not by the row cap.
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto params = draw_gaussian_params(10, 0.1, s);
        const auto truth = generate_complete(40, 10, params, s + 1);
        const auto x = apply_mcar(truth, 0.25, s + 2);
        const auto x0 = knn_initial_impute(x, 5);
        std::vector<double> lo(10, 1e300), hi(10, -1e300);
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t f = 0; f < 10; ++f)
                if (!x.missing(i, f)) lo[f] = std::min(lo[f], x.value(i, f)), hi[f] = std::max(hi[f], x.value(i, f));
        double box = 0.0;
        for (std::size_t f = 0; f < 10; ++f) box += std::max(lo[f] * lo[f], hi[f] * hi[f]);
        for (std::size_t i = 0; i < 40; ++i) {
            for (std::size_t f = 0; f < 10; ++f) {
                EXPECT_GE(x0.value(i, f), lo[f] - 1e-15);
                EXPECT_LE(x0.value(i, f), hi[f] + 1e-15);
            }
            EXPECT_LE(dot(x0.row(i), x0.row(i)), box * (1 + 1e-12));
        }
    }
}

TEST(NormCap, CoordinatewiseAveragingCanExceedCap) {
    // Every input row has observed squared norm <= 1, yet mixing coordinates from
    // different donors yields (0.9, 0.5, 0) with squared norm 1.06.
    const auto x = DataMatrix::from_nan(3, 3, {0.9, kMissing, 0.0, kMissing, 0.9, 0.0, 0.9, 0.1, 0.0});
    const auto r = knn_initial_impute(x, 2);
    EXPECT_DOUBLE_EQ(r.value(0, 1), 0.5);
    EXPECT_GT(dot(r.row(0), r.row(0)), 1.0);
}
