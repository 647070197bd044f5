#include "f3i/imputer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "f3i/learner.hpp"

namespace f3i {

const char* to_string(StopReason r) {
    return r == StopReason::early_stop ? "early_stop" : "budget_exhausted";
}

double nan_euclidean(std::span<const double> a, std::span<const std::uint8_t> ma,
                     std::span<const double> b, std::span<const std::uint8_t> mb) {
    double acc = 0.0;
    std::size_t shared = 0;
    for (std::size_t f = 0; f < a.size(); ++f) {
        if (ma[f] || mb[f]) continue;
        const double d = a[f] - b[f];
        acc += d * d;
        ++shared;
    }
    if (shared == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(static_cast<double>(a.size()) / static_cast<double>(shared) * acc);
}

namespace {

struct Donor {
    double distance;
    std::size_t row;
};

std::vector<double> column_means(const DataMatrix& x) {
    std::vector<double> mean(x.cols(), 0.0);
    std::vector<std::size_t> count(x.cols(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t f = 0; f < x.cols(); ++f)
            if (!x.missing(i, f)) mean[f] += x.value(i, f), ++count[f];
    for (std::size_t f = 0; f < x.cols(); ++f)
        mean[f] = count[f] ? mean[f] / static_cast<double>(count[f]) : kMissing;
    return mean;
}

// Fill the missing cells of `row` from donor rows of x; `skip` excludes one row (itself).
void fill_row(const DataMatrix& x, std::span<const double> row, std::span<const std::uint8_t> mask,
              std::size_t skip, const std::vector<std::size_t>& k_per_feature,
              const std::vector<double>& means, Weighting weighting, std::span<double> out) {
    const std::size_t n = x.rows();
    std::vector<double> dist(n);
    for (std::size_t j = 0; j < n; ++j)
        dist[j] = j == skip ? std::numeric_limits<double>::infinity()
                            : nan_euclidean(row, mask, x.row(j), x.mask_row(j));
    std::vector<Donor> donors;
    for (std::size_t f = 0; f < x.cols(); ++f) {
        if (!mask[f]) {
            out[f] = row[f];
            continue;
        }
        donors.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != skip && !x.missing(j, f) && std::isfinite(dist[j])) donors.push_back({dist[j], j});
        if (donors.empty()) {
            out[f] = means[f];
            continue;
        }
        const std::size_t take = std::min(k_per_feature[f], donors.size());
        std::partial_sort(donors.begin(), donors.begin() + static_cast<std::ptrdiff_t>(take), donors.end(),
                          [](const Donor& a, const Donor& b) {
                              return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
                          });
        double num = 0.0, den = 0.0;
        bool exact = false;
        if (weighting == Weighting::inverse_distance)
            for (std::size_t d = 0; d < take; ++d) exact = exact || donors[d].distance == 0.0;
        for (std::size_t d = 0; d < take; ++d) {
            double w = 1.0;
            if (weighting == Weighting::inverse_distance)
                w = exact ? (donors[d].distance == 0.0 ? 1.0 : 0.0) : 1.0 / donors[d].distance;
            num += w * x.value(donors[d].row, f);
            den += w;
        }
        out[f] = num / den;
    }
}

std::vector<std::size_t> neighbor_counts(const DataMatrix& x, std::size_t k, std::size_t min_observed) {
    if (k < 1) fail(ErrorCode::invalid_argument, "K must be positive");
    std::vector<std::size_t> ks(x.cols(), k);
    for (std::size_t f = 0; f < x.cols(); ++f) {
        const std::size_t obs = x.observed_in_column(f);
        if (obs < min_observed)
            fail(ErrorCode::invalid_argument, "feature " + std::to_string(f) + " has " + std::to_string(obs) +
                                                  " observed entries; at least " + std::to_string(min_observed) +
                                                  " required");
        if (obs < k) {
            warn("feature " + std::to_string(f) + " has only " + std::to_string(obs) +
                 " observed entries; using that many neighbors");
            ks[f] = obs;
        }
    }
    return ks;
}

}  // namespace

DataMatrix knn_impute(const DataMatrix& x, std::size_t k, Weighting weighting) {
    if (!x.has_missing()) return x;
    const auto ks = neighbor_counts(x, k, 2);
    const auto means = column_means(x);
    std::vector<double> values = x.values();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto mrow = x.mask_row(i);
        if (std::none_of(mrow.begin(), mrow.end(), [](std::uint8_t m) { return m != 0; })) continue;
        fill_row(x, x.row(i), mrow, i, ks, means, weighting,
                 std::span<double>(values.data() + i * x.cols(), x.cols()));
    }
    return x.with_values(std::move(values));
}

std::vector<double> knn_impute_row(const DataMatrix& donors, std::span<const double> row,
                                   std::span<const std::uint8_t> mask, std::size_t k, Weighting weighting) {
    if (row.size() != donors.cols() || mask.size() != donors.cols())
        fail(ErrorCode::invalid_argument, "row length must match the donor matrix");
    const auto ks = neighbor_counts(donors, k, 1);
    const auto means = column_means(donors);
    std::vector<double> out(row.size());
    fill_row(donors, row, mask, donors.rows(), ks, means, weighting, out);
    return out;
}

DataMatrix mean_impute(const DataMatrix& x) {
    const auto means = column_means(x);
    std::vector<double> values = x.values();
    for (std::size_t f = 0; f < x.cols(); ++f)
        if (std::isnan(means[f]))
            fail(ErrorCode::invalid_argument, "feature " + std::to_string(f) + " has no observed entry");
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t f = 0; f < x.cols(); ++f)
            if (x.missing(i, f)) values[i * x.cols() + f] = means[f];
    return x.with_values(std::move(values));
}

std::vector<double> impute_step(std::span<const double> x_prev, std::span<const std::uint8_t> mask,
                                std::span<const double> alpha, const NeighborIndex& index, std::size_t k) {
    if (alpha.size() != k) fail(ErrorCode::invalid_argument, "weight vector length must equal K");
    std::vector<double> out(x_prev.begin(), x_prev.end());
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return out;
    const auto nbrs = index.knn_chebyshev(x_prev, k);
    for (std::size_t f = 0; f < out.size(); ++f) {
        if (!mask[f]) continue;
        double v = 0.0;
        for (std::size_t q = 0; q < k; ++q) v += alpha[q] * index.point(nbrs[q].index)[f];
        out[f] = v;
    }
    return out;
}

F3IResult f3i_run(const DataMatrix& x, const Config& cfg, const RunOptions& options) {
    cfg.validate();
    F3IResult result;
    result.k = cfg.n_neighbors;
    result.normalized = cfg.normalize;
    if (cfg.normalize) {
        auto norm = l2_normalize_rows(x);
        result.training = std::move(norm.matrix);
        result.scales = std::move(norm.scales);
    } else {
        result.training = x;
    }
    if (cfg.n_neighbors > x.rows())
        fail(ErrorCode::invalid_argument, "K exceeds the number of rows");

    result.initial = knn_initial_impute(result.training, cfg.n_neighbors);
    const double h = cfg.bandwidth ? *cfg.bandwidth
                                   : solve_bandwidth(cfg.norm_cap, cfg.n_neighbors, cfg.eta, x.rows());
    result.index = std::make_shared<NeighborIndex>(result.initial, h);
    const NeighborIndex& index = *result.index;

    ImputationTrace& trace = result.trace;
    trace.bandwidth = h;
    trace.log_density_start = row_log_densities(index, result.initial);

    AdaHedge learner(cfg.n_neighbors);
    DataMatrix prev = result.initial;
    DataMatrix current = result.initial;
    std::vector<double> grad;
    for (std::size_t t = 1; t <= cfg.max_iter; ++t) {
        if (options.keep_states) result.states.push_back(prev);
        const SimplexWeights alpha = learner.predict();
        const ObjectiveContext ctx(index, index, prev, cfg.eta, cfg.n_neighbors);
        current = ctx.impute(alpha.values());
        const double g = ctx.value_and_gradient(alpha.values(), grad);
        std::vector<double> loss;
        if (options.learner_loss) {
            loss = options.learner_loss(ctx, alpha, t, grad);
        } else {
            loss.resize(grad.size());
            for (std::size_t q = 0; q < grad.size(); ++q) loss[q] = -grad[q];
        }
        learner.update(loss);

        trace.alphas.push_back(alpha.values());
        trace.g_values.push_back(g);
        trace.gradients.push_back(grad);
        trace.learner_losses.push_back(std::move(loss));
        trace.final_t = t;
        if (g <= 0.0) {
            trace.stop_reason = StopReason::early_stop;
            break;
        }
        if (t < cfg.max_iter) prev = current;
    }
    trace.log_density_end = row_log_densities(index, current);

    result.imputed_working = trace.final_t == cfg.max_iter ? current : prev;
    result.imputed =
        cfg.normalize ? denormalize_rows(result.imputed_working, result.scales) : result.imputed_working;
    return result;
}

std::vector<double> out_of_sample_impute(const F3IResult& trained, std::span<const double> row,
                                         std::span<const std::uint8_t> mask) {
    if (!trained.index || trained.trace.alphas.empty())
        fail(ErrorCode::invalid_argument, "out-of-sample imputation needs a completed run");
    const std::size_t f_count = trained.training.cols();
    if (row.size() != f_count || mask.size() != f_count)
        fail(ErrorCode::invalid_argument, "row length must match the training data");

    std::vector<double> work(row.begin(), row.end());
    double scale = 1.0;
    if (trained.normalized) {
        double norm2 = 0.0;
        for (std::size_t f = 0; f < f_count; ++f)
            if (!mask[f]) norm2 += work[f] * work[f];
        if (norm2 > 0.0) scale = std::sqrt(norm2);
        for (std::size_t f = 0; f < f_count; ++f)
            if (!mask[f]) work[f] /= scale;
    }
    for (std::size_t f = 0; f < f_count; ++f)
        if (mask[f]) work[f] = kMissing;
    const auto initial = knn_impute_row(trained.training, work, mask, trained.k, Weighting::uniform);
    auto out = impute_step(initial, mask, trained.final_alpha(), *trained.index, trained.k);
    for (std::size_t f = 0; f < f_count; ++f) out[f] = mask[f] ? out[f] * scale : row[f];
    return out;
}

}  // namespace f3i
