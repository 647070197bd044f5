#include "f3i/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "f3i/eval.hpp"

namespace f3i {

namespace {

constexpr double kMaxLogLoss = 27.631021115928547;  // -ln(1e-12)

double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// -ln sigmoid(z), computed without forming the probability.
double neg_log_sigmoid(double z) {
    const double v = z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    return std::min(v, kMaxLogLoss);
}

void check_label(int y) {
    if (y != 0 && y != 1) fail(ErrorCode::invalid_argument, "labels must be 0 or 1");
}

}  // namespace

double SigmoidClassifier::logit(std::span<const double> x) const {
    if (x.size() != omega.size()) fail(ErrorCode::invalid_argument, "classifier dimension mismatch");
    return dot(omega, x) + bias;
}

double SigmoidClassifier::probability(std::span<const double> x) const { return sigmoid(logit(x)); }

void JointConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::invalid_argument, "beta must lie in [0,1]");
    if (epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be positive");
    if (!(classifier_lr > 0.0)) fail(ErrorCode::invalid_argument, "classifier learning rate must be positive");
}

double logloss(const SigmoidClassifier& clf, std::span<const double> x, int y, LossVariant variant) {
    check_label(y);
    const double z = clf.logit(x);
    double loss = y == 1 ? neg_log_sigmoid(z) : 0.0;
    if (variant == LossVariant::full_bce && y == 0) loss = neg_log_sigmoid(-z);
    return loss;
}

double logloss_slope(const SigmoidClassifier& clf, std::span<const double> x, int y, LossVariant variant) {
    check_label(y);
    const double p = clf.probability(x);
    return variant == LossVariant::full_bce ? p - y : -y * (1.0 - p);
}

std::vector<double> grad_loss_alpha(const SigmoidClassifier& clf, const ObjectiveContext& ctx, std::size_t i,
                                    std::span<const double> alpha, int y, LossVariant variant) {
    const std::size_t k = ctx.k();
    std::vector<double> g(k, 0.0);
    const auto& missing = ctx.missing(i);
    if (missing.empty()) return g;
    const auto xi = ctx.imputed_row(i, alpha);
    const double slope = logloss_slope(clf, xi, y, variant);
    const auto& block = ctx.neighbor_block(i);
    for (std::size_t m = 0; m < missing.size(); ++m)
        for (std::size_t q = 0; q < k; ++q) g[q] += slope * clf.omega[missing[m]] * block[m * k + q];
    return g;
}

std::vector<double> grad_loss_alpha(const SigmoidClassifier& clf, std::span<const double> x_prev,
                                    std::span<const std::uint8_t> mask, std::span<const double> alpha,
                                    const NeighborIndex& index, std::size_t k, int y, LossVariant variant) {
    std::vector<double> g(k, 0.0);
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return g;
    const auto xi = impute_step(x_prev, mask, alpha, index, k);
    const double slope = logloss_slope(clf, xi, y, variant);
    const auto nbrs = index.knn_chebyshev(x_prev, k);
    for (std::size_t f = 0; f < x_prev.size(); ++f) {
        if (!mask[f]) continue;
        for (std::size_t q = 0; q < k; ++q) g[q] += slope * clf.omega[f] * index.point(nbrs[q].index)[f];
    }
    return g;
}

std::vector<std::vector<double>> pcgrad(const std::vector<std::vector<double>>& grads, std::mt19937_64& rng) {
    const std::size_t tasks = grads.size();
    for (const auto& g : grads) {
        if (g.size() != grads.front().size()) fail(ErrorCode::invalid_argument, "gradient lengths differ");
        for (double v : g)
            if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "gradient must be finite");
    }
    std::vector<std::vector<double>> out = grads;
    std::vector<std::size_t> order(tasks);
    for (std::size_t i = 0; i < tasks; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t j : order) {
            if (j == i) continue;
            const double norm2 = dot(grads[j], grads[j]);
            const double d = dot(out[i], grads[j]);
            if (d >= 0.0 || norm2 == 0.0) continue;
            for (std::size_t q = 0; q < out[i].size(); ++q) out[i][q] -= d / norm2 * grads[j][q];
        }
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> pcgrad_pair(std::span<const double> g1,
                                                                 std::span<const double> g2, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto out = pcgrad({std::vector<double>(g1.begin(), g1.end()), std::vector<double>(g2.begin(), g2.end())}, rng);
    return {std::move(out[0]), std::move(out[1])};
}

JointStep pcgrad_learner_direction(const ObjectiveContext& ctx, const SigmoidClassifier& clf,
                                   std::span<const double> alpha, const std::vector<int>& labels,
                                   const std::vector<std::size_t>& train_rows, double beta,
                                   LossVariant variant, std::mt19937_64& rng,
                                   const std::vector<double>* grad_objective) {
    const std::size_t k = ctx.k();
    JointStep step;
    step.grad_objective = grad_objective ? *grad_objective : ctx.gradient(alpha);
    step.grad_loss.assign(k, 0.0);
    for (std::size_t i : train_rows) {
        const auto g = grad_loss_alpha(clf, ctx, i, alpha, labels[i], variant);
        for (std::size_t q = 0; q < k; ++q) step.grad_loss[q] += g[q];
    }
    if (!train_rows.empty())
        for (double& v : step.grad_loss) v /= static_cast<double>(train_rows.size());

    step.direction.assign(k, 0.0);
    if (beta == 0.0) {
        step.direction = step.grad_objective;
    } else if (beta == 1.0) {
        for (std::size_t q = 0; q < k; ++q) step.direction[q] = -step.grad_loss[q];
    } else {
        std::vector<double> descent_g(k);
        for (std::size_t q = 0; q < k; ++q) descent_g[q] = -step.grad_objective[q];
        const auto fixed = pcgrad({descent_g, step.grad_loss}, rng);
        for (std::size_t q = 0; q < k; ++q)
            step.direction[q] = -(1.0 - beta) * fixed[0][q] - beta * fixed[1][q];
    }
    return step;
}

void classifier_step(SigmoidClassifier& clf, const DataMatrix& x, const std::vector<int>& labels,
                     const std::vector<std::size_t>& rows, double lr, LossVariant variant) {
    if (rows.empty()) return;
    std::vector<double> g(clf.omega.size(), 0.0);
    double gb = 0.0;
    for (std::size_t i : rows) {
        const double s = logloss_slope(clf, x.row(i), labels[i], variant);
        const auto xi = x.row(i);
        for (std::size_t f = 0; f < g.size(); ++f) g[f] += s * xi[f];
        gb += s;
    }
    const double scale = lr / static_cast<double>(rows.size());
    for (std::size_t f = 0; f < g.size(); ++f) clf.omega[f] -= scale * g[f];
    clf.bias -= scale * gb;
}

double mean_loss(const SigmoidClassifier& clf, const DataMatrix& x, const std::vector<int>& labels,
                 const std::vector<std::size_t>& rows, LossVariant variant) {
    double s = 0.0;
    for (std::size_t i : rows) s += logloss(clf, x.row(i), labels[i], variant);
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

std::vector<double> classifier_scores(const SigmoidClassifier& clf, const DataMatrix& x,
                                      const std::vector<std::size_t>& rows) {
    std::vector<double> s;
    s.reserve(rows.size());
    for (std::size_t i : rows) s.push_back(clf.logit(x.row(i)));
    return s;
}

JointResult pcgrad_f3i_run(const DataMatrix& x, const std::vector<int>& labels,
                           const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& eval_rows,
                           const Config& cfg, const JointConfig& jcfg) {
    cfg.validate();
    jcfg.validate();
    if (labels.size() != x.rows()) fail(ErrorCode::invalid_argument, "one label per row required");
    bool seen[2] = {false, false};
    for (std::size_t i : train_rows) {
        if (i >= x.rows()) fail(ErrorCode::invalid_argument, "training row out of range");
        check_label(labels[i]);
        seen[labels[i]] = true;
    }
    if (!seen[0] || !seen[1]) fail(ErrorCode::degenerate, "training labels contain a single class");

    JointResult result;
    result.classifier.omega.assign(x.cols(), 0.0);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x9c));

    for (std::size_t e = 0; e < jcfg.epochs; ++e) {
        const bool last = e + 1 == jcfg.epochs;
        const SigmoidClassifier fixed = result.classifier;
        std::vector<JointStep> steps;
        RunOptions opts;
        opts.keep_states = last;
        opts.learner_loss = [&](const ObjectiveContext& ctx, const SimplexWeights& alpha, std::size_t,
                                const std::vector<double>& grad) {
            JointStep step = pcgrad_learner_direction(ctx, fixed, alpha.values(), labels, train_rows, jcfg.beta,
                                                      jcfg.loss_variant, rng, &grad);
            std::vector<double> loss(step.direction.size());
            for (std::size_t q = 0; q < loss.size(); ++q) loss[q] = -step.direction[q];
            steps.push_back(std::move(step));
            return loss;
        };
        F3IResult run = f3i_run(x, cfg, opts);

        // The classifier works in the imputer's working space.
        const DataMatrix& working = run.imputed_working;
        classifier_step(result.classifier, working, labels, train_rows, jcfg.classifier_lr, jcfg.loss_variant);

        JointEpoch epoch;
        epoch.classifier_used = fixed;
        epoch.final_t = run.trace.final_t;
        epoch.train_loss = mean_loss(result.classifier, working, labels, train_rows, jcfg.loss_variant);
        if (!eval_rows.empty()) {
            std::vector<int> y;
            for (std::size_t i : eval_rows) y.push_back(labels.at(i));
            try {
                epoch.eval_auc = auc(classifier_scores(result.classifier, working, eval_rows), y);
            } catch (const Error&) {
                epoch.eval_auc = -1.0;  // single-class evaluation split
            }
        }
        result.epochs.push_back(epoch);
        if (last) {
            result.last_run = std::move(run);
            result.last_steps = std::move(steps);
        }
    }
    return result;
}

Split split_rows(std::size_t n, double train_frac, double validation_frac, std::uint64_t seed) {
    if (!(train_frac >= 0.0 && validation_frac >= 0.0 && train_frac + validation_frac <= 1.0))
        fail(ErrorCode::invalid_argument, "split fractions must be nonnegative and sum to at most 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::round(train_frac * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::round(validation_frac * static_cast<double>(n))));
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    for (auto* v : {&s.train, &s.validation, &s.test}) std::sort(v->begin(), v->end());
    return s;
}

}  // namespace f3i
