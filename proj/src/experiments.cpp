#include "f3i/experiments.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "f3i/eval.hpp"

namespace f3i {

namespace {

// (1 - beta) G*(alpha, X^{s-1}) - beta * mean training loss of x_i(alpha).
class JointSteps : public StepObjectives {
public:
    JointSteps(const ObjectiveSteps& objective, const SigmoidClassifier& clf, const std::vector<int>& labels,
               const std::vector<std::size_t>& rows, double beta, LossVariant variant)
        : objective_(objective), clf_(clf), labels_(labels), rows_(rows), beta_(beta), variant_(variant) {}

    std::size_t steps() const override { return objective_.steps(); }
    std::size_t dim() const override { return objective_.dim(); }

    double value(std::size_t s, std::span<const double> alpha) const override {
        return (1.0 - beta_) * objective_.value(s, alpha) - beta_ * loss(s, alpha);
    }

    double value_and_gradient(std::size_t s, std::span<const double> alpha,
                              std::vector<double>& grad) const override {
        const double g = objective_.value_and_gradient(s, alpha, grad);
        for (double& v : grad) v *= 1.0 - beta_;
        const auto& ctx = objective_.context(s);
        const double scale = beta_ / static_cast<double>(rows_.size());
        for (std::size_t i : rows_) {
            const auto gl = grad_loss_alpha(clf_, ctx, i, alpha, labels_[i], variant_);
            for (std::size_t q = 0; q < grad.size(); ++q) grad[q] -= scale * gl[q];
        }
        return (1.0 - beta_) * g - beta_ * loss(s, alpha);
    }

private:
    double loss(std::size_t s, std::span<const double> alpha) const {
        const auto& ctx = objective_.context(s);
        double total = 0.0;
        for (std::size_t i : rows_) total += logloss(clf_, ctx.imputed_row(i, alpha), labels_[i], variant_);
        return total / static_cast<double>(rows_.size());
    }

    const ObjectiveSteps& objective_;
    const SigmoidClassifier& clf_;
    const std::vector<int>& labels_;
    const std::vector<std::size_t>& rows_;
    double beta_;
    LossVariant variant_;
};

double missing_fraction(const DataMatrix& x) {
    return static_cast<double>(x.missing_count()) / static_cast<double>(x.rows() * x.cols());
}

void fill_bound_fields(TrialResult& r, const BoundConstants& b, double h) {
    r.bandwidth = h;
    r.sigma_miss = b.sigma_miss;
    r.c_miss = b.c_miss;
}

}  // namespace

SyntheticData make_synthetic(const TrialSetup& setup, std::uint64_t seed) {
    SyntheticData d;
    d.params = draw_gaussian_params(setup.f, setup.sigma, derive_seed(seed, 1));
    d.truth = generate_complete(setup.n, setup.f, d.params, derive_seed(seed, 2));
    d.masked = apply_missingness(d.truth, d.params, setup.missingness, derive_seed(seed, 3));
    return d;
}

TrialResult mse_bound_trial(const TrialSetup& setup, std::uint64_t seed) {
    const SyntheticData data = make_synthetic(setup, seed);
    Config cfg = setup.config;
    cfg.seed = seed;
    const F3IResult run = f3i_run(data.masked, cfg);

    TrialResult r;
    r.seed = seed;
    r.mse = mse(run.imputed, data.truth);
    const double n = static_cast<double>(setup.n);
    const BoundConstants b = sigma_miss(setup.sigma, cfg.n_neighbors);
    const double cm = c_miss(b.sigma_miss, setup.f, 1.0 / (n * n * n));
    r.measured = n * static_cast<double>(setup.f) * r.mse;
    r.bound = n * cm;
    r.satisfied = r.measured <= r.bound;
    r.t_final = run.trace.final_t;
    r.stop_reason = to_string(run.trace.stop_reason);
    r.bandwidth = run.trace.bandwidth;
    r.sigma_miss = b.sigma_miss;
    r.c_miss = cm;
    r.missing_fraction = missing_fraction(data.masked);
    return r;
}

TrialResult regret_bound_trial(const TrialSetup& setup, std::uint64_t seed) {
    const SyntheticData data = make_synthetic(setup, seed);
    Config cfg = setup.config;
    cfg.seed = seed;
    RunOptions opts;
    opts.keep_states = true;
    const F3IResult run = f3i_run(data.masked, cfg, opts);
    const double h = run.trace.bandwidth;

    const DataMatrix truth = cfg.normalize ? l2_normalize_rows(data.truth).matrix : data.truth;
    const NeighborIndex truth_density(truth, h);
    const ObjectiveSteps steps(*run.index, truth_density, run.states, cfg.eta, cfg.n_neighbors);
    const RegretResult regret = cumulative_regret(steps, run.trace.alphas);
    const BoundConstants b = imputation_regret_bound(run.trace.gradients, h, setup.sigma, setup.n, setup.f, cfg.n_neighbors);

    TrialResult r;
    r.seed = seed;
    r.measured = regret.regret;
    r.bound = b.bound_value;
    r.satisfied = r.measured <= r.bound;
    r.t_final = run.trace.final_t;
    r.stop_reason = to_string(run.trace.stop_reason);
    r.mse = mse(run.imputed, data.truth);
    r.missing_fraction = missing_fraction(data.masked);
    r.oracle_converged = regret.oracle.converged;
    fill_bound_fields(r, b, h);
    return r;
}

TrialResult joint_bound_trial(const TrialSetup& setup, std::uint64_t seed) {
    if (setup.f < 2) fail(ErrorCode::invalid_argument, "joint trial needs at least two features");
    const std::size_t f_items = setup.f / 2;
    const std::size_t f_users = setup.f - f_items;
    const GaussianParams p_items = draw_gaussian_params(f_items, setup.sigma, derive_seed(seed, 11));
    const GaussianParams p_users = draw_gaussian_params(f_users, setup.sigma, derive_seed(seed, 12));
    const DataMatrix items = generate_complete(setup.n, f_items, p_items, derive_seed(seed, 13));
    const DataMatrix users = generate_complete(setup.n, f_users, p_users, derive_seed(seed, 14));

    std::vector<std::size_t> perm(setup.n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 15));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ItemUserPair> pairs;
    std::vector<double> values;
    for (std::size_t i = 0; i < setup.n; ++i) {
        pairs.emplace_back(i, perm[i]);
        const auto a = items.row(i);
        const auto b = users.row(perm[i]);
        values.insert(values.end(), a.begin(), a.end());
        values.insert(values.end(), b.begin(), b.end());
    }
    const std::vector<int> labels = make_classification_labels(items, users, pairs, derive_seed(seed, 16));
    const DataMatrix truth = DataMatrix::complete(setup.n, setup.f, std::move(values));
    GaussianParams params;
    params.sigma = setup.sigma;
    params.mu = p_items.mu;
    params.mu.insert(params.mu.end(), p_users.mu.begin(), p_users.mu.end());
    const DataMatrix masked = apply_missingness(truth, params, setup.missingness, derive_seed(seed, 17));

    Config cfg = setup.config;
    cfg.seed = seed;
    cfg.beta = setup.joint.beta;
    std::vector<std::size_t> rows(setup.n);
    std::iota(rows.begin(), rows.end(), 0);
    const JointResult joint = pcgrad_f3i_run(masked, labels, rows, {}, cfg, setup.joint);
    const F3IResult& run = joint.last_run;
    const double h = run.trace.bandwidth;

    const DataMatrix truth_ws = cfg.normalize ? l2_normalize_rows(truth).matrix : truth;
    const NeighborIndex truth_density(truth_ws, h);
    const ObjectiveSteps objective(*run.index, truth_density, run.states, cfg.eta, cfg.n_neighbors);
    const JointSteps steps(objective, joint.epochs.back().classifier_used, labels, rows, setup.joint.beta,
                           setup.joint.loss_variant);
    const RegretResult regret = cumulative_regret(steps, run.trace.alphas);

    std::vector<std::vector<double>> directions;
    for (const auto& s : joint.last_steps) directions.push_back(s.direction);
    const BoundConstants b =
        joint_regret_bound(directions, h, setup.joint.beta, setup.sigma, setup.n, setup.f, cfg.n_neighbors);

    TrialResult r;
    r.seed = seed;
    r.measured = regret.regret;
    r.bound = b.bound_value;
    r.satisfied = r.measured <= r.bound;
    r.t_final = run.trace.final_t;
    r.stop_reason = to_string(run.trace.stop_reason);
    r.mse = mse(run.imputed, truth);
    r.missing_fraction = missing_fraction(masked);
    r.oracle_converged = regret.oracle.converged;
    fill_bound_fields(r, b, h);
    return r;
}

PlantedResult planted_blob_trial(const PlantedSetup& setup, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 21));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double offset = 0.5 * setup.separation * setup.sigma / std::sqrt(static_cast<double>(setup.f));
    std::vector<double> values(setup.n * setup.f);
    std::vector<int> labels(setup.n);
    for (std::size_t i = 0; i < setup.n; ++i) {
        labels[i] = i % 2 == 0 ? 0 : 1;
        const double sign = labels[i] == 1 ? 1.0 : -1.0;
        for (std::size_t f = 0; f < setup.f; ++f)
            values[i * setup.f + f] = sign * offset + setup.sigma * normal(rng);
    }
    const DataMatrix truth = DataMatrix::complete(setup.n, setup.f, std::move(values));
    const DataMatrix masked = apply_mcar(truth, setup.p_miss, derive_seed(seed, 22));
    const Split split = split_rows(setup.n, 0.7, 0.2, derive_seed(seed, 23));
    std::vector<std::size_t> fit_rows = split.train;
    fit_rows.insert(fit_rows.end(), split.validation.begin(), split.validation.end());
    std::vector<int> test_labels;
    for (std::size_t i : split.test) test_labels.push_back(labels[i]);

    Config cfg = setup.config;
    cfg.seed = seed;
    const JointResult joint = pcgrad_f3i_run(masked, labels, fit_rows, split.test, cfg, setup.joint);

    const DataMatrix mean_filled = mean_impute(masked);
    SigmoidClassifier baseline;
    baseline.omega.assign(setup.f, 0.0);
    for (std::size_t e = 0; e < setup.joint.epochs; ++e)
        classifier_step(baseline, mean_filled, labels, fit_rows, setup.joint.classifier_lr, setup.joint.loss_variant);

    PlantedResult r;
    r.auc_joint = joint.epochs.back().eval_auc;
    r.auc_mean = auc(classifier_scores(baseline, mean_filled, split.test), test_labels);
    return r;
}

}  // namespace f3i
