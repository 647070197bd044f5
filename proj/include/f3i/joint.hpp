#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "f3i/core.hpp"
#include "f3i/imputer.hpp"
#include "f3i/neighbors.hpp"
#include "f3i/objective.hpp"

namespace f3i {

enum class LossVariant { positive_logloss, full_bce };

// C(x) = sigmoid(omega . x + bias); the bias acts as a constant-1 feature.
struct SigmoidClassifier {
    std::vector<double> omega;
    double bias = 0.0;

    double logit(std::span<const double> x) const;
    double probability(std::span<const double> x) const;
};

struct JointConfig {
    double beta = 0.5;
    std::size_t epochs = 10;
    double classifier_lr = 0.5;
    LossVariant loss_variant = LossVariant::full_bce;

    void validate() const;
};

double logloss(const SigmoidClassifier& clf, std::span<const double> x, int y, LossVariant variant);

// d loss / d logit; the x-gradient is this times omega.
double logloss_slope(const SigmoidClassifier& clf, std::span<const double> x, int y, LossVariant variant);

// Gradient in alpha of loss(x_i(alpha)) for sample i of an objective context.
std::vector<double> grad_loss_alpha(const SigmoidClassifier& clf, const ObjectiveContext& ctx, std::size_t i,
                                    std::span<const double> alpha, int y, LossVariant variant);
// Same quantity for a free-standing row: neighbors of x_prev are looked up in `index`.
std::vector<double> grad_loss_alpha(const SigmoidClassifier& clf, std::span<const double> x_prev,
                                    std::span<const std::uint8_t> mask, std::span<const double> alpha,
                                    const NeighborIndex& index, std::size_t k, int y, LossVariant variant);

// Projecting conflicting gradients: each gradient loses its component along any
// other task's original gradient it conflicts with (negative dot product).
std::vector<std::vector<double>> pcgrad(const std::vector<std::vector<double>>& grads, std::mt19937_64& rng);
std::pair<std::vector<double>, std::vector<double>> pcgrad_pair(std::span<const double> g1,
                                                                 std::span<const double> g2, std::uint64_t seed);

struct JointStep {
    std::vector<double> grad_objective;  // grad G
    std::vector<double> grad_loss;       // mean grad of the classification loss over training rows
    std::vector<double> direction;       // (1 - beta) grad G^PC - beta grad loss^PC
};

// Surgery is done on the two minimization gradients (-grad G, grad loss); with beta
// at 0 or 1 only one task is active and no surgery happens.
JointStep pcgrad_learner_direction(const ObjectiveContext& ctx, const SigmoidClassifier& clf,
                                   std::span<const double> alpha, const std::vector<int>& labels,
                                   const std::vector<std::size_t>& train_rows, double beta,
                                   LossVariant variant, std::mt19937_64& rng,
                                   const std::vector<double>* grad_objective = nullptr);

struct JointEpoch {
    SigmoidClassifier classifier_used;  // held fixed during this epoch's imputation
    std::size_t final_t = 0;
    double train_loss = 0.0;
    double eval_auc = -1.0;  // negative when no evaluation rows
};

struct JointResult {
    F3IResult last_run;                // imputation of the final epoch (states kept)
    SigmoidClassifier classifier;      // after the final update
    std::vector<JointEpoch> epochs;
    std::vector<JointStep> last_steps; // per round of the final epoch
};

// Rows in train_rows supply labels to both tasks; eval_rows (may be empty) are scored by AUC.
JointResult pcgrad_f3i_run(const DataMatrix& x, const std::vector<int>& labels,
                           const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& eval_rows,
                           const Config& cfg, const JointConfig& jcfg);

// One full-batch gradient step on the mean loss over `rows`.
void classifier_step(SigmoidClassifier& clf, const DataMatrix& x, const std::vector<int>& labels,
                     const std::vector<std::size_t>& rows, double lr, LossVariant variant);
double mean_loss(const SigmoidClassifier& clf, const DataMatrix& x, const std::vector<int>& labels,
                 const std::vector<std::size_t>& rows, LossVariant variant);
std::vector<double> classifier_scores(const SigmoidClassifier& clf, const DataMatrix& x,
                                      const std::vector<std::size_t>& rows);

struct Split {
    std::vector<std::size_t> train, validation, test;
};
// Seeded shuffle into consecutive fractions; test gets the remainder.
Split split_rows(std::size_t n, double train_frac, double validation_frac, std::uint64_t seed);

}  // namespace f3i
