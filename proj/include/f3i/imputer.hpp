#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "f3i/core.hpp"
#include "f3i/neighbors.hpp"
#include "f3i/objective.hpp"

namespace f3i {

enum class StopReason { budget_exhausted, early_stop };

const char* to_string(StopReason r);

struct ImputationTrace {
    std::vector<std::vector<double>> alphas;         // alpha^t, t = 1..final_t
    std::vector<double> g_values;                    // G(alpha^t, X^{t-1})
    std::vector<std::vector<double>> gradients;      // grad G(alpha^t, X^{t-1})
    std::vector<std::vector<double>> learner_losses; // vector handed to the learner
    StopReason stop_reason = StopReason::budget_exhausted;
    std::size_t final_t = 0;
    double bandwidth = 0.0;
    std::vector<double> log_density_start;  // log D(x^0_i)
    std::vector<double> log_density_end;    // log D(x^t_i), last computed iterate
};

enum class Weighting { uniform, inverse_distance };

// Nan-aware KNN imputation over the other rows (sklearn-style nan_euclidean).
DataMatrix knn_impute(const DataMatrix& x, std::size_t k, Weighting weighting);
inline DataMatrix knn_initial_impute(const DataMatrix& x, std::size_t k) {
    return knn_impute(x, k, Weighting::uniform);
}
inline DataMatrix knn_distance_impute(const DataMatrix& x, std::size_t k) {
    return knn_impute(x, k, Weighting::inverse_distance);
}
// Impute one extra row using the rows of `donors` as the neighbor pool.
std::vector<double> knn_impute_row(const DataMatrix& donors, std::span<const double> row,
                                   std::span<const std::uint8_t> mask, std::size_t k,
                                   Weighting weighting);
// sqrt(F / #shared * sum over shared coordinates); +inf when nothing is shared.
double nan_euclidean(std::span<const double> a, std::span<const std::uint8_t> ma,
                     std::span<const double> b, std::span<const std::uint8_t> mb);

DataMatrix mean_impute(const DataMatrix& x);

// One improvement step: Chebyshev neighbors of x_prev in the reference,
// missing coordinates replaced by their alpha-weighted combination.
std::vector<double> impute_step(std::span<const double> x_prev, std::span<const std::uint8_t> mask,
                                std::span<const double> alpha, const NeighborIndex& index, std::size_t k);

// Called once per iteration with the objective over X^{t-1}; returns the loss vector
// for the learner. `grad` holds grad G(alpha^t, X^{t-1}).
using LearnerLoss = std::function<std::vector<double>(const ObjectiveContext& ctx, const SimplexWeights& alpha,
                                                      std::size_t t, const std::vector<double>& grad)>;

struct RunOptions {
    bool keep_states = false;  // store X^0 .. X^{final_t - 1} (working space)
    LearnerLoss learner_loss;  // default: minus the gradient of G
};

struct F3IResult {
    DataMatrix imputed;
    DataMatrix imputed_working;  // before undoing row normalization
    ImputationTrace trace;
    DataMatrix training;  // input after optional row normalization (still masked)
    DataMatrix initial;   // X^0 in working space
    std::vector<DataMatrix> states;
    std::vector<double> scales;  // row norms when normalizing, else empty
    std::shared_ptr<const NeighborIndex> index;
    std::size_t k = 0;
    bool normalized = false;

    std::vector<double> final_alpha() const { return trace.alphas.back(); }
};

F3IResult f3i_run(const DataMatrix& x, const Config& cfg, const RunOptions& options = {});

// Initial KNN rule against the training rows, then one step with the final weights.
std::vector<double> out_of_sample_impute(const F3IResult& trained, std::span<const double> row,
                                         std::span<const std::uint8_t> mask);

}  // namespace f3i
