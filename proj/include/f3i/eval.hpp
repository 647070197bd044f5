#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "f3i/core.hpp"
#include "f3i/imputer.hpp"
#include "f3i/neighbors.hpp"
#include "f3i/objective.hpp"

namespace f3i {

double mse(const DataMatrix& imputed, const DataMatrix& truth);
double rmse(const DataMatrix& imputed, const DataMatrix& truth);
// Per-row mean over missing cells (mask taken from `masked`), averaged over rows with a gap.
double masked_mse(const DataMatrix& imputed, const DataMatrix& truth, const DataMatrix& masked);

// Mann-Whitney statistic with midranks for ties. labels are 0/1.
double auc(std::span<const double> scores, std::span<const int> labels);

struct BoundConstants {
    double sigma2 = 0.0;
    double sigma_gsm = 0.0;
    double sigma_miss = 0.0;
    double c_miss = 0.0;
    double delta_t = 0.0;
    double adahedge_term = 0.0;
    double bound_value = 0.0;
};

BoundConstants sigma_miss(double sigma, std::size_t k);
double c_miss(double sigma_miss, std::size_t f, double delta);

// Largest per-round (max - min) over a list of vectors.
double max_range(const std::vector<std::vector<double>>& vectors);

// AdaHedge term on the gradients plus C^miss_{1/N^3} t / h.
BoundConstants imputation_regret_bound(const std::vector<std::vector<double>>& gradients, double h, double sigma,
                           std::size_t n, std::size_t f, std::size_t k);
// Same with the corrected learner directions and the linear term scaled by (1 - beta).
BoundConstants joint_regret_bound(const std::vector<std::vector<double>>& directions, double h, double beta,
                           double sigma, std::size_t n, std::size_t f, std::size_t k);

// A sequence of per-round objectives alpha -> value_s(alpha); the oracle maximizes their sum.
class StepObjectives {
public:
    virtual ~StepObjectives() = default;
    virtual std::size_t steps() const = 0;
    virtual std::size_t dim() const = 0;
    virtual double value(std::size_t s, std::span<const double> alpha) const = 0;
    virtual double value_and_gradient(std::size_t s, std::span<const double> alpha,
                                      std::vector<double>& grad) const = 0;

    double sum(std::span<const double> alpha) const;
    double sum_and_gradient(std::span<const double> alpha, std::vector<double>& grad) const;
    double realized(const std::vector<std::vector<double>>& alphas) const;
};

// Per-round objectives over stored states; density may be the ground truth.
class ObjectiveSteps : public StepObjectives {
public:
    ObjectiveSteps(const NeighborIndex& reference, const NeighborIndex& density,
                   const std::vector<DataMatrix>& states, double eta, std::size_t k);
    std::size_t steps() const override { return contexts_.size(); }
    std::size_t dim() const override { return k_; }
    double value(std::size_t s, std::span<const double> alpha) const override;
    double value_and_gradient(std::size_t s, std::span<const double> alpha,
                              std::vector<double>& grad) const override;
    const ObjectiveContext& context(std::size_t s) const { return contexts_[s]; }

private:
    std::size_t k_;
    std::vector<ObjectiveContext> contexts_;
};

struct OracleResult {
    std::vector<double> alpha;
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

// Projected gradient ascent with backtracking, started from the best of uniform and `seeds`.
OracleResult regret_oracle(const StepObjectives& objective, const std::vector<std::vector<double>>& seeds,
                           double tol = 1e-8, std::size_t max_iter = 10000);

struct RegretResult {
    double regret = 0.0;
    double best = 0.0;
    double realized = 0.0;
    OracleResult oracle;
};

RegretResult cumulative_regret(const StepObjectives& objective, const std::vector<std::vector<double>>& alphas);

}  // namespace f3i
