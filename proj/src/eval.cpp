#include "f3i/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "f3i/learner.hpp"

namespace f3i {

namespace {

void same_shape(const DataMatrix& a, const DataMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(ErrorCode::invalid_argument, "matrix shapes differ");
}

}  // namespace

double mse(const DataMatrix& imputed, const DataMatrix& truth) {
    same_shape(imputed, truth);
    if (!imputed.all_finite() || !truth.all_finite())
        fail(ErrorCode::invalid_argument, "mse needs complete matrices");
    double total = 0.0;
    for (std::size_t i = 0; i < imputed.rows(); ++i) {
        double row = 0.0;
        for (std::size_t f = 0; f < imputed.cols(); ++f) {
            const double d = imputed.value(i, f) - truth.value(i, f);
            row += d * d;
        }
        total += row / static_cast<double>(imputed.cols());
    }
    return total / static_cast<double>(imputed.rows());
}

double rmse(const DataMatrix& imputed, const DataMatrix& truth) { return std::sqrt(mse(imputed, truth)); }

double masked_mse(const DataMatrix& imputed, const DataMatrix& truth, const DataMatrix& masked) {
    same_shape(imputed, truth);
    same_shape(imputed, masked);
    double total = 0.0;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < imputed.rows(); ++i) {
        double row = 0.0;
        std::size_t cells = 0;
        for (std::size_t f = 0; f < imputed.cols(); ++f) {
            if (!masked.missing(i, f)) continue;
            const double d = imputed.value(i, f) - truth.value(i, f);
            row += d * d;
            ++cells;
        }
        if (cells == 0) continue;
        total += row / static_cast<double>(cells);
        ++rows;
    }
    if (rows == 0) fail(ErrorCode::undefined_metric, "masked MSE is undefined without missing cells");
    return total / static_cast<double>(rows);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::invalid_argument, "scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t q = i; q < j; ++q) {
            const int y = labels[order[q]];
            if (y != 0 && y != 1) fail(ErrorCode::invalid_argument, "labels must be 0 or 1");
            if (y == 1) rank_sum += midrank, ++pos;
        }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) fail(ErrorCode::undefined_metric, "AUC needs both classes");
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

BoundConstants sigma_miss(double sigma, std::size_t k) {
    if (!(sigma > 0.0) || k < 1) fail(ErrorCode::invalid_argument, "sigma must be positive and K >= 1");
    const double kk = static_cast<double>(k);
    BoundConstants b;
    b.sigma2 = sigma * std::sqrt(1.0 + 1.0 / kk);
    b.sigma_gsm = sigma * std::sqrt((kk + 3.0) / (3.0 * kk));
    b.sigma_miss = std::max(b.sigma2, b.sigma_gsm);
    return b;
}

double c_miss(double sigma_miss, std::size_t f, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::invalid_argument, "delta must lie in (0,1)");
    const double s2f = sigma_miss * sigma_miss * static_cast<double>(f);
    const double l = std::log(1.0 / delta);
    return s2f + 2.0 * l * (1.0 + std::sqrt(1.0 + 8.0 * s2f / l));
}

double max_range(const std::vector<std::vector<double>>& vectors) {
    double d = 0.0;
    for (const auto& v : vectors) {
        if (v.empty()) continue;
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        d = std::max(d, *hi - *lo);
    }
    return d;
}

namespace {

BoundConstants assemble(const std::vector<std::vector<double>>& vectors, double h, double linear_weight,
                        double sigma, std::size_t n, std::size_t f, std::size_t k) {
    BoundConstants b = sigma_miss(sigma, k);
    const double nn = static_cast<double>(n);
    b.c_miss = c_miss(b.sigma_miss, f, 1.0 / (nn * nn * nn));
    const std::size_t t = vectors.size();
    if (t == 0) return b;
    b.delta_t = max_range(vectors);
    b.adahedge_term = adahedge_regret_bound(b.delta_t, t, k);
    b.bound_value = b.adahedge_term + linear_weight * b.c_miss / h * static_cast<double>(t);
    return b;
}

}  // namespace

BoundConstants imputation_regret_bound(const std::vector<std::vector<double>>& gradients, double h, double sigma,
                           std::size_t n, std::size_t f, std::size_t k) {
    return assemble(gradients, h, 1.0, sigma, n, f, k);
}

BoundConstants joint_regret_bound(const std::vector<std::vector<double>>& directions, double h, double beta,
                           double sigma, std::size_t n, std::size_t f, std::size_t k) {
    return assemble(directions, h, 1.0 - beta, sigma, n, f, k);
}

double StepObjectives::sum(std::span<const double> alpha) const {
    double total = 0.0;
    for (std::size_t s = 0; s < steps(); ++s) total += value(s, alpha);
    return total;
}

double StepObjectives::sum_and_gradient(std::span<const double> alpha, std::vector<double>& grad) const {
    grad.assign(dim(), 0.0);
    std::vector<double> g;
    double total = 0.0;
    for (std::size_t s = 0; s < steps(); ++s) {
        total += value_and_gradient(s, alpha, g);
        for (std::size_t q = 0; q < grad.size(); ++q) grad[q] += g[q];
    }
    return total;
}

double StepObjectives::realized(const std::vector<std::vector<double>>& alphas) const {
    if (alphas.size() != steps()) fail(ErrorCode::invalid_argument, "one weight vector per round required");
    double total = 0.0;
    for (std::size_t s = 0; s < steps(); ++s) total += value(s, alphas[s]);
    return total;
}

ObjectiveSteps::ObjectiveSteps(const NeighborIndex& reference, const NeighborIndex& density,
                               const std::vector<DataMatrix>& states, double eta, std::size_t k)
    : k_(k) {
    contexts_.reserve(states.size());
    for (const DataMatrix& s : states) contexts_.emplace_back(reference, density, s, eta, k);
}

double ObjectiveSteps::value(std::size_t s, std::span<const double> alpha) const {
    return contexts_.at(s).value(alpha);
}

double ObjectiveSteps::value_and_gradient(std::size_t s, std::span<const double> alpha,
                                          std::vector<double>& grad) const {
    return contexts_.at(s).value_and_gradient(alpha, grad);
}

OracleResult regret_oracle(const StepObjectives& objective, const std::vector<std::vector<double>>& seeds,
                           double tol, std::size_t max_iter) {
    const std::size_t k = objective.dim();
    OracleResult best;
    best.alpha = SimplexWeights::uniform(k).values();
    best.value = objective.sum(best.alpha);
    for (const auto& a : seeds) {
        const double v = objective.sum(a);
        if (v > best.value) best.value = v, best.alpha = a;
    }

    std::vector<double> x = best.alpha, g, y(k), trial(k);
    double fx = objective.sum_and_gradient(x, g);
    double step = 1.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        best.iterations = it;
        for (std::size_t q = 0; q < k; ++q) trial[q] = x[q] + g[q];
        const auto unit = project_to_simplex(trial).values();
        double pg = 0.0;
        for (std::size_t q = 0; q < k; ++q) pg += (unit[q] - x[q]) * (unit[q] - x[q]);
        if (std::sqrt(pg) < tol) {
            best.converged = true;
            break;
        }
        double fy = fx;
        bool accepted = false;
        while (step > 1e-30) {
            for (std::size_t q = 0; q < k; ++q) trial[q] = x[q] + step * g[q];
            y = project_to_simplex(trial).values();
            fy = objective.sum(y);
            double lin = 0.0, dist2 = 0.0;
            for (std::size_t q = 0; q < k; ++q) {
                lin += g[q] * (y[q] - x[q]);
                dist2 += (y[q] - x[q]) * (y[q] - x[q]);
            }
            if (fy >= fx + lin - dist2 / (2.0 * step)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || y == x) break;  // no representable progress left
        x = y;
        fx = objective.sum_and_gradient(x, g);
        step *= 2.0;
    }
    if (fx > best.value) best.value = fx, best.alpha = x;
    if (!best.converged) {
        // Stalled at floating-point resolution counts as converged when the ascent
        // direction is numerically negligible against the objective scale.
        for (std::size_t q = 0; q < k; ++q) trial[q] = x[q] + g[q];
        const auto unit = project_to_simplex(trial).values();
        double lin = 0.0;
        for (std::size_t q = 0; q < k; ++q) lin += g[q] * (unit[q] - x[q]);
        best.converged = lin <= 1e-12 * std::max(1.0, std::abs(fx));
    }
    return best;
}

RegretResult cumulative_regret(const StepObjectives& objective, const std::vector<std::vector<double>>& alphas) {
    RegretResult r;
    r.oracle = regret_oracle(objective, alphas);
    r.best = r.oracle.value;
    r.realized = objective.realized(alphas);
    r.regret = r.best - r.realized;
    return r;
}

}  // namespace f3i
