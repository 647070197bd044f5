#include "f3i/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace f3i {

namespace {

double log_sum_exp(const std::vector<double>& x) {
    const double top = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - top);
    return top + std::log(s);
}

}  // namespace

AdaHedge::AdaHedge(std::size_t k) : cum_loss_(k, 0.0) {
    if (k < 1) fail(ErrorCode::invalid_argument, "AdaHedge needs at least one expert");
}

double AdaHedge::learning_rate() const {
    if (gap_ == 0.0) return std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(experts())) / gap_;
}

SimplexWeights AdaHedge::predict() const {
    const std::size_t k = experts();
    const double low = *std::min_element(cum_loss_.begin(), cum_loss_.end());
    const double rate = learning_rate();
    std::vector<double> w(k);
    double total = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
        const double r = cum_loss_[q] - low;
        w[q] = std::isinf(rate) ? (r == 0.0 ? 1.0 : 0.0) : std::exp(-rate * r);
        total += w[q];
    }
    for (double& v : w) v /= total;
    return SimplexWeights(std::move(w));
}

double AdaHedge::update(std::span<const double> loss) {
    const std::size_t k = experts();
    if (loss.size() != k) fail(ErrorCode::invalid_argument, "loss vector length must equal K");
    for (double l : loss)
        if (!std::isfinite(l)) fail(ErrorCode::invalid_argument, "loss must be finite");

    // Everything below works on shifted losses and shifted cumulative losses;
    // both hedge and mix loss move by the same constant under a shift.
    const double low_l = *std::min_element(loss.begin(), loss.end());
    const double low_cum = *std::min_element(cum_loss_.begin(), cum_loss_.end());
    const SimplexWeights w = predict();
    const double rate = learning_rate();

    double hedge = 0.0;
    for (std::size_t q = 0; q < k; ++q) hedge += w[q] * (loss[q] - low_l);

    double mix;
    if (std::isinf(rate)) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < k; ++q)
            best = std::min(best, (cum_loss_[q] - low_cum) + (loss[q] - low_l));
        mix = best;
    } else {
        std::vector<double> before(k), after(k);
        for (std::size_t q = 0; q < k; ++q) {
            before[q] = -rate * (cum_loss_[q] - low_cum);
            after[q] = -rate * ((cum_loss_[q] - low_cum) + (loss[q] - low_l));
        }
        mix = -(log_sum_exp(after) - log_sum_exp(before)) / rate;
    }

    const double delta = std::max(0.0, hedge - mix);
    gap_ += delta;
    for (std::size_t q = 0; q < k; ++q) cum_loss_[q] += loss[q];
    ++rounds_;
    return delta;
}

double adahedge_regret_bound(double loss_range, std::size_t t, std::size_t k) {
    const double lk = std::log(static_cast<double>(k));
    return 2.0 * loss_range * std::sqrt(static_cast<double>(t) * lk) + 16.0 * loss_range * (2.0 + lk / 3.0);
}

}  // namespace f3i
