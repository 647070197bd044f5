#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "f3i/core.hpp"

namespace f3i {

// AdaHedge over K experts (de Rooij et al. recursion). Losses may be negative.
class AdaHedge {
public:
    explicit AdaHedge(std::size_t k);

    std::size_t experts() const noexcept { return cum_loss_.size(); }
    std::size_t rounds() const noexcept { return rounds_; }
    double cumulative_gap() const noexcept { return gap_; }
    const std::vector<double>& cumulative_loss() const noexcept { return cum_loss_; }

    // ln K / Delta; +inf while Delta == 0.
    double learning_rate() const;
    SimplexWeights predict() const;
    // Returns the mixability gap of this round.
    double update(std::span<const double> loss);

private:
    std::vector<double> cum_loss_;
    double gap_ = 0.0;
    std::size_t rounds_ = 0;
};

// 2 d sqrt(t ln K) + 16 d (2 + ln K / 3), with d the largest per-round loss range.
double adahedge_regret_bound(double loss_range, std::size_t t, std::size_t k);

}  // namespace f3i
