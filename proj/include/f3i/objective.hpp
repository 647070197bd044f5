#pragma once

#include <cstddef>
#include <vector>

#include "f3i/core.hpp"
#include "f3i/neighbors.hpp"

namespace f3i {

// Objective over one state X^{s-1}: neighbor lists come from `reference`
// (Chebyshev k-NN of each state row), log-densities from `density`.
// For G both indices are the same X^0 index; for the ground-truth variant
// `density` is built on the complete data with the same bandwidth.
class ObjectiveContext {
public:
    ObjectiveContext(const NeighborIndex& reference, const NeighborIndex& density,
                     const DataMatrix& state, double eta, std::size_t k);

    std::size_t samples() const noexcept { return n_; }
    std::size_t k() const noexcept { return k_; }
    double eta() const noexcept { return eta_; }
    const NeighborIndex& density() const noexcept { return *density_; }

    // Neighbor rows (reference indices) chosen for sample i.
    const std::vector<std::size_t>& neighbors(std::size_t i) const { return samples_[i].neighbors; }
    // log D(x_i) for the unchanged state row.
    double base_log_density(std::size_t i) const { return samples_[i].base_log_density; }

    // x_i(alpha): missing coordinates set to sum_k alpha_k z^{n_k}_f.
    std::vector<double> imputed_row(std::size_t i, std::span<const double> alpha) const;
    DataMatrix impute(std::span<const double> alpha) const;

    double value(std::span<const double> alpha) const;
    std::vector<double> gradient(std::span<const double> alpha) const;
    // Row-major K x K.
    std::vector<double> hessian(std::span<const double> alpha) const;

    // Value and gradient in one pass.
    double value_and_gradient(std::span<const double> alpha, std::vector<double>& grad) const;

    // Missing coordinates of sample i and its K neighbor values there (|M| x K, row-major).
    const std::vector<std::size_t>& missing(std::size_t i) const { return samples_[i].missing; }
    const std::vector<double>& neighbor_block(std::size_t i) const { return samples_[i].block; }

private:
    struct Sample {
        std::vector<std::size_t> neighbors;
        std::vector<std::size_t> missing;
        std::vector<double> block;     // |M| x K
        std::vector<double> base_sq;   // squared distance to each density row on observed coords
        double base_log_density = 0.0;
    };

    // Returns log D(x_i(alpha)); fills imputed coordinates and optionally kernel weights.
    double sample_log_density(std::size_t i, std::span<const double> alpha, std::vector<double>& v,
                              std::vector<double>* weights) const;
    void check_alpha(std::span<const double> alpha) const;

    const NeighborIndex* reference_;
    const NeighborIndex* density_;
    std::vector<double> state_;
    std::size_t n_, f_, k_;
    double eta_;
    std::vector<Sample> samples_;
};

// Smallest bandwidth making the objective concave: the root above b/3 of
// -2h^3 + b h^2 + c with b = (4 S^2 K - eta) / (2 K S), c = N^2 S / 4.
double solve_bandwidth(double norm_cap, std::size_t k, double eta, std::size_t n);
double bandwidth_cubic(double h, double norm_cap, std::size_t k, double eta, std::size_t n);

// |sum_s G(alpha^s, X^{s-1}) - [mean_i (log D(x^t_i) - log D(x^0_i)) - eta sum_s ||alpha^s||^2]|
double telescope_residual(const std::vector<double>& per_step_values,
                          const std::vector<double>& log_density_start,
                          const std::vector<double>& log_density_end, double eta,
                          const std::vector<std::vector<double>>& alphas);

std::vector<double> row_log_densities(const NeighborIndex& density, const DataMatrix& x);

}  // namespace f3i
