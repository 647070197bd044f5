#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "f3i/core.hpp"

namespace f3i {

struct Neighbor {
    std::size_t index;
    double distance;
};

// Reference set with a k-d tree for Chebyshev k-NN queries and an exhaustive
// Gaussian-kernel log-density. Kernel exponent is -||x - z||^2 / (4h).
class NeighborIndex {
public:
    NeighborIndex(const DataMatrix& reference, double bandwidth);

    std::size_t size() const noexcept { return n_; }
    std::size_t dim() const noexcept { return dim_; }
    double bandwidth() const noexcept { return h_; }
    std::span<const double> point(std::size_t j) const { return {ref_.data() + j * dim_, dim_}; }

    // K nearest reference rows by max-coordinate distance, ordered by (distance, index).
    std::vector<Neighbor> knn_chebyshev(std::span<const double> x, std::size_t k) const;

    // log of (1/N') sum_j (sqrt(2 pi) h)^-F exp(-||x - z_j||^2 / (4h)).
    double log_density(std::span<const double> x) const;

    // Same value; also fills softmax weights w_j proportional to exp(-||x - z_j||^2 / (4h)).
    double log_density(std::span<const double> x, std::vector<double>& weights) const;

    // Log-density from precomputed squared distances to every reference row.
    double log_density_from_sq(std::span<const double> sq, std::vector<double>* weights) const;

private:
    struct Node {
        std::size_t begin, end;  // range in order_
        std::size_t split_dim;
        double split_value;
        int left = -1, right = -1;
    };

    int build(std::size_t begin, std::size_t end);
    void search(int node, std::span<const double> x, std::size_t k, std::vector<Neighbor>& heap) const;

    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    double h_ = 1.0;
    double log_norm_ = 0.0;
    std::vector<double> ref_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

double chebyshev_distance(std::span<const double> a, std::span<const double> b);

}  // namespace f3i
