#include "f3i/neighbors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>

namespace f3i {

namespace {

constexpr std::size_t kLeafSize = 8;

bool closer(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

}  // namespace

double chebyshev_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) m = std::max(m, std::abs(a[f] - b[f]));
    return m;
}

NeighborIndex::NeighborIndex(const DataMatrix& reference, double bandwidth)
    : n_(reference.rows()), dim_(reference.cols()), h_(bandwidth), ref_(reference.values()) {
    // Imputed matrices keep their mask; only unfilled (non-finite) cells are rejected.
    if (!reference.all_finite())
        fail(ErrorCode::invalid_argument, "reference set has missing or non-finite entries");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        fail(ErrorCode::invalid_argument, "bandwidth must be positive");
    log_norm_ = -std::log(static_cast<double>(n_)) -
                static_cast<double>(dim_) * std::log(std::sqrt(2.0 * std::numbers::pi) * h_);
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * n_ / kLeafSize + 2);
    build(0, n_);
}

int NeighborIndex::build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t d = 0; d < dim_; ++d) {
        double lo = ref_[order_[begin] * dim_ + d], hi = lo;
        for (std::size_t p = begin + 1; p < end; ++p) {
            const double v = ref_[order_[p] * dim_ + d];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) best_spread = hi - lo, best_dim = d;
    }
    if (best_spread <= 0.0) return id;  // all points identical: keep as a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    auto coord = [&](std::size_t j) { return ref_[j * dim_ + best_dim]; };
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return coord(a) < coord(b); });
    nodes_[static_cast<std::size_t>(id)].split_dim = best_dim;
    nodes_[static_cast<std::size_t>(id)].split_value = coord(order_[mid]);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

void NeighborIndex::search(int node_id, std::span<const double> x, std::size_t k,
                           std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.left < 0) {
        for (std::size_t p = node.begin; p < node.end; ++p) {
            const std::size_t j = order_[p];
            const Neighbor cand{j, chebyshev_distance(x, point(j))};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end(), closer);
            } else if (closer(cand, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), closer);
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end(), closer);
            }
        }
        return;
    }
    const double gap = x[node.split_dim] - node.split_value;
    const int near = gap < 0.0 ? node.left : node.right;
    const int far = gap < 0.0 ? node.right : node.left;
    search(near, x, k, heap);
    // Equal bound still searched: a tie may win on index.
    if (heap.size() < k || std::abs(gap) <= heap.front().distance) search(far, x, k, heap);
}

std::vector<Neighbor> NeighborIndex::knn_chebyshev(std::span<const double> x, std::size_t k) const {
    if (k == 0 || k > n_)
        fail(ErrorCode::invalid_argument,
             "requested " + std::to_string(k) + " neighbors from a reference set of " + std::to_string(n_));
    if (x.size() != dim_) fail(ErrorCode::invalid_argument, "query dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "query must be finite");
    std::vector<Neighbor> heap;
    heap.reserve(k);
    search(0, x, k, heap);
    std::sort_heap(heap.begin(), heap.end(), closer);
    return heap;
}

double NeighborIndex::log_density_from_sq(std::span<const double> sq, std::vector<double>* weights) const {
    const double scale = -1.0 / (4.0 * h_);
    double top = -std::numeric_limits<double>::infinity();
    for (double s : sq) top = std::max(top, scale * s);
    double total = 0.0;
    if (weights) weights->resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
        const double e = std::exp(scale * sq[j] - top);
        total += e;
        if (weights) (*weights)[j] = e;
    }
    if (weights)
        for (double& w : *weights) w /= total;
    return log_norm_ + top + std::log(total);
}

double NeighborIndex::log_density(std::span<const double> x, std::vector<double>& weights) const {
    if (x.size() != dim_) fail(ErrorCode::invalid_argument, "query dimension mismatch");
    std::vector<double> sq(n_);
    for (std::size_t j = 0; j < n_; ++j) sq[j] = squared_distance(x, point(j));
    return log_density_from_sq(sq, &weights);
}

double NeighborIndex::log_density(std::span<const double> x) const {
    if (x.size() != dim_) fail(ErrorCode::invalid_argument, "query dimension mismatch");
    std::vector<double> sq(n_);
    for (std::size_t j = 0; j < n_; ++j) sq[j] = squared_distance(x, point(j));
    return log_density_from_sq(sq, nullptr);
}

}  // namespace f3i
