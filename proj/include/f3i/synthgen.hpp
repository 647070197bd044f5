#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "f3i/core.hpp"

namespace f3i {

enum class Mechanism { mcar, mar_logistic, mnar_gsm };

struct MissingnessSpec {
    Mechanism mechanism = Mechanism::mcar;
    double p_miss = 0.25;
    double f_obs_fraction = 0.3;  // MAR: share of features never masked
    double kf_low = 0.01;         // MNAR: clip range for per-feature self-masking scale
    double kf_high = 0.99;

    void validate() const;
};

// Feature means drawn from N(0, sigma^2 I).
GaussianParams draw_gaussian_params(std::size_t f, double sigma, std::uint64_t seed);

DataMatrix generate_complete(std::size_t n, std::size_t f, const GaussianParams& params,
                             std::uint64_t seed);

DataMatrix apply_mcar(const DataMatrix& x, double p_miss, std::uint64_t seed);
DataMatrix apply_mar_logistic(const DataMatrix& x, const MissingnessSpec& spec, std::uint64_t seed);
DataMatrix apply_mnar_gsm(const DataMatrix& x, const GaussianParams& params,
                          const MissingnessSpec& spec, std::uint64_t seed);

// Dispatch on spec.mechanism; params is only read by the self-masking mechanism.
DataMatrix apply_missingness(const DataMatrix& x, const GaussianParams& params,
                             const MissingnessSpec& spec, std::uint64_t seed);

// Per-feature self-masking scales actually used for a given (spec, seed); exposed for tests.
std::vector<double> draw_self_masking_scales(std::size_t f, const MissingnessSpec& spec,
                                             std::uint64_t seed);

using ItemUserPair = std::pair<std::size_t, std::size_t>;

// Two-cluster k-means++ on concatenated (item, user) vectors; cluster id is the label.
// Labels are canonicalized so the first pair gets label 0.
std::vector<int> make_classification_labels(const DataMatrix& items, const DataMatrix& users,
                                            const std::vector<ItemUserPair>& pairs,
                                            std::uint64_t seed);

struct KMeansResult {
    std::vector<int> assignment;
    std::vector<std::vector<double>> centers;
    double inertia = 0.0;
};

KMeansResult kmeans_pp(const std::vector<std::vector<double>>& points, std::size_t k,
                       std::uint64_t seed, std::size_t restarts = 10, std::size_t max_iter = 100,
                       double tol = 1e-8);

}  // namespace f3i
