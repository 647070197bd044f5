#pragma once

#include <cstdint>
#include <string>

#include "f3i/core.hpp"
#include "f3i/joint.hpp"
#include "f3i/synthgen.hpp"

namespace f3i {

// Seeded end-to-end runs used to check the theoretical bounds on synthetic data.
struct TrialSetup {
    std::size_t n = 50;
    std::size_t f = 100;
    double sigma = 0.1;
    MissingnessSpec missingness;
    Config config;
    JointConfig joint;
};

struct TrialResult {
    std::uint64_t seed = 0;
    double measured = 0.0;
    double bound = 0.0;
    bool satisfied = false;
    std::size_t t_final = 0;
    std::string stop_reason;
    double bandwidth = 0.0;
    double sigma_miss = 0.0;
    double c_miss = 0.0;
    double mse = 0.0;
    double missing_fraction = 0.0;
    bool oracle_converged = true;
};

struct SyntheticData {
    GaussianParams params;
    DataMatrix truth;
    DataMatrix masked;
};

SyntheticData make_synthetic(const TrialSetup& setup, std::uint64_t seed);

// N F MSE against N C^miss_{1/N^3}.
TrialResult mse_bound_trial(const TrialSetup& setup, std::uint64_t seed);
// Ground-truth-density regret of the run against the AdaHedge + linear bound.
TrialResult regret_bound_trial(const TrialSetup& setup, std::uint64_t seed);
// Joint objective regret over the final epoch against the corrected-direction bound.
// Features are item and user halves concatenated; labels come from 2-means.
TrialResult joint_bound_trial(const TrialSetup& setup, std::uint64_t seed);

struct PlantedSetup {
    std::size_t n = 200;
    std::size_t f = 20;
    double sigma = 0.1;
    double separation = 10.0;  // distance between blob centers, in units of sigma
    double p_miss = 0.25;
    Config config;
    JointConfig joint;
};

struct PlantedResult {
    double auc_joint = 0.0;
    double auc_mean = 0.0;
};

// Two Gaussian blobs, MCAR gaps, 70/20/10 split; held-out AUC of the joint model
// versus mean imputation followed by the same classifier training.
PlantedResult planted_blob_trial(const PlantedSetup& setup, std::uint64_t seed);

}  // namespace f3i
