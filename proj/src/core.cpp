#include "f3i/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace f3i {

namespace {

void stderr_sink(const char* message) { std::fprintf(stderr, "f3i: warning: %s\n", message); }

WarningSink g_sink = &stderr_sink;

}  // namespace

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

void set_warning_sink(WarningSink sink) { g_sink = sink ? sink : &stderr_sink; }

void warn(const std::string& message) { g_sink(message.c_str()); }

DataMatrix::DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       std::vector<std::uint8_t> mask)
    : rows_(rows), cols_(cols), values_(std::move(values)), mask_(std::move(mask)) {
    if (rows_ == 0 || cols_ == 0) fail(ErrorCode::invalid_argument, "matrix must be non-empty");
    if (values_.size() != rows_ * cols_ || mask_.size() != rows_ * cols_)
        fail(ErrorCode::invalid_argument, "matrix buffers do not match shape");
    for (std::size_t c = 0; c < values_.size(); ++c) {
        if (mask_[c]) {
            mask_[c] = 1;
        } else if (!std::isfinite(values_[c])) {
            fail(ErrorCode::invalid_argument,
                 "observed cell (" + std::to_string(c / cols_) + "," + std::to_string(c % cols_) +
                     ") is not finite");
        }
    }
}

DataMatrix DataMatrix::complete(std::size_t rows, std::size_t cols, std::vector<double> values) {
    std::vector<std::uint8_t> mask(values.size(), 0);
    return DataMatrix(rows, cols, std::move(values), std::move(mask));
}

DataMatrix DataMatrix::from_nan(std::size_t rows, std::size_t cols, std::vector<double> values) {
    std::vector<std::uint8_t> mask(values.size(), 0);
    for (std::size_t c = 0; c < values.size(); ++c) mask[c] = std::isnan(values[c]) ? 1 : 0;
    return DataMatrix(rows, cols, std::move(values), std::move(mask));
}

std::size_t DataMatrix::missing_count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

std::size_t DataMatrix::observed_in_column(std::size_t f) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < rows_; ++i) n += mask_[i * cols_ + f] ? 0 : 1;
    return n;
}

bool DataMatrix::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

DataMatrix DataMatrix::with_values(std::vector<double> values) const {
    return DataMatrix(rows_, cols_, std::move(values), mask_);
}

SimplexWeights::SimplexWeights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) fail(ErrorCode::invalid_argument, "simplex weights must be non-empty");
    double sum = 0.0;
    for (double v : w_) {
        if (!(v >= 0.0) || !std::isfinite(v))
            fail(ErrorCode::invalid_argument, "simplex weights must be finite and nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        if (std::abs(sum - 1.0) > 1e-9)
            fail(ErrorCode::invalid_argument, "simplex weights must sum to 1");
        for (double& v : w_) v /= sum;
    }
}

SimplexWeights SimplexWeights::uniform(std::size_t k) {
    return SimplexWeights(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

SimplexWeights SimplexWeights::vertex(std::size_t k, std::size_t j) {
    std::vector<double> w(k, 0.0);
    w.at(j) = 1.0;
    return SimplexWeights(std::move(w));
}

double SimplexWeights::squared_norm() const { return dot(w_, w_); }

void Config::validate() const {
    if (n_neighbors < 2) fail(ErrorCode::invalid_argument, "n_neighbors must be >= 2");
    if (max_iter < 1) fail(ErrorCode::invalid_argument, "max_iter must be >= 1");
    if (!(eta >= 0.0)) fail(ErrorCode::invalid_argument, "eta must be nonnegative");
    if (!(norm_cap > 0.0)) fail(ErrorCode::invalid_argument, "norm cap must be positive");
    if (eta >= 4.0 * norm_cap * norm_cap * static_cast<double>(n_neighbors))
        fail(ErrorCode::invalid_argument, "eta must be below 4*S^2*K");
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::invalid_argument, "beta must lie in [0,1]");
    if (bandwidth && !(*bandwidth > 0.0))
        fail(ErrorCode::invalid_argument, "bandwidth override must be positive");
}

SimplexWeights project_to_simplex(std::span<const double> v) {
    if (v.empty()) fail(ErrorCode::invalid_argument, "cannot project an empty vector");
    for (double x : v)
        if (!std::isfinite(x)) fail(ErrorCode::invalid_argument, "projection input is not finite");

    // Sort-based threshold search.
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    std::vector<double> w(v.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        w[k] = std::max(v[k] - theta, 0.0);
        sum += w[k];
    }
    for (double& x : w) x /= sum;
    return SimplexWeights(std::move(w));
}

NormalizedRows l2_normalize_rows(const DataMatrix& x) {
    std::vector<double> values = x.values();
    std::vector<double> scales(x.rows(), 1.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double norm2 = 0.0;
        std::size_t observed = 0;
        for (std::size_t f = 0; f < x.cols(); ++f) {
            if (x.missing(i, f)) continue;
            norm2 += x.value(i, f) * x.value(i, f);
            ++observed;
        }
        if (observed == 0)
            fail(ErrorCode::invalid_argument, "row " + std::to_string(i) + " has no observed value");
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) continue;
        scales[i] = norm;
        for (std::size_t f = 0; f < x.cols(); ++f)
            if (!x.missing(i, f)) values[i * x.cols() + f] /= norm;
    }
    return {x.with_values(std::move(values)), std::move(scales)};
}

DataMatrix denormalize_rows(const DataMatrix& x, std::span<const double> scales) {
    if (scales.size() != x.rows()) fail(ErrorCode::invalid_argument, "scale count mismatch");
    std::vector<double> values = x.values();
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t f = 0; f < x.cols(); ++f) values[i * x.cols() + f] *= scales[i];
    return x.with_values(std::move(values));
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over the combined key
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace f3i
