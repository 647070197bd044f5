#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace f3i {

enum class ErrorCode {
    invalid_argument,
    numerical,
    generation_failure,
    degenerate,
    undefined_metric,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Warnings (e.g. neighbor counts clamped) go through a replaceable sink; stderr by default.
using WarningSink = void (*)(const char* message);
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Dense row-major N x F matrix with a missing mask (1 = missing).
// Missing cells hold NaN until imputed; the mask is authoritative.
class DataMatrix {
public:
    DataMatrix() = default;
    DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
               std::vector<std::uint8_t> mask);

    // Complete matrix, nothing masked.
    static DataMatrix complete(std::size_t rows, std::size_t cols, std::vector<double> values);
    // Mask derived from NaN cells.
    static DataMatrix from_nan(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double value(std::size_t i, std::size_t f) const { return values_[i * cols_ + f]; }
    bool missing(std::size_t i, std::size_t f) const { return mask_[i * cols_ + f] != 0; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
    std::span<const std::uint8_t> mask_row(std::size_t i) const {
        return {mask_.data() + i * cols_, cols_};
    }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

    std::size_t missing_count() const;
    std::size_t observed_in_column(std::size_t f) const;
    // True when every cell, masked or not, holds a finite value.
    bool all_finite() const;
    bool has_missing() const { return missing_count() > 0; }

    // Same mask, new values (used to materialize imputations).
    DataMatrix with_values(std::vector<double> values) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

class SimplexWeights {
public:
    explicit SimplexWeights(std::vector<double> w);
    static SimplexWeights uniform(std::size_t k);
    static SimplexWeights vertex(std::size_t k, std::size_t j);

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t k) const { return w_[k]; }
    const std::vector<double>& values() const noexcept { return w_; }
    double squared_norm() const;

private:
    std::vector<double> w_;
};

struct GaussianParams {
    std::vector<double> mu;
    double sigma = 0.1;
};

struct Config {
    std::size_t n_neighbors = 5;
    std::size_t max_iter = 500;
    double eta = 0.001;
    double norm_cap = 1.0;
    double beta = 0.0;
    bool normalize = false;
    std::optional<double> bandwidth;  // unset: smallest concavity-safe value
    std::uint64_t seed = 0;

    void validate() const;
};

// Euclidean projection onto the probability simplex.
SimplexWeights project_to_simplex(std::span<const double> v);

struct NormalizedRows {
    DataMatrix matrix;
    std::vector<double> scales;
};

NormalizedRows l2_normalize_rows(const DataMatrix& x);
DataMatrix denormalize_rows(const DataMatrix& x, std::span<const double> scales);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

// Independent stream per (seed, purpose) so components don't share draws.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace f3i
