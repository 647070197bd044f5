#include "f3i/objective.hpp"

#include <algorithm>
#include <cmath>

namespace f3i {

ObjectiveContext::ObjectiveContext(const NeighborIndex& reference, const NeighborIndex& density,
                                   const DataMatrix& state, double eta, std::size_t k)
    : reference_(&reference),
      density_(&density),
      state_(state.values()),
      n_(state.rows()),
      f_(state.cols()),
      k_(k),
      eta_(eta),
      samples_(state.rows()) {
    if (!state.all_finite()) fail(ErrorCode::invalid_argument, "objective state must be fully imputed");
    if (reference.dim() != f_ || density.dim() != f_)
        fail(ErrorCode::invalid_argument, "index dimension does not match state");
    if (density.bandwidth() != reference.bandwidth())
        fail(ErrorCode::invalid_argument, "reference and density indices must share a bandwidth");
    if (!(eta >= 0.0)) fail(ErrorCode::invalid_argument, "eta must be nonnegative");

    const std::size_t nd = density.size();
    for (std::size_t i = 0; i < n_; ++i) {
        Sample& s = samples_[i];
        const auto row = state.row(i);
        for (const Neighbor& nb : reference.knn_chebyshev(row, k)) s.neighbors.push_back(nb.index);
        for (std::size_t f = 0; f < f_; ++f)
            if (state.missing(i, f)) s.missing.push_back(f);
        s.block.resize(s.missing.size() * k_);
        for (std::size_t m = 0; m < s.missing.size(); ++m)
            for (std::size_t q = 0; q < k_; ++q)
                s.block[m * k_ + q] = reference.point(s.neighbors[q])[s.missing[m]];
        s.base_log_density = density.log_density(row);
        if (s.missing.empty()) continue;
        s.base_sq.assign(nd, 0.0);
        for (std::size_t j = 0; j < nd; ++j) {
            const auto z = density.point(j);
            double acc = 0.0;
            for (std::size_t f = 0; f < f_; ++f) {
                if (state.missing(i, f)) continue;
                const double d = row[f] - z[f];
                acc += d * d;
            }
            s.base_sq[j] = acc;
        }
    }
}

void ObjectiveContext::check_alpha(std::span<const double> alpha) const {
    if (alpha.size() != k_) fail(ErrorCode::invalid_argument, "weight vector length must equal K");
}

std::vector<double> ObjectiveContext::imputed_row(std::size_t i, std::span<const double> alpha) const {
    check_alpha(alpha);
    std::vector<double> out(state_.begin() + static_cast<std::ptrdiff_t>(i * f_),
                            state_.begin() + static_cast<std::ptrdiff_t>((i + 1) * f_));
    const Sample& s = samples_[i];
    for (std::size_t m = 0; m < s.missing.size(); ++m) {
        double v = 0.0;
        for (std::size_t q = 0; q < k_; ++q) v += alpha[q] * s.block[m * k_ + q];
        out[s.missing[m]] = v;
    }
    return out;
}

DataMatrix ObjectiveContext::impute(std::span<const double> alpha) const {
    std::vector<double> values(n_ * f_);
    std::vector<std::uint8_t> mask(n_ * f_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
        const auto row = imputed_row(i, alpha);
        std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(i * f_));
        for (std::size_t f : samples_[i].missing) mask[i * f_ + f] = 1;
    }
    return DataMatrix(n_, f_, std::move(values), std::move(mask));
}

double ObjectiveContext::sample_log_density(std::size_t i, std::span<const double> alpha,
                                            std::vector<double>& v, std::vector<double>* weights) const {
    const Sample& s = samples_[i];
    const std::size_t nm = s.missing.size();
    v.assign(nm, 0.0);
    for (std::size_t m = 0; m < nm; ++m)
        for (std::size_t q = 0; q < k_; ++q) v[m] += alpha[q] * s.block[m * k_ + q];
    const std::size_t nd = density_->size();
    std::vector<double> sq(s.base_sq);
    for (std::size_t j = 0; j < nd; ++j) {
        const auto z = density_->point(j);
        double acc = 0.0;
        for (std::size_t m = 0; m < nm; ++m) {
            const double d = v[m] - z[s.missing[m]];
            acc += d * d;
        }
        sq[j] += acc;
    }
    const double ld = density_->log_density_from_sq(sq, weights);
    if (!std::isfinite(ld))
        fail(ErrorCode::numerical, "non-finite log-density at sample " + std::to_string(i));
    return ld;
}

double ObjectiveContext::value(std::span<const double> alpha) const {
    check_alpha(alpha);
    double total = 0.0;
    std::vector<double> v;
    for (std::size_t i = 0; i < n_; ++i) {
        if (samples_[i].missing.empty()) continue;
        total += sample_log_density(i, alpha, v, nullptr) - samples_[i].base_log_density;
    }
    return total / static_cast<double>(n_) - eta_ * dot(alpha, alpha);
}

double ObjectiveContext::value_and_gradient(std::span<const double> alpha, std::vector<double>& grad) const {
    check_alpha(alpha);
    grad.assign(k_, 0.0);
    const double coef = -1.0 / (2.0 * density_->bandwidth() * static_cast<double>(n_));
    const std::size_t nd = density_->size();
    double total = 0.0;
    std::vector<double> v, w, dbar;
    for (std::size_t i = 0; i < n_; ++i) {
        const Sample& s = samples_[i];
        const std::size_t nm = s.missing.size();
        if (nm == 0) continue;
        total += sample_log_density(i, alpha, v, &w) - s.base_log_density;
        // dbar = x_i(alpha) - sum_j w_j z_j on the missing coordinates.
        dbar = v;
        for (std::size_t j = 0; j < nd; ++j) {
            const auto z = density_->point(j);
            for (std::size_t m = 0; m < nm; ++m) dbar[m] -= w[j] * z[s.missing[m]];
        }
        for (std::size_t m = 0; m < nm; ++m)
            for (std::size_t q = 0; q < k_; ++q) grad[q] += coef * dbar[m] * s.block[m * k_ + q];
    }
    for (std::size_t q = 0; q < k_; ++q) grad[q] -= 2.0 * eta_ * alpha[q];
    return total / static_cast<double>(n_) - eta_ * dot(alpha, alpha);
}

std::vector<double> ObjectiveContext::gradient(std::span<const double> alpha) const {
    std::vector<double> g;
    value_and_gradient(alpha, g);
    return g;
}

std::vector<double> ObjectiveContext::hessian(std::span<const double> alpha) const {
    check_alpha(alpha);
    const double h = density_->bandwidth();
    const std::size_t nd = density_->size();
    std::vector<double> hess(k_ * k_, 0.0);
    std::vector<double> v, w, a(nd * k_), abar(k_);
    for (std::size_t i = 0; i < n_; ++i) {
        const Sample& s = samples_[i];
        const std::size_t nm = s.missing.size();
        if (nm == 0) continue;
        sample_log_density(i, alpha, v, &w);
        // a_j = Zt^T (x_i(alpha) - z_j) restricted to missing coordinates.
        std::fill(a.begin(), a.end(), 0.0);
        std::fill(abar.begin(), abar.end(), 0.0);
        for (std::size_t j = 0; j < nd; ++j) {
            const auto z = density_->point(j);
            double* aj = a.data() + j * k_;
            for (std::size_t m = 0; m < nm; ++m) {
                const double d = v[m] - z[s.missing[m]];
                for (std::size_t q = 0; q < k_; ++q) aj[q] += d * s.block[m * k_ + q];
            }
            for (std::size_t q = 0; q < k_; ++q) abar[q] += w[j] * aj[q];
        }
        for (std::size_t p = 0; p < k_; ++p) {
            for (std::size_t q = 0; q < k_; ++q) {
                double gram = 0.0;
                for (std::size_t m = 0; m < nm; ++m) gram += s.block[m * k_ + p] * s.block[m * k_ + q];
                double second = 0.0;
                for (std::size_t j = 0; j < nd; ++j) second += w[j] * a[j * k_ + p] * a[j * k_ + q];
                second -= abar[p] * abar[q];
                hess[p * k_ + q] += -gram / (2.0 * h) + second / (4.0 * h * h);
            }
        }
    }
    for (double& x : hess) x /= static_cast<double>(n_);
    for (std::size_t q = 0; q < k_; ++q) hess[q * k_ + q] -= 2.0 * eta_;
    return hess;
}

double bandwidth_cubic(double h, double norm_cap, std::size_t k, double eta, std::size_t n) {
    const double kk = static_cast<double>(k);
    const double b = (4.0 * norm_cap * norm_cap * kk - eta) / (2.0 * kk * norm_cap);
    const double c = static_cast<double>(n) * static_cast<double>(n) * norm_cap / 4.0;
    return -2.0 * h * h * h + b * h * h + c;
}

double solve_bandwidth(double norm_cap, std::size_t k, double eta, std::size_t n) {
    if (!(norm_cap > 0.0) || k == 0 || n == 0 || !(eta >= 0.0))
        fail(ErrorCode::invalid_argument, "bandwidth solver needs S > 0, K >= 1, N >= 1, eta >= 0");
    const double kk = static_cast<double>(k);
    if (eta >= 4.0 * norm_cap * norm_cap * kk)
        fail(ErrorCode::invalid_argument, "eta >= 4 S^2 K: concavity cannot be guaranteed");
    const double b = (4.0 * norm_cap * norm_cap * kk - eta) / (2.0 * kk * norm_cap);
    const double c = static_cast<double>(n) * static_cast<double>(n) * norm_cap / 4.0;
    auto cubic = [&](double h) { return -2.0 * h * h * h + b * h * h + c; };

    // Monic form h^3 + a h^2 + d with a = -b/2, d = -c/2; depressed by h = y - a/3.
    const double a = -b / 2.0;
    const double d = -c / 2.0;
    const double p = -a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 + d;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    double root = std::numeric_limits<double>::quiet_NaN();
    if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        root = std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) - a / 3.0;
        for (int it = 0; it < 4; ++it) {
            const double slope = -6.0 * root * root + 2.0 * b * root;
            if (slope == 0.0) break;
            root -= cubic(root) / slope;
        }
    }
    const double tol = 1e-10 * std::max(1.0, c);
    if (!std::isfinite(root) || root <= b / 3.0 || std::abs(cubic(root)) > tol) {
        // Bisection on (b/3, hi): the cubic decreases there and is positive at b/3.
        double lo = b / 3.0, hi = std::max(1.0, b);
        while (cubic(hi) > 0.0) hi *= 2.0;
        for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cubic(mid) > 0.0 ? lo : hi) = mid;
        }
        root = hi;
    }
    while (cubic(root * (1.0 + 1e-9)) >= 0.0) root = std::nextafter(root, HUGE_VAL);
    return root;
}

double telescope_residual(const std::vector<double>& per_step_values,
                          const std::vector<double>& log_density_start,
                          const std::vector<double>& log_density_end, double eta,
                          const std::vector<std::vector<double>>& alphas) {
    double lhs = 0.0;
    for (double g : per_step_values) lhs += g;
    double rhs = 0.0;
    for (std::size_t i = 0; i < log_density_start.size(); ++i) rhs += log_density_end[i] - log_density_start[i];
    rhs /= static_cast<double>(log_density_start.size());
    for (const auto& a : alphas) rhs -= eta * dot(a, a);
    return std::abs(lhs - rhs);
}

std::vector<double> row_log_densities(const NeighborIndex& density, const DataMatrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = density.log_density(x.row(i));
    return out;
}

}  // namespace f3i
