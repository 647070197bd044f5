#include "f3i/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace f3i {

namespace {

constexpr int kMaxColumnRedraws = 100;

double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Draw the mask column by column. prob(i) gives P(masked) for row i of column f.
// A column is redrawn while it would keep fewer than two observed cells.
template <typename Prob>
DataMatrix mask_columns(const DataMatrix& x, const std::vector<std::uint8_t>& maskable,
                        std::uint64_t seed, Prob prob) {
    const std::size_t n = x.rows();
    const std::size_t f_count = x.cols();
    std::vector<double> values = x.values();
    std::vector<std::uint8_t> mask = x.mask();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<std::uint8_t> column(n);
    for (std::size_t f = 0; f < f_count; ++f) {
        if (!maskable[f]) continue;
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt == kMaxColumnRedraws)
                fail(ErrorCode::generation_failure,
                     "feature " + std::to_string(f) +
                         " keeps fewer than 2 observed entries after 100 redraws");
            std::size_t observed = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool already = mask[i * f_count + f] != 0;
                column[i] = already || unif(rng) < prob(i, f);
                observed += column[i] ? 0 : 1;
            }
            if (observed >= 2) break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!column[i]) continue;
            mask[i * f_count + f] = 1;
            values[i * f_count + f] = kMissing;
        }
    }
    return DataMatrix(n, f_count, std::move(values), std::move(mask));
}

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::invalid_argument, std::string(name) + " must lie in [0,1]");
}

}  // namespace

void MissingnessSpec::validate() const {
    // 0 is accepted so a run can pass data through unmasked; 1 leaves nothing to impute from.
    if (!(p_miss >= 0.0 && p_miss < 1.0)) fail(ErrorCode::invalid_argument, "p_miss must lie in [0,1)");
    if (!(f_obs_fraction > 0.0 && f_obs_fraction < 1.0))
        fail(ErrorCode::invalid_argument, "f_obs_fraction must lie in (0,1)");
    if (!(kf_low >= 0.0 && kf_low <= kf_high && kf_high <= 1.0))
        fail(ErrorCode::invalid_argument, "self-masking clip range must satisfy 0 <= low <= high <= 1");
}

GaussianParams draw_gaussian_params(std::size_t f, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) fail(ErrorCode::invalid_argument, "sigma must be nonnegative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    GaussianParams params;
    params.sigma = sigma;
    params.mu.resize(f);
    for (double& m : params.mu) m = sigma * normal(rng);
    return params;
}

DataMatrix generate_complete(std::size_t n, std::size_t f, const GaussianParams& params,
                             std::uint64_t seed) {
    if (n == 0 || f == 0) fail(ErrorCode::invalid_argument, "n and f must be positive");
    if (params.mu.size() != f) fail(ErrorCode::invalid_argument, "mean vector length must equal f");
    if (!(params.sigma >= 0.0)) fail(ErrorCode::invalid_argument, "sigma must be nonnegative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> values(n * f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) values[i * f + j] = params.mu[j] + params.sigma * normal(rng);
    return DataMatrix::complete(n, f, std::move(values));
}

DataMatrix apply_mcar(const DataMatrix& x, double p_miss, std::uint64_t seed) {
    check_probability(p_miss, "p_miss");
    if (p_miss == 0.0) return x;
    std::vector<std::uint8_t> maskable(x.cols(), 1);
    return mask_columns(x, maskable, seed, [p_miss](std::size_t, std::size_t) { return p_miss; });
}

DataMatrix apply_mar_logistic(const DataMatrix& x, const MissingnessSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = x.rows();
    const std::size_t f_count = x.cols();
    const auto n_obs = static_cast<std::size_t>(std::floor(spec.f_obs_fraction * static_cast<double>(f_count)));
    if (n_obs < 1) fail(ErrorCode::invalid_argument, "MAR needs at least one always-observed feature");
    if (n_obs >= f_count) fail(ErrorCode::invalid_argument, "MAR needs at least one maskable feature");
    if (spec.p_miss == 0.0) return x;

    std::mt19937_64 rng(derive_seed(seed, 0));
    std::vector<std::size_t> order(f_count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> drivers(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_obs));
    std::sort(drivers.begin(), drivers.end());
    std::vector<std::uint8_t> maskable(f_count, 1);
    for (std::size_t f : drivers) maskable[f] = 0;

    // Driver features with (unexpected) gaps contribute their column mean.
    std::vector<double> driver_values(n * n_obs);
    for (std::size_t d = 0; d < n_obs; ++d) {
        const std::size_t f = drivers[d];
        double mean = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (!x.missing(i, f)) mean += x.value(i, f), ++cnt;
        mean = cnt ? mean / static_cast<double>(cnt) : 0.0;
        for (std::size_t i = 0; i < n; ++i)
            driver_values[i * n_obs + d] = x.missing(i, f) ? mean : x.value(i, f);
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> logits(n * f_count, 0.0);
    std::vector<double> latent(n);
    std::vector<double> w(n_obs);
    for (std::size_t f = 0; f < f_count; ++f) {
        if (!maskable[f]) continue;
        for (double& v : w) v = normal(rng);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            latent[i] = dot(w, std::span<const double>(driver_values.data() + i * n_obs, n_obs));
            mean += latent[i];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double z : latent) var += (z - mean) * (z - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        if (sd > 0.0)
            for (double& z : latent) z /= sd;

        auto mean_prob = [&](double b) {
            double s = 0.0;
            for (double z : latent) s += sigmoid(z + b);
            return s / static_cast<double>(n);
        };
        double lo = -60.0, hi = 60.0;
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mean_prob(mid) < spec.p_miss ? lo : hi) = mid;
        }
        const double b = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n; ++i) logits[i * f_count + f] = latent[i] + b;
    }

    return mask_columns(x, maskable, derive_seed(seed, 1), [&](std::size_t i, std::size_t f) {
        return sigmoid(logits[i * f_count + f]);
    });
}

std::vector<double> draw_self_masking_scales(std::size_t f, const MissingnessSpec& spec,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0));
    const double center = (3.5 / 3.0) * spec.p_miss * (1.0 - spec.p_miss);
    std::normal_distribution<double> normal(center, 0.1);
    std::vector<double> kf(f);
    for (double& k : kf) k = std::clamp(normal(rng), spec.kf_low, spec.kf_high);
    return kf;
}

DataMatrix apply_mnar_gsm(const DataMatrix& x, const GaussianParams& params,
                          const MissingnessSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (params.mu.size() != x.cols()) fail(ErrorCode::invalid_argument, "mean vector length must equal f");
    if (!(params.sigma > 0.0)) fail(ErrorCode::invalid_argument, "self-masking requires sigma > 0");
    if (spec.p_miss == 0.0) return x;
    const std::vector<double> kf = draw_self_masking_scales(x.cols(), spec, seed);
    const double inv_var = 1.0 / (params.sigma * params.sigma);
    std::vector<std::uint8_t> maskable(x.cols(), 1);
    return mask_columns(x, maskable, derive_seed(seed, 1), [&](std::size_t i, std::size_t f) {
        if (x.missing(i, f)) return 1.0;
        const double d = x.value(i, f) - params.mu[f];
        return kf[f] * std::exp(-d * d * inv_var);
    });
}

DataMatrix apply_missingness(const DataMatrix& x, const GaussianParams& params,
                             const MissingnessSpec& spec, std::uint64_t seed) {
    switch (spec.mechanism) {
        case Mechanism::mcar: return apply_mcar(x, spec.p_miss, seed);
        case Mechanism::mar_logistic: return apply_mar_logistic(x, spec, seed);
        case Mechanism::mnar_gsm: return apply_mnar_gsm(x, params, spec, seed);
    }
    fail(ErrorCode::invalid_argument, "unknown missingness mechanism");
}

KMeansResult kmeans_pp(const std::vector<std::vector<double>>& points, std::size_t k,
                       std::uint64_t seed, std::size_t restarts, std::size_t max_iter, double tol) {
    const std::size_t n = points.size();
    if (k == 0 || n < k) fail(ErrorCode::invalid_argument, "need at least k points");
    {
        std::size_t distinct = 1;
        for (std::size_t i = 1; i < n && distinct < k; ++i) {
            bool fresh = true;
            for (std::size_t j = 0; j < i && fresh; ++j) fresh = points[i] != points[j];
            distinct += fresh ? 1 : 0;
        }
        if (distinct < k) fail(ErrorCode::degenerate, "fewer distinct points than clusters");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (std::size_t r = 0; r < restarts; ++r) {
        std::vector<std::vector<double>> centers;
        centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
        std::vector<double> d2(n);
        while (centers.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double m = std::numeric_limits<double>::infinity();
                for (const auto& c : centers) m = std::min(m, squared_distance(points[i], c));
                d2[i] = m;
                total += m;
            }
            double target = unif(rng) * total;
            std::size_t pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                target -= d2[i];
                if (target < 0.0) { pick = i; break; }
            }
            while (d2[pick] <= 0.0) --pick;  // rounding fallback, never a duplicate
            centers.push_back(points[pick]);
        }

        std::vector<int> assign(n, 0);
        double inertia = 0.0;
        for (std::size_t it = 0; it < max_iter; ++it) {
            inertia = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double m = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    const double d = squared_distance(points[i], centers[c]);
                    if (d < m) m = d, assign[i] = static_cast<int>(c);
                }
                inertia += m;
            }
            std::vector<std::vector<double>> next(k, std::vector<double>(points[0].size(), 0.0));
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                auto& c = next[static_cast<std::size_t>(assign[i])];
                for (std::size_t j = 0; j < c.size(); ++j) c[j] += points[i][j];
                ++counts[static_cast<std::size_t>(assign[i])];
            }
            double shift = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) {
                    // Empty cluster: move it to the worst-served point.
                    std::size_t far = 0;
                    double worst = -1.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double d = squared_distance(points[i], centers[static_cast<std::size_t>(assign[i])]);
                        if (d > worst) worst = d, far = i;
                    }
                    next[c] = points[far];
                } else {
                    for (double& v : next[c]) v /= static_cast<double>(counts[c]);
                }
                shift = std::max(shift, squared_distance(next[c], centers[c]));
            }
            centers = std::move(next);
            if (shift <= tol * tol) break;
        }
        inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(points[i], centers[c]);
                if (d < m) m = d, assign[i] = static_cast<int>(c);
            }
            inertia += m;
        }
        if (inertia < best.inertia) best = {assign, centers, inertia};
    }
    return best;
}

std::vector<int> make_classification_labels(const DataMatrix& items, const DataMatrix& users,
                                            const std::vector<ItemUserPair>& pairs,
                                            std::uint64_t seed) {
    if (items.has_missing() || users.has_missing())
        fail(ErrorCode::invalid_argument, "label construction needs complete matrices");
    if (pairs.empty()) fail(ErrorCode::invalid_argument, "no pairs to label");
    std::vector<std::vector<double>> points;
    points.reserve(pairs.size());
    for (const auto& [item, user] : pairs) {
        if (item >= items.rows() || user >= users.rows())
            fail(ErrorCode::invalid_argument, "pair index out of range");
        std::vector<double> v(items.row(item).begin(), items.row(item).end());
        v.insert(v.end(), users.row(user).begin(), users.row(user).end());
        points.push_back(std::move(v));
    }
    KMeansResult km = kmeans_pp(points, 2, seed);
    std::vector<int> labels = km.assignment;
    if (labels[0] != 0)
        for (int& l : labels) l = 1 - l;
    return labels;
}

}  // namespace f3i
