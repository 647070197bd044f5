#include "f3i/f3i.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "f3i/eval.hpp"
#include "f3i/experiments.hpp"
#include "f3i/imputer.hpp"
#include "f3i/joint.hpp"
#include "f3i/objective.hpp"
#include "f3i/synthgen.hpp"

struct f3i_matrix {
    f3i::DataMatrix m;
};

struct f3i_run {
    f3i::F3IResult result;
    f3i_matrix imputed;
    f3i_matrix initial;
};

struct f3i_joint {
    f3i::JointResult result;
    f3i::Split split;
    f3i_matrix imputed;
    double test_auc = -1.0;
};

namespace {

thread_local std::string last_error;

f3i_status to_status(f3i::ErrorCode c) {
    switch (c) {
        case f3i::ErrorCode::invalid_argument: return F3I_INVALID_ARGUMENT;
        case f3i::ErrorCode::numerical: return F3I_NUMERICAL;
        case f3i::ErrorCode::generation_failure: return F3I_GENERATION_FAILURE;
        case f3i::ErrorCode::degenerate: return F3I_DEGENERATE;
        case f3i::ErrorCode::undefined_metric: return F3I_UNDEFINED_METRIC;
        case f3i::ErrorCode::io: return F3I_IO;
    }
    return F3I_INTERNAL;
}

// Runs body and turns exceptions into status codes.
template <class Body>
f3i_status guarded(Body&& body) {
    try {
        body();
        last_error.clear();
        return F3I_OK;
    } catch (const f3i::Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return F3I_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return F3I_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) f3i::fail(f3i::ErrorCode::invalid_argument, std::string(what) + " must not be null");
}

f3i::Config to_config(const f3i_config* c) {
    f3i::Config cfg;
    if (!c) return cfg;
    cfg.n_neighbors = c->n_neighbors;
    cfg.max_iter = c->max_iter;
    cfg.eta = c->eta;
    cfg.norm_cap = c->norm_cap;
    cfg.beta = c->beta;
    cfg.normalize = c->normalize != 0;
    if (c->bandwidth > 0.0) cfg.bandwidth = c->bandwidth;
    cfg.seed = c->seed;
    return cfg;
}

f3i::MissingnessSpec to_spec(const f3i_missingness* s) {
    f3i::MissingnessSpec spec;
    if (!s) return spec;
    switch (s->mechanism) {
        case F3I_MCAR: spec.mechanism = f3i::Mechanism::mcar; break;
        case F3I_MAR_LOGISTIC: spec.mechanism = f3i::Mechanism::mar_logistic; break;
        case F3I_MNAR_GSM: spec.mechanism = f3i::Mechanism::mnar_gsm; break;
        default: f3i::fail(f3i::ErrorCode::invalid_argument, "unknown missingness mechanism");
    }
    spec.p_miss = s->p_miss;
    spec.f_obs_fraction = s->f_obs_fraction;
    spec.kf_low = s->kf_low;
    spec.kf_high = s->kf_high;
    return spec;
}

f3i::JointConfig to_joint(const f3i_joint_config* j) {
    f3i::JointConfig jc;
    if (!j) return jc;
    jc.beta = j->beta;
    jc.epochs = j->epochs;
    jc.classifier_lr = j->classifier_lr;
    if (j->loss_variant != F3I_LOSS_POSITIVE && j->loss_variant != F3I_LOSS_BCE)
        f3i::fail(f3i::ErrorCode::invalid_argument, "unknown loss variant");
    jc.loss_variant = j->loss_variant == F3I_LOSS_POSITIVE ? f3i::LossVariant::positive_logloss
                                                       : f3i::LossVariant::full_bce;
    return jc;
}

void copy_rows(const std::vector<std::vector<double>>& rows, double* out) {
    for (const auto& r : rows) out = std::copy(r.begin(), r.end(), out);
}

const std::vector<std::size_t>& split_part(const f3i::Split& s, int which) {
    switch (which) {
        case 0: return s.train;
        case 1: return s.validation;
        case 2: return s.test;
    }
    f3i::fail(f3i::ErrorCode::invalid_argument, "split index must be 0, 1 or 2");
}

}  // namespace

extern "C" {

const char* f3i_version(void) { return "1.0.0"; }

const char* f3i_last_error(void) { return last_error.c_str(); }

const char* f3i_status_string(f3i_status status) {
    switch (status) {
        case F3I_OK: return "ok";
        case F3I_INVALID_ARGUMENT: return "invalid argument";
        case F3I_NUMERICAL: return "numerical error";
        case F3I_GENERATION_FAILURE: return "generation failure";
        case F3I_DEGENERATE: return "degenerate input";
        case F3I_UNDEFINED_METRIC: return "undefined metric";
        case F3I_IO: return "i/o error";
        case F3I_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void f3i_set_warning_handler(void (*handler)(const char*)) { f3i::set_warning_sink(handler); }

f3i_config f3i_config_default(void) {
    const f3i::Config c;
    return {c.n_neighbors, c.max_iter, c.eta, c.norm_cap, c.beta, c.normalize ? 1 : 0, 0.0, c.seed};
}

f3i_missingness f3i_missingness_default(void) {
    const f3i::MissingnessSpec s;
    return {F3I_MCAR, s.p_miss, s.f_obs_fraction, s.kf_low, s.kf_high};
}

f3i_joint_config f3i_joint_config_default(void) {
    const f3i::JointConfig j;
    return {j.beta, j.epochs, j.classifier_lr, F3I_LOSS_BCE, 0.7, 0.2};
}

f3i_trial_setup f3i_trial_setup_default(void) {
    const f3i::TrialSetup t;
    return {t.n, t.f, t.sigma, f3i_missingness_default(), f3i_config_default(), f3i_joint_config_default()};
}

f3i_status f3i_matrix_create(size_t rows, size_t cols, const double* values, f3i_matrix** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        if (rows * cols > 0) require(values, "values");
        std::vector<double> v(values, values + rows * cols);
        *out = new f3i_matrix{f3i::DataMatrix::from_nan(rows, cols, std::move(v))};
    });
}

void f3i_matrix_free(f3i_matrix* m) { delete m; }

size_t f3i_matrix_rows(const f3i_matrix* m) { return m ? m->m.rows() : 0; }

size_t f3i_matrix_cols(const f3i_matrix* m) { return m ? m->m.cols() : 0; }

f3i_status f3i_matrix_values(const f3i_matrix* m, double* out) {
    return guarded([&] {
        require(m, "matrix");
        require(out, "out");
        std::copy(m->m.values().begin(), m->m.values().end(), out);
    });
}

f3i_status f3i_matrix_mask(const f3i_matrix* m, uint8_t* out) {
    return guarded([&] {
        require(m, "matrix");
        require(out, "out");
        std::copy(m->m.mask().begin(), m->m.mask().end(), out);
    });
}

size_t f3i_matrix_missing_count(const f3i_matrix* m) { return m ? m->m.missing_count() : 0; }

f3i_status f3i_generate(size_t n, size_t f, double sigma, const f3i_missingness* spec, uint64_t seed,
                        f3i_matrix** complete, f3i_matrix** masked, double* mu_out) {
    return guarded([&] {
        require(complete, "complete");
        require(masked, "masked");
        *complete = nullptr;
        *masked = nullptr;
        f3i::TrialSetup setup;
        setup.n = n;
        setup.f = f;
        setup.sigma = sigma;
        setup.missingness = to_spec(spec);
        setup.missingness.validate();
        f3i::SyntheticData d = f3i::make_synthetic(setup, seed);
        if (mu_out) std::copy(d.params.mu.begin(), d.params.mu.end(), mu_out);
        auto c = std::make_unique<f3i_matrix>(f3i_matrix{std::move(d.truth)});
        auto m = std::make_unique<f3i_matrix>(f3i_matrix{std::move(d.masked)});
        *complete = c.release();
        *masked = m.release();
    });
}

f3i_status f3i_impute_mean(const f3i_matrix* x, f3i_matrix** out) {
    return guarded([&] {
        require(x, "matrix");
        require(out, "out");
        *out = new f3i_matrix{f3i::mean_impute(x->m)};
    });
}

f3i_status f3i_impute_knn(const f3i_matrix* x, size_t k, f3i_weighting weighting, f3i_matrix** out) {
    return guarded([&] {
        require(x, "matrix");
        require(out, "out");
        if (weighting != F3I_WEIGHT_UNIFORM && weighting != F3I_WEIGHT_DISTANCE)
            f3i::fail(f3i::ErrorCode::invalid_argument, "unknown weighting");
        const auto w = weighting == F3I_WEIGHT_UNIFORM ? f3i::Weighting::uniform : f3i::Weighting::inverse_distance;
        *out = new f3i_matrix{f3i::knn_impute(x->m, k, w)};
    });
}

f3i_status f3i_run_create(const f3i_matrix* x, const f3i_config* cfg, f3i_run** out) {
    return guarded([&] {
        require(x, "matrix");
        require(out, "out");
        *out = nullptr;
        auto r = std::make_unique<f3i_run>();
        r->result = f3i::f3i_run(x->m, to_config(cfg));
        r->imputed.m = r->result.imputed;
        r->initial.m = r->result.normalized
                           ? f3i::denormalize_rows(r->result.initial, r->result.scales)
                           : r->result.initial;
        *out = r.release();
    });
}

void f3i_run_free(f3i_run* r) { delete r; }

const f3i_matrix* f3i_run_imputed(const f3i_run* r) { return r ? &r->imputed : nullptr; }

const f3i_matrix* f3i_run_initial(const f3i_run* r) { return r ? &r->initial : nullptr; }

size_t f3i_run_final_t(const f3i_run* r) { return r ? r->result.trace.final_t : 0; }

size_t f3i_run_k(const f3i_run* r) { return r ? r->result.k : 0; }

f3i_stop_reason f3i_run_stop_reason(const f3i_run* r) {
    return r && r->result.trace.stop_reason == f3i::StopReason::early_stop ? F3I_STOP_EARLY : F3I_STOP_BUDGET;
}

double f3i_run_bandwidth(const f3i_run* r) { return r ? r->result.trace.bandwidth : 0.0; }

f3i_status f3i_run_alphas(const f3i_run* r, double* out) {
    return guarded([&] {
        require(r, "run");
        require(out, "out");
        copy_rows(r->result.trace.alphas, out);
    });
}

f3i_status f3i_run_gradients(const f3i_run* r, double* out) {
    return guarded([&] {
        require(r, "run");
        require(out, "out");
        copy_rows(r->result.trace.gradients, out);
    });
}

f3i_status f3i_run_objective_values(const f3i_run* r, double* out) {
    return guarded([&] {
        require(r, "run");
        require(out, "out");
        std::copy(r->result.trace.g_values.begin(), r->result.trace.g_values.end(), out);
    });
}

f3i_status f3i_run_impute_row(const f3i_run* r, const double* row, double* out) {
    return guarded([&] {
        require(r, "run");
        require(row, "row");
        require(out, "out");
        const std::size_t f = r->result.imputed.cols();
        std::vector<double> v(row, row + f);
        std::vector<std::uint8_t> mask(f);
        for (std::size_t q = 0; q < f; ++q) mask[q] = std::isnan(v[q]) ? 1 : 0;
        const auto filled = f3i::out_of_sample_impute(r->result, v, mask);
        std::copy(filled.begin(), filled.end(), out);
    });
}

f3i_status f3i_mse(const f3i_matrix* imputed, const f3i_matrix* truth, double* out) {
    return guarded([&] {
        require(imputed, "imputed");
        require(truth, "truth");
        require(out, "out");
        *out = f3i::mse(imputed->m, truth->m);
    });
}

f3i_status f3i_masked_mse(const f3i_matrix* imputed, const f3i_matrix* truth, const f3i_matrix* masked,
                          double* out) {
    return guarded([&] {
        require(imputed, "imputed");
        require(truth, "truth");
        require(masked, "masked");
        require(out, "out");
        *out = f3i::masked_mse(imputed->m, truth->m, masked->m);
    });
}

f3i_status f3i_auc(const double* scores, const int* labels, size_t n, double* out) {
    return guarded([&] {
        require(out, "out");
        if (n > 0) {
            require(scores, "scores");
            require(labels, "labels");
        }
        *out = f3i::auc({scores, n}, {labels, n});
    });
}

f3i_status f3i_c_miss(double sigma, size_t k, size_t n, size_t f, double* out) {
    return guarded([&] {
        require(out, "out");
        if (n < 2) f3i::fail(f3i::ErrorCode::invalid_argument, "n must be at least 2");
        const double nn = static_cast<double>(n);
        *out = f3i::c_miss(f3i::sigma_miss(sigma, k).sigma_miss, f, 1.0 / (nn * nn * nn));
    });
}

f3i_status f3i_solve_bandwidth(double norm_cap, size_t k, double eta, size_t n, double* out) {
    return guarded([&] {
        require(out, "out");
        *out = f3i::solve_bandwidth(norm_cap, k, eta, n);
    });
}

f3i_status f3i_validate_trial(f3i_trial_kind kind, const f3i_trial_setup* setup, uint64_t seed,
                              f3i_trial_result* out) {
    return guarded([&] {
        require(setup, "setup");
        require(out, "out");
        f3i::TrialSetup s;
        s.n = setup->n;
        s.f = setup->f;
        s.sigma = setup->sigma;
        s.missingness = to_spec(&setup->missingness);
        s.config = to_config(&setup->config);
        s.joint = to_joint(&setup->joint);
        f3i::TrialResult r;
        switch (kind) {
            case F3I_TRIAL_MSE: r = f3i::mse_bound_trial(s, seed); break;
            case F3I_TRIAL_REGRET: r = f3i::regret_bound_trial(s, seed); break;
            case F3I_TRIAL_JOINT: r = f3i::joint_bound_trial(s, seed); break;
            default: f3i::fail(f3i::ErrorCode::invalid_argument, "unknown trial kind");
        }
        out->seed = r.seed;
        out->measured = r.measured;
        out->bound = r.bound;
        out->satisfied = r.satisfied ? 1 : 0;
        out->t_final = r.t_final;
        out->stop_reason = r.stop_reason == "early_stop" ? F3I_STOP_EARLY : F3I_STOP_BUDGET;
        out->bandwidth = r.bandwidth;
        out->sigma_miss = r.sigma_miss;
        out->c_miss = r.c_miss;
        out->mse = r.mse;
        out->missing_fraction = r.missing_fraction;
        out->oracle_converged = r.oracle_converged ? 1 : 0;
    });
}

f3i_status f3i_joint_train(const f3i_matrix* x, const int* labels, const f3i_config* cfg,
                           const f3i_joint_config* jcfg, f3i_joint** out) {
    return guarded([&] {
        require(x, "matrix");
        require(labels, "labels");
        require(out, "out");
        *out = nullptr;
        const f3i::Config c = to_config(cfg);
        const f3i::JointConfig jc = to_joint(jcfg);
        const double train_frac = jcfg ? jcfg->train_fraction : 0.7;
        const double val_frac = jcfg ? jcfg->validation_fraction : 0.2;
        const std::size_t n = x->m.rows();
        std::vector<int> y(labels, labels + n);

        auto j = std::make_unique<f3i_joint>();
        j->split = f3i::split_rows(n, train_frac, val_frac, f3i::derive_seed(c.seed, 23));
        // No model selection happens, so validation rows join the fit.
        std::vector<std::size_t> fit = j->split.train;
        fit.insert(fit.end(), j->split.validation.begin(), j->split.validation.end());
        std::sort(fit.begin(), fit.end());
        j->result = f3i::pcgrad_f3i_run(x->m, y, fit, j->split.test, c, jc);
        j->imputed.m = j->result.last_run.imputed;
        j->test_auc = j->result.epochs.back().eval_auc;
        *out = j.release();
    });
}

void f3i_joint_free(f3i_joint* j) { delete j; }

const f3i_matrix* f3i_joint_imputed(const f3i_joint* j) { return j ? &j->imputed : nullptr; }

size_t f3i_joint_dim(const f3i_joint* j) { return j ? j->result.classifier.omega.size() : 0; }

f3i_status f3i_joint_weights(const f3i_joint* j, double* omega, double* bias) {
    return guarded([&] {
        require(j, "joint");
        require(omega, "omega");
        std::copy(j->result.classifier.omega.begin(), j->result.classifier.omega.end(), omega);
        if (bias) *bias = j->result.classifier.bias;
    });
}

double f3i_joint_test_auc(const f3i_joint* j) { return j ? j->test_auc : -1.0; }

size_t f3i_joint_final_t(const f3i_joint* j) { return j ? j->result.last_run.trace.final_t : 0; }

size_t f3i_joint_split_size(const f3i_joint* j, int which) {
    if (!j || which < 0 || which > 2) return 0;
    return split_part(j->split, which).size();
}

f3i_status f3i_joint_split_rows(const f3i_joint* j, int which, size_t* out) {
    return guarded([&] {
        require(j, "joint");
        require(out, "out");
        const auto& rows = split_part(j->split, which);
        std::copy(rows.begin(), rows.end(), out);
    });
}

}  // extern "C"
