/* C interface to the f3i imputation library.
 *
 * All objects are opaque handles released with their *_free function.
 * Every call returns an f3i_status; on failure f3i_last_error() describes
 * the problem for the calling thread. Missing cells are passed as NaN.
 * Matrices are row-major.
 */
#ifndef F3I_F3I_H
#define F3I_F3I_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define F3I_API __declspec(dllexport)
#else
#  define F3I_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    F3I_OK = 0,
    F3I_INVALID_ARGUMENT = 1,
    F3I_NUMERICAL = 2,
    F3I_GENERATION_FAILURE = 3,
    F3I_DEGENERATE = 4,
    F3I_UNDEFINED_METRIC = 5,
    F3I_IO = 6,
    F3I_INTERNAL = 7
} f3i_status;

typedef enum { F3I_MCAR = 0, F3I_MAR_LOGISTIC = 1, F3I_MNAR_GSM = 2 } f3i_mechanism;
typedef enum { F3I_STOP_BUDGET = 0, F3I_STOP_EARLY = 1 } f3i_stop_reason;
typedef enum { F3I_WEIGHT_UNIFORM = 0, F3I_WEIGHT_DISTANCE = 1 } f3i_weighting;
typedef enum { F3I_LOSS_POSITIVE = 0, F3I_LOSS_BCE = 1 } f3i_loss_variant;
typedef enum { F3I_TRIAL_MSE = 0, F3I_TRIAL_REGRET = 1, F3I_TRIAL_JOINT = 2 } f3i_trial_kind;

typedef struct f3i_matrix f3i_matrix;
typedef struct f3i_run f3i_run;
typedef struct f3i_joint f3i_joint;

typedef struct {
    size_t n_neighbors;
    size_t max_iter;
    double eta;
    double norm_cap;
    double beta;
    int normalize;
    double bandwidth; /* <= 0 selects the smallest concavity-safe value */
    uint64_t seed;
} f3i_config;

typedef struct {
    f3i_mechanism mechanism;
    double p_miss;
    double f_obs_fraction;
    double kf_low;
    double kf_high;
} f3i_missingness;

typedef struct {
    double beta;
    size_t epochs;
    double classifier_lr;
    f3i_loss_variant loss_variant;
    double train_fraction;
    double validation_fraction;
} f3i_joint_config;

typedef struct {
    size_t n;
    size_t f;
    double sigma;
    f3i_missingness missingness;
    f3i_config config;
    f3i_joint_config joint;
} f3i_trial_setup;

typedef struct {
    uint64_t seed;
    double measured;
    double bound;
    int satisfied;
    size_t t_final;
    f3i_stop_reason stop_reason;
    double bandwidth;
    double sigma_miss;
    double c_miss;
    double mse;
    double missing_fraction;
    int oracle_converged;
} f3i_trial_result;

F3I_API const char* f3i_version(void);
F3I_API const char* f3i_last_error(void);
F3I_API const char* f3i_status_string(f3i_status status);
/* Replace the warning sink (NULL restores stderr). */
F3I_API void f3i_set_warning_handler(void (*handler)(const char* message));

F3I_API f3i_config f3i_config_default(void);
F3I_API f3i_missingness f3i_missingness_default(void);
F3I_API f3i_joint_config f3i_joint_config_default(void);
F3I_API f3i_trial_setup f3i_trial_setup_default(void);

/* Matrices. NaN cells become missing. */
F3I_API f3i_status f3i_matrix_create(size_t rows, size_t cols, const double* values, f3i_matrix** out);
F3I_API void f3i_matrix_free(f3i_matrix* m);
F3I_API size_t f3i_matrix_rows(const f3i_matrix* m);
F3I_API size_t f3i_matrix_cols(const f3i_matrix* m);
/* Copies rows*cols values; missing cells read as NaN unless imputed. */
F3I_API f3i_status f3i_matrix_values(const f3i_matrix* m, double* out);
F3I_API f3i_status f3i_matrix_mask(const f3i_matrix* m, uint8_t* out);
F3I_API size_t f3i_matrix_missing_count(const f3i_matrix* m);

/* Synthetic data: complete Gaussian matrix plus its masked copy. mu_out holds f means. */
F3I_API f3i_status f3i_generate(size_t n, size_t f, double sigma, const f3i_missingness* spec, uint64_t seed,
                                f3i_matrix** complete, f3i_matrix** masked, double* mu_out);

/* Baseline imputers. */
F3I_API f3i_status f3i_impute_mean(const f3i_matrix* x, f3i_matrix** out);
F3I_API f3i_status f3i_impute_knn(const f3i_matrix* x, size_t k, f3i_weighting weighting, f3i_matrix** out);

/* Iterative improvement run. */
F3I_API f3i_status f3i_run_create(const f3i_matrix* x, const f3i_config* cfg, f3i_run** out);
F3I_API void f3i_run_free(f3i_run* r);
/* Borrowed pointer valid while the run lives. */
F3I_API const f3i_matrix* f3i_run_imputed(const f3i_run* r);
F3I_API const f3i_matrix* f3i_run_initial(const f3i_run* r);
F3I_API size_t f3i_run_final_t(const f3i_run* r);
F3I_API size_t f3i_run_k(const f3i_run* r);
F3I_API f3i_stop_reason f3i_run_stop_reason(const f3i_run* r);
F3I_API double f3i_run_bandwidth(const f3i_run* r);
/* final_t x k, row per iteration. */
F3I_API f3i_status f3i_run_alphas(const f3i_run* r, double* out);
F3I_API f3i_status f3i_run_gradients(const f3i_run* r, double* out);
/* final_t values of the objective at each iterate. */
F3I_API f3i_status f3i_run_objective_values(const f3i_run* r, double* out);
/* One row at a time against a trained run; writes cols values. */
F3I_API f3i_status f3i_run_impute_row(const f3i_run* r, const double* row, double* out);

/* Metrics. */
F3I_API f3i_status f3i_mse(const f3i_matrix* imputed, const f3i_matrix* truth, double* out);
F3I_API f3i_status f3i_masked_mse(const f3i_matrix* imputed, const f3i_matrix* truth, const f3i_matrix* masked,
                                  double* out);
F3I_API f3i_status f3i_auc(const double* scores, const int* labels, size_t n, double* out);

/* Concentration constant with delta = 1/n^3. */
F3I_API f3i_status f3i_c_miss(double sigma, size_t k, size_t n, size_t f, double* out);
F3I_API f3i_status f3i_solve_bandwidth(double norm_cap, size_t k, double eta, size_t n, double* out);

/* One seeded bound-validation run. */
F3I_API f3i_status f3i_validate_trial(f3i_trial_kind kind, const f3i_trial_setup* setup, uint64_t seed,
                                      f3i_trial_result* out);

/* Joint imputation + sigmoid classifier with a seeded train/validation/test split.
 * Labels are 0/1, one per row. */
F3I_API f3i_status f3i_joint_train(const f3i_matrix* x, const int* labels, const f3i_config* cfg,
                                   const f3i_joint_config* jcfg, f3i_joint** out);
F3I_API void f3i_joint_free(f3i_joint* j);
F3I_API const f3i_matrix* f3i_joint_imputed(const f3i_joint* j);
F3I_API size_t f3i_joint_dim(const f3i_joint* j);
/* dim weights then the bias is returned separately. */
F3I_API f3i_status f3i_joint_weights(const f3i_joint* j, double* omega, double* bias);
F3I_API double f3i_joint_test_auc(const f3i_joint* j);
F3I_API size_t f3i_joint_final_t(const f3i_joint* j);
F3I_API size_t f3i_joint_split_size(const f3i_joint* j, int which); /* 0 train, 1 validation, 2 test */
F3I_API f3i_status f3i_joint_split_rows(const f3i_joint* j, int which, size_t* out);

#ifdef __cplusplus
}
#endif

#endif
