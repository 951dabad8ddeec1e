/* C interface to the multiscale H-infinity / Kalman tree filtering library.
 *
 * All functions return an mshinf_status; MSHINF_OK means success. On any
 * failure the thread-local message queried by mshinf_last_error() describes
 * what went wrong. Objects are opaque handles owned by the caller and
 * released with the matching *_free function (NULL is ignored).
 */
#ifndef MSHINF_C_API_H
#define MSHINF_C_API_H

#include <stddef.h>
#include <stdint.h>

#if defined(__cplusplus)
extern "C" {
#endif

typedef enum mshinf_status {
  MSHINF_OK = 0,
  MSHINF_ERR_INVALID_ARGUMENT = 1,
  MSHINF_ERR_DIMENSION = 2,
  MSHINF_ERR_PARSE = 3,
  MSHINF_ERR_IO = 4,
  MSHINF_ERR_NUMERIC = 5,
  MSHINF_ERR_INFEASIBLE = 6,
  MSHINF_ERR_UNKNOWN = 7
} mshinf_status;

typedef enum mshinf_filter_kind {
  MSHINF_FILTER_PREDICTOR_HINF = 0,
  MSHINF_FILTER_CURRENT_HINF = 1,
  MSHINF_FILTER_KALMAN = 2
} mshinf_filter_kind;

typedef struct mshinf_model mshinf_model;
typedef struct mshinf_signal mshinf_signal;
typedef struct mshinf_report mshinf_report;

/* Library identification and error reporting. */
const char* mshinf_version(void);
const char* mshinf_status_name(mshinf_status status);
const char* mshinf_last_error(void);

/* Model construction. mshinf_model_load parses a model description file;
 * mshinf_model_uniform_scalar builds the scalar experiment model with
 * A = C = L = Q = 1, B = sigma_w, R = sigma_v2. */
mshinf_status mshinf_model_load(const char* path, mshinf_model** out);
mshinf_status mshinf_model_uniform_scalar(int depth, int arity, double sigma_w2,
                                          double sigma_v2, double gamma,
                                          double prior_mean, double prior_var,
                                          mshinf_model** out);
void mshinf_model_free(mshinf_model* model);

int mshinf_model_depth(const mshinf_model* model);
int mshinf_model_arity(const mshinf_model* model);
int mshinf_model_state_dim(const mshinf_model* model);
int64_t mshinf_model_node_count(const mshinf_model* model);
double mshinf_model_gamma(const mshinf_model* model);

/* Feasibility of the robust recursion at a given attenuation level. On
 * success *feasible is 1 or 0; when 0, *fail_level / *fail_index name the
 * first failing node (any out pointer may be NULL). */
mshinf_status mshinf_sweep_feasible(const mshinf_model* model, double gamma,
                                    int* feasible, int* fail_level,
                                    int64_t* fail_index);

/* Largest feasible attenuation by bisection; requires gamma_lo feasible and
 * gamma_hi infeasible. */
mshinf_status mshinf_max_gamma(const mshinf_model* model, double gamma_lo,
                               double gamma_hi, double tol, double* out);

/* Signal generation. Observations cover every node; use
 * mshinf_signal_remove_stage to blank recorded stages afterwards. */
mshinf_status mshinf_simulate(const mshinf_model* model,
                              const double* root_state, size_t root_len,
                              double w_var, double v_var, uint64_t seed,
                              mshinf_signal** out);
mshinf_status mshinf_adversarial(const mshinf_model* model,
                                 double power_budget, uint64_t seed,
                                 mshinf_signal** out);
mshinf_status mshinf_signal_remove_stage(mshinf_signal* signal, int level);
void mshinf_signal_free(mshinf_signal* signal);

/* Copies the latent state of one node into out[0..n). */
mshinf_status mshinf_signal_state(const mshinf_signal* signal, int level,
                                  int64_t index, double* out, size_t out_len);

/* Filtering. */
mshinf_status mshinf_run_filter(const mshinf_model* model,
                                const mshinf_signal* signal,
                                mshinf_filter_kind kind, mshinf_report** out);
void mshinf_report_free(mshinf_report* report);

mshinf_status mshinf_report_estimate(const mshinf_report* report, int level,
                                     int64_t index, double* out,
                                     size_t out_len);
/* Mean trace of the covariance per level; out must hold depth+1 entries. */
mshinf_status mshinf_report_cov_trace(const mshinf_report* report, double* out,
                                      size_t out_len);

/* Evaluation. */
mshinf_status mshinf_estimation_cost(const mshinf_model* model,
                                     const mshinf_signal* signal,
                                     const mshinf_report* report, double* out);
mshinf_status mshinf_game_objective(const mshinf_model* model,
                                    const mshinf_signal* signal,
                                    const mshinf_report* report, double gamma,
                                    double* out);

/* Runs a configured experiment scenario; any of the override arguments may
 * be NULL (seed_override < 0 means "keep the configured seed"). The expected
 * scenario, when given, must match the config file. */
mshinf_status mshinf_run_experiment(const char* config_path,
                                    const char* expected_scenario,
                                    const char* output_dir_override,
                                    int64_t seed_override,
                                    const char* filter_override,
                                    const char* gamma_override);

#if defined(__cplusplus)
}
#endif

#endif /* MSHINF_C_API_H */
