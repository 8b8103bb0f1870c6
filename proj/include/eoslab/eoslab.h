/* eoslab - C interface to the edge-of-stability laboratory.
 *
 * The library studies gradient descent with weight decay on scale-invariant
 * losses: loss oracles for three problem families, RMSprop-family schedulers,
 * spectral tools (Lanczos / spherical sharpness), minimizer-manifold
 * machinery, a drift-process simulator, and a seeded experiment harness that
 * emits CSV traces and JSON reports.
 *
 * All functions return eoslab_status; on failure a human-readable message is
 * available from eoslab_last_error() (thread-local). Handles are opaque and
 * must be released with eoslab_problem_destroy. Problem handles are immutable
 * after creation and safe to share across threads.
 */

#ifndef EOSLAB_H
#define EOSLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EOSLAB_API __declspec(dllexport)
#else
#define EOSLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eoslab_status {
  EOSLAB_OK = 0,
  EOSLAB_ERR_INVALID_ARGUMENT = 1, /* bad sizes, hyperparameters, config */
  EOSLAB_ERR_DOMAIN = 2,           /* degenerate evaluation point */
  EOSLAB_ERR_NO_CONVERGENCE = 3,   /* iterative solver gave up */
  EOSLAB_ERR_DIVERGED = 4,         /* run produced non-finite values */
  EOSLAB_ERR_IO = 5,
  EOSLAB_ERR_INTERNAL = 6
} eoslab_status;

typedef struct eoslab_problem eoslab_problem;

/* Library version string, e.g. "0.1.0". */
EOSLAB_API const char* eoslab_version(void);

/* Message for the most recent failure on this thread ("" if none). */
EOSLAB_API const char* eoslab_last_error(void);

/* ----- problem construction (seeded, deterministic) --------------------- */

/* Linear regression with batch normalization: n_train points in dim
 * dimensions with exactly linear targets, plus an n_test held-out set. */
EOSLAB_API eoslab_status eoslab_linreg_create(uint64_t seed, int dim,
                                              int n_train, int n_test,
                                              eoslab_problem** out);

/* Matrix completion with BN: rank-`rank` d x d ground truth, n_obs observed
 * entries. Parameter dimension is 2*d*d (row-major U then V). */
EOSLAB_API eoslab_status eoslab_matcom_create(uint64_t seed, int d, int rank,
                                              int n_obs, eoslab_problem** out);

/* The 3-D warm-up loss behind a random orthogonal transform. */
EOSLAB_API eoslab_status eoslab_example3d_create(uint64_t seed,
                                                 eoslab_problem** out);

EOSLAB_API void eoslab_problem_destroy(eoslab_problem* p);

EOSLAB_API eoslab_status eoslab_problem_dim(const eoslab_problem* p, int* out);

/* Canonical starting parameters for the problem's default experiment; `len`
 * must equal the problem dimension. */
EOSLAB_API eoslab_status eoslab_initial_point(const eoslab_problem* p,
                                              uint64_t seed, double* w,
                                              size_t len);

/* ----- oracle evaluation over flat parameter vectors -------------------- */

EOSLAB_API eoslab_status eoslab_value(const eoslab_problem* p, const double* w,
                                      size_t len, double* out);

/* Held-out metric; EOSLAB_ERR_INVALID_ARGUMENT if the problem has none. */
EOSLAB_API eoslab_status eoslab_test_value(const eoslab_problem* p,
                                           const double* w, size_t len,
                                           double* out);

EOSLAB_API eoslab_status eoslab_grad(const eoslab_problem* p, const double* w,
                                     size_t len, double* out_grad);

/* Hessian-vector product H(w) v. */
EOSLAB_API eoslab_status eoslab_hvp(const eoslab_problem* p, const double* w,
                                    const double* v, size_t len,
                                    double* out_hv);

/* lambda_1 of the Hessian at w/|w| (Lanczos over the HVP oracle; seeded,
 * deterministic). */
EOSLAB_API eoslab_status eoslab_spherical_sharpness(const eoslab_problem* p,
                                                    const double* w, size_t len,
                                                    uint64_t seed, double tol,
                                                    double* out);

/* Exact solution of min |w|^2 s.t. w'x_i + b = y_i (linreg problems only).
 * `w_star` has length dim. */
EOSLAB_API eoslab_status eoslab_min_norm_solution(const eoslab_problem* p,
                                                  double* w_star, size_t len,
                                                  double* b_star);

/* Generalization-gap bound from sharpness; see the library documentation for
 * the admissible sigma range. */
EOSLAB_API eoslab_status eoslab_pac_bayes_bound(double lambda1, double m3,
                                                double ell_max, long long n,
                                                int dim, double sigma,
                                                double delta, double* out);

/* ----- experiments and acceptance checks -------------------------------- */

/* Runs an experiment described by a JSON config (same schema the CLI
 * produces; see README). Writes the trace and report files when the config
 * names an output path, and returns the report JSON. Free the returned string
 * with eoslab_string_free. */
EOSLAB_API eoslab_status eoslab_run_experiment(const char* config_json,
                                               char** report_json);

/* Runs the acceptance suite. `ids` may list a subset of check ids (NULL/0 for
 * all); verbose != 0 prints one line per check to stdout. The report JSON has
 * one entry per check with measured values; *all_passed is set to 1/0. */
EOSLAB_API eoslab_status eoslab_run_checks(const int* ids, size_t n_ids,
                                           int verbose, int* all_passed,
                                           char** report_json);

EOSLAB_API void eoslab_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* EOSLAB_H */
