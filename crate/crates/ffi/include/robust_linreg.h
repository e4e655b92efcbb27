#ifndef ROBUST_LINREG_H
#define ROBUST_LINREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of every call.
 */
typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_PARSE = 3,
  RL_STATUS_IO = 4,
  RL_STATUS_DIMENSION = 5,
  RL_STATUS_UNSUPPORTED = 6,
  RL_STATUS_DEGENERATE = 7,
  /**
   * The solver hit its iteration cap; outputs are still written.
   */
  RL_STATUS_NOT_CONVERGED = 8,
  RL_STATUS_PANIC = 9,
} RlStatus;

/**
 * Base norms for the sliced distance.
 */
typedef enum RlNorm {
  RL_NORM_L1 = 0,
  RL_NORM_L2 = 1,
  RL_NORM_LINF = 2,
} RlNorm;

/**
 * A dataset of `n` rows, `d` covariates and one outcome.
 */
typedef struct RlDataset RlDataset;

/**
 * A penalty function.
 */
typedef struct RlPenalty RlPenalty;

/**
 * Scalar diagnostics of a solve.
 */
typedef struct RlSolveInfo {
  double objective_value;
  double kkt_residual;
  size_t iterations;
  bool converged;
} RlSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, excluding
 * the terminator; 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be NULL or valid for `len` writes.
 */
size_t rl_last_error_message(char *buf, size_t len);

/**
 * Builds a dataset from row-major `x` (`n * d` values) and `y` (`n` values).
 *
 * # Safety
 * `x` and `y` must be valid for the stated lengths; `out` must be writable.
 */
enum RlStatus rl_dataset_new(const double *x,
                             size_t n,
                             size_t d,
                             const double *y,
                             struct RlDataset **out_ds);

/**
 * Loads a headed CSV file; `outcome` names the outcome column.
 *
 * # Safety
 * `path` and `outcome` must be NUL-terminated strings; `out` must be writable.
 */
enum RlStatus rl_dataset_load_csv(const char *path, const char *outcome, struct RlDataset **out_ds);

/**
 * # Safety
 * `ds` must be NULL or a handle from this library, not yet freed.
 */
void rl_dataset_free(struct RlDataset *ds);

/**
 * Writes the row and covariate counts.
 *
 * # Safety
 * `ds` must be a live handle; `n` and `d` must be writable.
 */
enum RlStatus rl_dataset_shape(const struct RlDataset *ds, size_t *n, size_t *d);

/**
 * Copies the row-major covariates (`n * d` values) and the outcome (`n`
 * values). Either buffer may be NULL to skip it.
 *
 * # Safety
 * Non-NULL buffers must be valid for the stated lengths.
 */
enum RlStatus rl_dataset_copy(const struct RlDataset *ds,
                              double *x,
                              size_t x_len,
                              double *y,
                              size_t y_len);

/**
 * # Safety
 * `out` must be writable.
 */
enum RlStatus rl_penalty_l1(struct RlPenalty **out_pen);

/**
 * The `l_p` norm, `p >= 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RlStatus rl_penalty_lp(double p, struct RlPenalty **out_pen);

/**
 * Sorted-l1 penalty with non-increasing, nonnegative weights.
 *
 * # Safety
 * `lambda` must be valid for `len` reads; `out` must be writable.
 */
enum RlStatus rl_penalty_slope(const double *lambda, size_t len, struct RlPenalty **out_pen);

/**
 * # Safety
 * `pen` must be NULL or a handle from this library, not yet freed.
 */
void rl_penalty_free(struct RlPenalty *pen);

/**
 * Evaluates the penalty at `beta`.
 *
 * # Safety
 * `beta` must be valid for `len` reads; `value` must be writable.
 */
enum RlStatus rl_penalty_eval(const struct RlPenalty *pen,
                              const double *beta,
                              size_t len,
                              double *value);

/**
 * Minimizes `rn_r(beta) + delta rho(beta)`. `beta_out` receives `d` values.
 * `max_iter = 0` or `kkt_tol <= 0` select the defaults. Returns
 * `RL_STATUS_NOT_CONVERGED` with outputs written when the cap is hit.
 *
 * # Safety
 * Handles must be live; `beta_out` must be valid for `beta_len` writes;
 * `info` may be NULL.
 */
enum RlStatus rl_solve(const struct RlDataset *ds,
                       const struct RlPenalty *pen,
                       double r,
                       double sigma,
                       double delta,
                       size_t max_iter,
                       double kkt_tol,
                       double *beta_out,
                       size_t beta_len,
                       struct RlSolveInfo *info);

/**
 * The worst-case perturbation of `ds` at `beta` as a new dataset.
 *
 * # Safety
 * Handles must be live; `beta` valid for `beta_len` reads; `out` writable.
 */
enum RlStatus rl_worst_case(const struct RlDataset *ds,
                            const struct RlPenalty *pen,
                            double r,
                            double sigma,
                            double delta,
                            const double *beta,
                            size_t beta_len,
                            struct RlDataset **out_ds);

/**
 * Sampled max-sliced `W_r` between two datasets of equal dimension, over the
 * unit sphere of `norm`. `direction` (may be NULL) receives `d + 1` values.
 *
 * # Safety
 * Handles must be live; `value` writable; `direction` NULL or valid for `direction_len` writes.
 */
enum RlStatus rl_msw(const struct RlDataset *p,
                     const struct RlDataset *q,
                     double r,
                     enum RlNorm norm,
                     uint64_t seed,
                     double *value,
                     double *direction,
                     size_t direction_len);

/**
 * `c_{rho,d} (q_{1-alpha} / sqrt(n))^(1/r) diam` with `c_{rho,d} = max(1/c_d, 1)`.
 *
 * # Safety
 * `delta` must be writable.
 */
enum RlStatus rl_delta_asymptotic(size_t n,
                                  double r,
                                  double alpha,
                                  double diam,
                                  double c_d,
                                  double *delta);

/**
 * Quantile of the Kolmogorov distribution.
 *
 * # Safety
 * `q` must be writable.
 */
enum RlStatus rl_kolmogorov_quantile(double p, double *q);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_LINREG_H */
