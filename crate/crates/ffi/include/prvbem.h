#ifndef PRVBEM_H
#define PRVBEM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PrvbemStatus {
  PRVBEM_STATUS_OK = 0,
  PRVBEM_STATUS_NULL_POINTER = 1,
  PRVBEM_STATUS_INVALID_ARGUMENT = 2,
  PRVBEM_STATUS_DIMENSION_MISMATCH = 3,
  PRVBEM_STATUS_RANK_DEFICIENT = 4,
  PRVBEM_STATUS_IO = 5,
  PRVBEM_STATUS_PANIC = 6,
} PrvbemStatus;

/**
 * Measurement matrix and modulus observations. Create with
 * [`prvbem_ensemble_new`], release with [`prvbem_ensemble_free`].
 */
typedef struct PrvbemEnsemble PrvbemEnsemble;

/**
 * Solver settings. Obtain defaults from [`prvbem_solve_options_default`].
 */
typedef struct PrvbemSolveOptions {
  size_t max_iters;
  /**
   * Stop once the free energy drops by less than this.
   */
  double kl_tol;
  /**
   * Noise variance floor, relative to `max(1, y^H y / M)`.
   */
  double sigma_n2_floor;
  size_t restarts;
  uint64_t seed;
  /**
   * Also run the prior-variance M-step.
   */
  bool estimate_signal_var;
} PrvbemSolveOptions;

/**
 * Summary of a prVBEM run.
 */
typedef struct PrvbemSolveInfo {
  size_t iterations;
  bool converged;
  double free_energy;
  double sigma_n2_hat;
  double sigma_x2;
} PrvbemSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *prvbem_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *prvbem_last_error_message(void);

/**
 * Short description of a status code as a static string. Unknown codes
 * map to "unknown status".
 */
const char *prvbem_status_str(int status);

/**
 * Builds an ensemble from a column-major `rows x cols` complex matrix
 * (`2 * rows * cols` doubles) and `rows` nonnegative moduli.
 *
 * # Safety
 * `d` and `y` must point to that many readable doubles and `out` must be
 * writable. The handle written to `out` must be released with
 * [`prvbem_ensemble_free`].
 */
enum PrvbemStatus prvbem_ensemble_new(size_t rows,
                                      size_t cols,
                                      const double *d,
                                      const double *y,
                                      struct PrvbemEnsemble **out);

/**
 * Releases an ensemble. NULL is ignored.
 *
 * # Safety
 * `ensemble` must be NULL or a handle from [`prvbem_ensemble_new`] that has
 * not been freed.
 */
void prvbem_ensemble_free(struct PrvbemEnsemble *ensemble);

/**
 * Number of measurements `M`, or 0 for NULL.
 *
 * # Safety
 * `ensemble` must be NULL or a live handle.
 */
size_t prvbem_ensemble_rows(const struct PrvbemEnsemble *ensemble);

/**
 * Signal length `N`, or 0 for NULL.
 *
 * # Safety
 * `ensemble` must be NULL or a live handle.
 */
size_t prvbem_ensemble_cols(const struct PrvbemEnsemble *ensemble);

/**
 * Default solver settings.
 */
struct PrvbemSolveOptions prvbem_solve_options_default(void);

/**
 * Runs prVBEM with both variances unknown and writes the `N` posterior
 * means to `x_out` as `2 * x_len` doubles.
 *
 * # Safety
 * `options` and `info` may be NULL (defaults are used, no summary is
 * written); otherwise they must be valid. `x_out` must hold `2 * x_len`
 * doubles.
 */
enum PrvbemStatus prvbem_solve(const struct PrvbemEnsemble *ensemble,
                               const struct PrvbemSolveOptions *options,
                               double *x_out,
                               size_t x_len,
                               struct PrvbemSolveInfo *info);

/**
 * Runs `iters` Gerchberg-Saxton iterations from a seeded random start and
 * writes the estimate to `x_out` as `2 * x_len` doubles.
 *
 * # Safety
 * `ensemble` must be a live handle and `x_out` must hold `2 * x_len`
 * doubles.
 */
enum PrvbemStatus prvbem_gs_solve(const struct PrvbemEnsemble *ensemble,
                                  size_t iters,
                                  uint64_t seed,
                                  double *x_out,
                                  size_t x_len);

/**
 * Phase-invariant correlation between two complex vectors of length `n`.
 *
 * # Safety
 * `x_hat` and `x_true` must hold `2 * n` doubles; `out` must be writable.
 */
enum PrvbemStatus prvbem_recovery_correlation(const double *x_hat,
                                              const double *x_true,
                                              size_t n,
                                              double *out);

/**
 * `I1(kappa) / I0(kappa)` for `kappa >= 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrvbemStatus prvbem_bessel_ratio(double kappa, double *out);

/**
 * `ln I0(kappa)` for `kappa >= 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrvbemStatus prvbem_log_bessel_i0(double kappa, double *out);

/**
 * Draws a synthetic instance: `D` with `CN(0, 1/rows)` entries
 * (column-major, `2 * rows * cols` doubles), `x ~ CN(0, sigma_x2)`
 * (`2 * cols` doubles) and `y = |D x + n|` (`rows` doubles). `x_out` may be
 * NULL.
 *
 * # Safety
 * Non-null buffers must have the sizes above.
 */
enum PrvbemStatus prvbem_synth_instance(size_t rows,
                                        size_t cols,
                                        double sigma_x2,
                                        double sigma_n2,
                                        uint64_t seed,
                                        double *d_out,
                                        double *y_out,
                                        double *x_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRVBEM_H */
