#ifndef QUADINFER_H
#define QUADINFER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bits of `QiResult::flags`.
 */
#define QI_FLAG_ZETA_N_FLOORED (1 << 0)

#define QI_FLAG_ZETA_STAR_FLOORED (1 << 1)

#define QI_FLAG_NU4_FLOORED (1 << 2)

#define QI_FLAG_ZETA_EPS_FLOORED (1 << 3)

#define QI_FLAG_SIGMA_ETA_FLOORED (1 << 4)

#define QI_FLAG_SIGMA_RHO_FLOORED (1 << 5)

#define QI_FLAG_SIGMA_RHO_CONVENTIONAL_FLOORED (1 << 6)

#define QI_FLAG_SIGMA_DIFF_FLOORED (1 << 7)

#define QI_FLAG_SIGMA_THETA_FLOORED (1 << 8)

#define QI_FLAG_SIGMA_THETA_CONVENTIONAL_FLOORED (1 << 9)

#define QI_FLAG_INTERVAL_CLAMPED (1 << 10)

/**
 * Call outcome.
 */
typedef enum QiStatus {
  QI_STATUS_OK = 0,
  QI_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument value or shape.
   */
  QI_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Numerical degeneracy: singular or rank-deficient design, zero variance, nonpositive denominator.
   */
  QI_STATUS_NUMERICAL = 3,
  /**
   * Internal panic caught at the boundary.
   */
  QI_STATUS_INTERNAL = 4,
} QiStatus;

/**
 * Opaque one-sample fit.
 */
typedef struct QiFit QiFit;

/**
 * Opaque pair of fits.
 */
typedef struct QiTwoSample QiTwoSample;

/**
 * Outcome of one test. Intervals are clamped to the parameter range; the
 * `raw_` endpoints are before clamping.
 */
typedef struct QiResult {
  double estimate;
  double null_value;
  double std_error;
  double z;
  double p_value;
  /**
   * NaN when the test has no one-sided form.
   */
  double one_sided_p;
  double ci_low;
  double ci_high;
  double raw_ci_low;
  double raw_ci_high;
  double alpha;
  uint32_t flags;
} QiResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qi_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t qi_last_error_message(char *buf, size_t len);

/**
 * Fit least squares of `y` (length `n`) on the row-major `n × p` matrix `x`.
 * With `center` nonzero both are centered first. Linearly dependent columns
 * are dropped; see `qi_fit_dropped`.
 *
 * # Safety
 * `y` and `x` must be valid for `n` and `n * p` doubles; `out` must be writable.
 */
enum QiStatus qi_fit_new(const double *y,
                         const double *x,
                         size_t n,
                         size_t p,
                         int center,
                         struct QiFit **out);

/**
 * Release a fit. Null is ignored.
 *
 * # Safety
 * `fit` must come from `qi_fit_new` and not be used afterwards.
 */
void qi_fit_free(struct QiFit *fit);

/**
 * Number of observations; 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t qi_fit_n(const struct QiFit *fit);

/**
 * Number of columns kept after rank repair; 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t qi_fit_p(const struct QiFit *fit);

/**
 * Residual variance estimate; NaN for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
double qi_fit_sigma2(const struct QiFit *fit);

/**
 * Copy the coefficients (length `qi_fit_p`) into `out`.
 *
 * # Safety
 * `out` must be valid for `len` doubles.
 */
enum QiStatus qi_fit_beta_hat(const struct QiFit *fit, double *out, size_t len);

/**
 * Number of columns removed by rank repair; 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t qi_fit_dropped_count(const struct QiFit *fit);

/**
 * Copy the removed original column indices (ascending) into `out`.
 *
 * # Safety
 * `out` must be valid for `len` entries.
 */
enum QiStatus qi_fit_dropped(const struct QiFit *fit, size_t *out, size_t len);

/**
 * Test `‖β₀‖ = c0` with the bias- and variance-corrected statistic.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_quad_norm(const struct QiFit *fit,
                                double c0,
                                double alpha,
                                struct QiResult *out);

/**
 * The uncorrected statistic, for comparison.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_conventional(const struct QiFit *fit,
                                   double c0,
                                   double alpha,
                                   struct QiResult *out);

/**
 * Test `β₀ = 0`.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_signal(const struct QiFit *fit, double alpha, struct QiResult *out);

/**
 * Test `β₀ = beta_null` (length `qi_fit_p`).
 *
 * # Safety
 * `beta_null` must be valid for `len` doubles; `fit` live; `out` writable.
 */
enum QiStatus qi_test_global(const struct QiFit *fit,
                             const double *beta_null,
                             size_t len,
                             double alpha,
                             struct QiResult *out);

/**
 * Whether `beta` lies in the confidence region; `two_sided` selects the form.
 *
 * # Safety
 * `beta` must be valid for `len` doubles; `fit` live; `inside` writable.
 */
enum QiStatus qi_region_contains(const struct QiFit *fit,
                                 const double *beta,
                                 size_t len,
                                 double alpha,
                                 int two_sided,
                                 int *inside);

/**
 * Test `σ²ε = sigma2_null`.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_error_variance(const struct QiFit *fit,
                                     double sigma2_null,
                                     double alpha,
                                     struct QiResult *out);

/**
 * Test the fraction of variance explained; `conventional` nonzero selects the uncorrected form.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_rho(const struct QiFit *fit,
                          double rho_null,
                          double alpha,
                          int conventional,
                          struct QiResult *out);

/**
 * Test the signal strength `β₀ᵀΣβ₀ = eta_null`.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_eta(const struct QiFit *fit,
                          double eta_null,
                          double alpha,
                          struct QiResult *out);

/**
 * Confidence interval for the signal strength.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum QiStatus qi_ci_eta(const struct QiFit *fit, double alpha, struct QiResult *out);

/**
 * Inference on `cᵀβ₀` with `c` of length `qi_fit_p`.
 *
 * # Safety
 * `c` must be valid for `len` doubles; `fit` live; `out` writable.
 */
enum QiStatus qi_test_linear(const struct QiFit *fit,
                             const double *c,
                             size_t len,
                             double null_value,
                             double alpha,
                             struct QiResult *out);

/**
 * Pair two fits with equal column counts. The inputs stay owned by the caller.
 *
 * # Safety
 * `a` and `b` must be live handles and `out` writable.
 */
enum QiStatus qi_two_sample_new(const struct QiFit *a,
                                const struct QiFit *b,
                                struct QiTwoSample **out);

/**
 * Release a pair. Null is ignored.
 *
 * # Safety
 * `ts` must come from `qi_two_sample_new` and not be used afterwards.
 */
void qi_two_sample_free(struct QiTwoSample *ts);

/**
 * Test equality of the two coefficient vectors.
 *
 * # Safety
 * `ts` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_equality(const struct QiTwoSample *ts, double alpha, struct QiResult *out);

/**
 * Normalized inner product of the two coefficient vectors.
 *
 * # Safety
 * `ts` must be a live handle and `theta` writable.
 */
enum QiStatus qi_theta_hat(const struct QiTwoSample *ts, double *theta);

/**
 * Test the angle `θ₀ = theta_null`; `conventional` nonzero selects the uncorrected form.
 *
 * # Safety
 * `ts` must be a live handle and `out` writable.
 */
enum QiStatus qi_test_coheritability(const struct QiTwoSample *ts,
                                     double theta_null,
                                     double alpha,
                                     int conventional,
                                     struct QiResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUADINFER_H */
