#ifndef SHAPLOC_H
#define SHAPLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Constant offset `AM`.
 */
#define SHAPLOC_ATTACK_A 0

/**
 * Gaussian offset with mean `AM` and standard deviation `sigma_a`.
 */
#define SHAPLOC_ATTACK_B 1

/**
 * `AM` plus a Uniform(0, `um`) offset.
 */
#define SHAPLOC_ATTACK_C 2

/**
 * Result code of every fallible call.
 */
typedef enum ShaplocStatus {
  SHAPLOC_STATUS_OK = 0,
  SHAPLOC_STATUS_NULL_POINTER = 1,
  SHAPLOC_STATUS_INVALID_ARGUMENT = 2,
  SHAPLOC_STATUS_DIMENSION_MISMATCH = 3,
  SHAPLOC_STATUS_NOT_SYMMETRIC = 4,
  SHAPLOC_STATUS_NOT_POSITIVE_DEFINITE = 5,
  SHAPLOC_STATUS_NON_FINITE = 6,
  SHAPLOC_STATUS_EMPTY_COALITION = 7,
  SHAPLOC_STATUS_UNIVERSE_TOO_LARGE = 8,
  SHAPLOC_STATUS_SENSOR_OUT_OF_RANGE = 9,
  SHAPLOC_STATUS_DEGENERATE_LABELS = 10,
  SHAPLOC_STATUS_PANIC = 11,
} ShaplocStatus;

/**
 * Opaque multivariate Gaussian sensor model.
 */
typedef struct ShaplocModel ShaplocModel;

/**
 * Attack injected into a trial.
 */
typedef struct ShaplocAttack {
  /**
   * One of `SHAPLOC_ATTACK_A`, `SHAPLOC_ATTACK_B`, `SHAPLOC_ATTACK_C`.
   */
  uint32_t kind;
  double am;
  /**
   * Read only for type B.
   */
  double sigma_a;
  /**
   * Read only for type C.
   */
  double um;
  /**
   * Bit `i` set when sensor `i` (0-based) is attacked.
   */
  uint32_t target_mask;
} ShaplocAttack;

/**
 * Monte Carlo settings.
 */
typedef struct ShaplocRunParams {
  /**
   * 0-based index of the sensor whose statistics are tested.
   */
  uint32_t sensor_under_test;
  uint64_t trials;
  /**
   * Probability that a trial is attacked, strictly between 0 and 1.
   */
  double attack_prior;
  uint64_t seed;
  /**
   * 0 selects the exact sorted-score search; otherwise the number of
   * equally spaced thresholds on `[grid_lo, grid_hi]`.
   */
  uint64_t grid_steps;
  double grid_lo;
  double grid_hi;
} ShaplocRunParams;

/**
 * Optimized test for one statistic.
 */
typedef struct ShaplocErrorRate {
  double threshold;
  double pe;
  double ci_halfwidth;
  double rate_sum;
  uint64_t trials;
} ShaplocErrorRate;

/**
 * Paired results of one experiment.
 */
typedef struct ShaplocOutcome {
  struct ShaplocErrorRate shapley;
  struct ShaplocErrorRate single_term;
} ShaplocOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model from a mean vector of length `n` and an `n * n`
 * row-major covariance matrix. On success `*out` owns a new handle.
 *
 * # Safety
 * `mean` must point to `n` doubles, `cov` to `n * n` doubles and `out` to
 * writable storage for one pointer.
 */
enum ShaplocStatus shaploc_model_new(const double *mean,
                                     const double *cov,
                                     size_t n,
                                     struct ShaplocModel **out);

/**
 * Creates a two-sensor model from means, standard deviations and the
 * correlation coefficient.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum ShaplocStatus shaploc_model_bivariate(double mu1,
                                           double mu2,
                                           double sigma1,
                                           double sigma2,
                                           double rho,
                                           struct ShaplocModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void shaploc_model_free(struct ShaplocModel *model);

/**
 * Number of sensors, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t shaploc_model_sensors(const struct ShaplocModel *model);

/**
 * `v(S) = -ln f_S(x_S)`, with `v` of the empty coalition equal to 0.
 * `coalition` is a bit mask over sensor indices.
 *
 * # Safety
 * `model` must be a live handle, `x` must point to `n` doubles and `out`
 * to one writable double.
 */
enum ShaplocStatus shaploc_model_value(const struct ShaplocModel *model,
                                       uint32_t coalition,
                                       const double *x,
                                       size_t n,
                                       double *out);

/**
 * `ln f_S(x_S)` for a nonempty coalition mask.
 *
 * # Safety
 * As for `shaploc_model_value`.
 */
enum ShaplocStatus shaploc_model_marginal_log_density(const struct ShaplocModel *model,
                                                      uint32_t coalition,
                                                      const double *x,
                                                      size_t n,
                                                      double *out);

/**
 * Exact Shapley values of every sensor under the model's value function.
 *
 * # Safety
 * `model` must be a live handle; `x` and `phi` must each point to `n`
 * doubles, `phi` writable.
 */
enum ShaplocStatus shaploc_all_shapley(const struct ShaplocModel *model,
                                       const double *x,
                                       size_t n,
                                       double *phi);

/**
 * Weight of a coalition of size `s_card` in an `n`-player Shapley sum.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum ShaplocStatus shaploc_shapley_weight(size_t s_card, size_t n, double *out);

/**
 * Minimum error probability of a threshold test on `|x|` for
 * `x ~ N(0, sigma^2)` against `x ~ N(am, sigma^2)` with the given prior.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum ShaplocStatus shaploc_analytic_pe_gaussian(double sigma,
                                                double am,
                                                double attack_prior,
                                                double *out);

/**
 * 95% normal-approximation half-width for an error rate over `trials`.
 */
double shaploc_binomial_ci(double pe, uint64_t trials);

/**
 * Runs a paired Monte Carlo experiment and reports the optimized
 * Shapley-value and single-term tests.
 *
 * # Safety
 * `model` must be a live handle; `attack`, `params` and `out` must point
 * to valid structs, `out` writable.
 */
enum ShaplocStatus shaploc_run_experiment(const struct ShaplocModel *model,
                                          const struct ShaplocAttack *attack,
                                          const struct ShaplocRunParams *params,
                                          struct ShaplocOutcome *out);

/**
 * Static description of a status code. Never null.
 */
const char *shaploc_status_message(int32_t status);

/**
 * Detail of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *shaploc_last_error_message(void);

/**
 * Library version as a NUL-terminated string.
 */
const char *shaploc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPLOC_H */
