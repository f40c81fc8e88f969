#ifndef ALP_H
#define ALP_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AlpStatus {
  ALP_STATUS_OK = 0,
  ALP_STATUS_NULL_POINTER = 1,
  ALP_STATUS_INVALID_PARAMS = 2,
  ALP_STATUS_ESTIMATION_FAILED = 3,
  ALP_STATUS_PRIVACY_FAILED = 4,
  ALP_STATUS_SIMULATION_FAILED = 5,
  ALP_STATUS_INVALID_ARGUMENT = 6,
  ALP_STATUS_PANIC = 7,
} AlpStatus;

typedef enum AlpEstimator {
  ALP_ESTIMATOR_FROM_YES = 0,
  ALP_ESTIMATOR_FROM_NO = 1,
  ALP_ESTIMATOR_FROM_BOTTOM = 2,
} AlpEstimator;

typedef enum AlpResponse {
  ALP_RESPONSE_YES = 0,
  ALP_RESPONSE_NO = 1,
  ALP_RESPONSE_BOTTOM = 2,
} AlpResponse;

/**
 * Opaque, validated mechanism parameters.
 */
typedef struct AlpParams AlpParams;

typedef struct AlpEpsilon {
  double epsilon_one;
  double epsilon_two;
  double epsilon_dp;
} AlpEpsilon;

typedef struct AlpCounts {
  double yes;
  double no;
  double bottom;
} AlpCounts;

typedef struct AlpEstimate {
  double point;
  double sigma;
  double ci_low;
  double ci_high;
  /**
   * 1 when the raw point lies outside `[0, DO]`.
   */
  uint8_t out_of_range;
} AlpEstimate;

typedef struct AlpCrowd {
  double expected_noisy_yes;
  uint64_t threshold_at_confidence;
} AlpCrowd;

typedef struct AlpTally {
  uint64_t yes;
  uint64_t no;
  uint64_t bottom;
} AlpTally;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Validate six mechanism parameters and allocate a handle.
 *
 * # Safety
 * `out` must be valid for writes. Free the handle with [`alp_params_free`].
 */
enum AlpStatus alp_params_new(double pi_s_yes1,
                              double pi_s_yes2,
                              double pi_s_no,
                              double pi_1,
                              double pi_2,
                              double pi_3,
                              struct AlpParams **out);

/**
 * Handle for (0.45, 0.50, 0.068, 0.95, 0.98, 0.98).
 */
struct AlpParams *alp_params_reference(void);

/**
 * # Safety
 * `params` must come from this library and not be freed twice. Null is ignored.
 */
void alp_params_free(struct AlpParams *params);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_epsilon(const struct AlpParams *params, struct AlpEpsilon *out);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_expected_tally(const struct AlpParams *params,
                                  uint64_t yes_count,
                                  uint64_t no_count,
                                  struct AlpCounts *out);

/**
 * Estimate YES from an observed tally with one of the single-count estimators.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_estimate(const struct AlpParams *params,
                            enum AlpEstimator estimator,
                            struct AlpCounts tally,
                            double confidence,
                            struct AlpEstimate *out);

/**
 * `P[X >= k]` for `X ~ Binomial(n, p)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum AlpStatus alp_binomial_ccdf(uint64_t n, double p, uint64_t k, double *out);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_crowd_size(const struct AlpParams *params,
                              uint64_t no_population,
                              double confidence,
                              struct AlpCrowd *out);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_expected_locations(const struct AlpParams *params,
                                      uint64_t num_locations,
                                      double *out);

/**
 * Privatize one owner's value with a counter-based stream keyed by `seed`
 * and `stream`.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_privatize(const struct AlpParams *params,
                             bool value_is_yes,
                             uint64_t seed,
                             uint64_t stream,
                             enum AlpResponse *out);

/**
 * Simulate one epoch of `yes_count + no_count` owners. Matches the
 * simulator's tallies for the same seed and epoch.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum AlpStatus alp_run_epoch(const struct AlpParams *params,
                             uint64_t seed,
                             uint64_t epoch,
                             uint64_t yes_count,
                             uint64_t no_count,
                             struct AlpTally *out);

/**
 * Message for the last failure on this thread. Valid until the next call
 * into this library from the same thread.
 */
const char *alp_last_error_message(void);

/**
 * Short name of a status code. Static; never free it.
 */
const char *alp_status_name(enum AlpStatus status);

const char *alp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALP_H */
