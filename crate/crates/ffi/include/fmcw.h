#ifndef FMCW_H
#define FMCW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FmcwAlgorithm {
  FMCW_ALGORITHM_FFT2D = 0,
  FMCW_ALGORITHM_MUSIC2D = 1,
  FMCW_ALGORITHM_LSE = 2,
  FMCW_ALGORITHM_MLE = 3,
} FmcwAlgorithm;

/**
 * Result code of every fallible call.
 */
typedef enum FmcwStatus {
  FMCW_STATUS_OK = 0,
  FMCW_STATUS_NULL_POINTER = 1,
  FMCW_STATUS_INVALID_ARGUMENT = 2,
  FMCW_STATUS_INVALID_CONFIG = 3,
  /**
   * The estimator or bound failed numerically (unresolved peaks,
   * singular systems, non-finite derivatives).
   */
  FMCW_STATUS_NUMERICAL = 4,
  FMCW_STATUS_BUFFER_TOO_SMALL = 5,
  FMCW_STATUS_PANIC = 6,
} FmcwStatus;

/**
 * Opaque radar configuration.
 */
typedef struct FmcwConfig FmcwConfig;

/**
 * Opaque N×M measurement matrix.
 */
typedef struct FmcwMeasurement FmcwMeasurement;

/**
 * Point target: amplitude, reflectivity phase (rad), range (m), angle (rad).
 */
typedef struct FmcwTarget {
  double a;
  double phi;
  double r;
  double theta;
} FmcwTarget;

/**
 * Estimated amplitude, lumped phase (rad), range (m) and angle (rad).
 */
typedef struct FmcwEstimate {
  double a;
  double psi;
  double r;
  double theta;
} FmcwEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *fmcw_last_error(void);

/**
 * Creates a configuration with half-wavelength element spacing.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum FmcwStatus fmcw_config_new(double carrier_hz,
                                double bandwidth_hz,
                                double sweep_time_s,
                                size_t samples,
                                size_t tx,
                                size_t rx,
                                struct FmcwConfig **out);

/**
 * 77 GHz, 4 GHz bandwidth, 100 us sweep, 256 samples, 4×4 MIMO.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum FmcwStatus fmcw_config_default(struct FmcwConfig **out);

/**
 * # Safety
 * `config` must come from this library and not be used afterwards. NULL is ignored.
 */
void fmcw_config_free(struct FmcwConfig *config);

/**
 * Noise standard deviation giving `snr_db` for a target of amplitude `a`.
 *
 * # Safety
 * `config` must be a live handle and `sigma` valid for writing.
 */
enum FmcwStatus fmcw_sigma_for_snr(const struct FmcwConfig *config,
                                   double a,
                                   double snr_db,
                                   double *sigma);

/**
 * Synthesizes `k` targets plus complex Gaussian noise of std `sigma`.
 *
 * # Safety
 * `targets` must point to `k` elements; `out` must be valid for writing.
 */
enum FmcwStatus fmcw_measurement_synthesize(const struct FmcwConfig *config,
                                            const struct FmcwTarget *targets,
                                            size_t k,
                                            double sigma,
                                            uint64_t seed,
                                            struct FmcwMeasurement **out);

/**
 * Wraps caller samples: `len` doubles as interleaved (re, im) pairs,
 * row-major N×M.
 *
 * # Safety
 * `samples` must point to `len` doubles; `out` must be valid for writing.
 */
enum FmcwStatus fmcw_measurement_from_samples(const struct FmcwConfig *config,
                                              const double *samples,
                                              size_t len,
                                              double sigma,
                                              struct FmcwMeasurement **out);

/**
 * Rows (range samples) and columns (virtual elements).
 *
 * # Safety
 * All pointers must be valid.
 */
enum FmcwStatus fmcw_measurement_dims(const struct FmcwMeasurement *z, size_t *rows, size_t *cols);

/**
 * Copies entry (n, m) as (re, im).
 *
 * # Safety
 * All pointers must be valid.
 */
enum FmcwStatus fmcw_measurement_get(const struct FmcwMeasurement *z,
                                     size_t n,
                                     size_t m,
                                     double *re,
                                     double *im);

/**
 * # Safety
 * `z` must come from this library and not be used afterwards. NULL is ignored.
 */
void fmcw_measurement_free(struct FmcwMeasurement *z);

/**
 * Estimates `k` targets. `oversample` is the fine-grid factor of the
 * grid-based algorithms; the ML estimator ignores it. `out` receives up to `out_len` estimates
 * and `written` their count; fewer than `k` slots give
 * `FMCW_STATUS_BUFFER_TOO_SMALL` with `written` set to `k`.
 *
 * # Safety
 * `out` must point to `out_len` writable elements; `written` must be valid.
 */
enum FmcwStatus fmcw_estimate(const struct FmcwMeasurement *z,
                              enum FmcwAlgorithm algorithm,
                              size_t k,
                              uint32_t oversample,
                              struct FmcwEstimate *out,
                              size_t out_len,
                              size_t *written);

/**
 * Cramér–Rao standard deviations of range (m) and angle (rad) for one
 * target at `snr_db`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FmcwStatus fmcw_crb(const struct FmcwConfig *config,
                         const struct FmcwTarget *target,
                         double snr_db,
                         double *sigma_r,
                         double *sigma_theta);

/**
 * Predicted 2D-FFT range (m) and angle (rad) bias for a target at `theta` rad.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FmcwStatus fmcw_bias(const struct FmcwConfig *config,
                          double theta,
                          double *range_bias,
                          double *angle_bias);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FMCW_H */
