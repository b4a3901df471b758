#ifndef PERIMIT_H
#define PERIMIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PerimitStatus {
  PERIMIT_STATUS_OK = 0,
  PERIMIT_STATUS_NULL_POINTER = 1,
  PERIMIT_STATUS_INVALID_ARGUMENT = 2,
  PERIMIT_STATUS_BUFFER_TOO_SMALL = 3,
  PERIMIT_STATUS_NUMERICAL_FAILURE = 4,
  PERIMIT_STATUS_NO_PERIODICITY = 5,
  PERIMIT_STATUS_PANIC = 6,
} PerimitStatus;

/**
 * Fitted Gaussian-process surrogate.
 */
typedef struct PerimitGp PerimitGp;

/**
 * Rhythmic movement primitive.
 */
typedef struct PerimitRdmp PerimitRdmp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `capacity`). Returns the full message length without the
 * terminator, or 0 if there is none.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t perimit_last_error_message(char *buf, size_t capacity);

/**
 * Fits a primitive to `n_points` positions sampled every `dt` seconds.
 *
 * # Safety
 * `xyz` must hold `3 * n_points` doubles; `out_handle` must be writable.
 */
enum PerimitStatus perimit_rdmp_fit(const double *xyz,
                                    size_t n_points,
                                    double dt,
                                    size_t n_basis,
                                    double period,
                                    struct PerimitRdmp **out_handle);

/**
 * Builds a primitive whose period passes through `n_waypoints` waypoints.
 *
 * # Safety
 * `xyz` must hold `3 * n_waypoints` doubles; `out_handle` must be writable.
 */
enum PerimitStatus perimit_rdmp_from_waypoints(const double *xyz,
                                               size_t n_waypoints,
                                               double period,
                                               size_t n_basis,
                                               struct PerimitRdmp **out_handle);

/**
 * # Safety
 * `handle` must be a live primitive; `out_period` must be writable.
 */
enum PerimitStatus perimit_rdmp_period(const struct PerimitRdmp *handle, double *out_period);

/**
 * Integrates `n_periods` periods from the primitive's own start state at
 * step `dt`. Writes `*out_len` points to `out_xyz` when `capacity` (in
 * points) suffices; otherwise returns `BufferTooSmall` with the required
 * length in `*out_len`.
 *
 * # Safety
 * `handle` must be a live primitive, `out_xyz` valid for `3 * capacity`
 * doubles (or null when `capacity` is 0), `out_len` writable.
 */
enum PerimitStatus perimit_rdmp_rollout(const struct PerimitRdmp *handle,
                                        size_t n_periods,
                                        double dt,
                                        double *out_xyz,
                                        size_t capacity,
                                        size_t *out_len);

/**
 * # Safety
 * `handle` must be null or a primitive not yet freed.
 */
void perimit_rdmp_free(struct PerimitRdmp *handle);

/**
 * Fits a GP to `n` inputs of dimension `dim` (row-major) and targets `y`,
 * maximizing the marginal likelihood when `optimize` is nonzero.
 *
 * # Safety
 * `x` must hold `n * dim` doubles, `y` `n` doubles; `out_handle` must be writable.
 */
enum PerimitStatus perimit_gp_fit(const double *x,
                                  size_t n,
                                  size_t dim,
                                  const double *y,
                                  int32_t optimize,
                                  struct PerimitGp **out_handle);

/**
 * Posterior mean and standard deviation at `w`.
 *
 * # Safety
 * `handle` must be a live model, `w` hold `dim` doubles, output pointers writable.
 */
enum PerimitStatus perimit_gp_posterior(const struct PerimitGp *handle,
                                        const double *w,
                                        size_t dim,
                                        double *out_mean,
                                        double *out_std);

/**
 * `mean + beta * std` at `w`.
 *
 * # Safety
 * As [`perimit_gp_posterior`].
 */
enum PerimitStatus perimit_gp_ucb(const struct PerimitGp *handle,
                                  const double *w,
                                  size_t dim,
                                  double beta,
                                  double *out_value);

/**
 * # Safety
 * `handle` must be null or a model not yet freed.
 */
void perimit_gp_free(struct PerimitGp *handle);

/**
 * Mean L1 keypoint distance between two videos, each sub-sampled to
 * `n_subsampled` frames.
 *
 * # Safety
 * `a` must hold `2 * n_keypoints * frames_a` doubles, `b` likewise for
 * `frames_b`; the output pointer writable.
 */
enum PerimitStatus perimit_keypoint_distance(const double *a,
                                             size_t frames_a,
                                             const double *b,
                                             size_t frames_b,
                                             size_t n_keypoints,
                                             size_t n_subsampled,
                                             double *out_distance);

/**
 * Number of repetitions and period length (frames) of a keypoint video.
 *
 * # Safety
 * `keypoints` must hold `2 * n_keypoints * n_frames` doubles; outputs
 * writable.
 */
enum PerimitStatus perimit_estimate_periods(const double *keypoints,
                                            size_t n_frames,
                                            size_t n_keypoints,
                                            size_t *out_n_rep,
                                            double *out_period_frames,
                                            double *out_confidence);

/**
 * Score in [0, 1] of an executed trajectory against the exemplar, with
 * `max_error` the mean L1 error that maps to 0.
 *
 * # Safety
 * `exemplar` must hold `3 * n_exemplar` doubles, `execution`
 * `3 * n_execution`; the output pointer writable.
 */
enum PerimitStatus perimit_performance(const double *exemplar,
                                       size_t n_exemplar,
                                       const double *execution,
                                       size_t n_execution,
                                       double max_error,
                                       double *out_score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERIMIT_H */
