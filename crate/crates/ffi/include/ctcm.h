#ifndef CTCM_H
#define CTCM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum CtcmStatus {
  CTCM_STATUS_OK = 0,
  CTCM_STATUS_NULL_POINTER = 1,
  CTCM_STATUS_INVALID_ARGUMENT = 2,
  CTCM_STATUS_OUT_OF_RANGE = 3,
  CTCM_STATUS_BUFFER_TOO_SMALL = 4,
  CTCM_STATUS_INTERNAL = 5,
} CtcmStatus;

/**
 * Model parameters with a uniform-box perturbation law.
 */
typedef struct CtcmParams CtcmParams;

/**
 * A recorded jump path.
 */
typedef struct CtcmTrajectory CtcmTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ctcm_last_error_message(void);

/**
 * Creates parameters for `n` sites in `dim` dimensions with perturbations
 * uniform on the box `center ± half_width`.
 *
 * # Safety
 * `center` and `half_width` must point to `dim` readable doubles and `out`
 * to a writable handle slot.
 */
enum CtcmStatus ctcm_params_new(double theta_a,
                                double theta_d,
                                size_t n,
                                size_t dim,
                                const double *center,
                                const double *half_width,
                                struct CtcmParams **out);

/**
 * # Safety
 * `params` must be NULL or a handle from [`ctcm_params_new`] not yet freed.
 */
void ctcm_params_free(struct CtcmParams *params);

/**
 * Writes the `n + 1` steady-state probabilities of the attached count.
 *
 * # Safety
 * `params` must be a live handle and `out` must hold `len` doubles.
 */
enum CtcmStatus ctcm_steady_state(const struct CtcmParams *params, double *out, size_t len);

/**
 * Writes the `dim` coordinates of the closed-form mean centroid velocity.
 *
 * # Safety
 * `params` must be a live handle and `out` must hold `len` doubles.
 */
enum CtcmStatus ctcm_expected_velocity(const struct CtcmParams *params, double *out, size_t len);

/**
 * Same quantity as [`ctcm_expected_velocity`], summed level by level.
 *
 * # Safety
 * `params` must be a live handle and `out` must hold `len` doubles.
 */
enum CtcmStatus ctcm_drift_oracle(const struct CtcmParams *params, double *out, size_t len);

/**
 * Simulates the Markov engine to `horizon` seconds from all sites and the
 * centroid at the origin with the first `attached` sites attached.
 *
 * # Safety
 * `params` must be a live handle and `out` a writable handle slot.
 */
enum CtcmStatus ctcm_simulate_markov(const struct CtcmParams *params,
                                     size_t attached,
                                     double horizon,
                                     uint64_t seed,
                                     struct CtcmTrajectory **out);

/**
 * # Safety
 * `traj` must be NULL or a handle from [`ctcm_simulate_markov`] not yet freed.
 */
void ctcm_trajectory_free(struct CtcmTrajectory *traj);

/**
 * Number of recorded states (jumps + 1); 0 for a NULL handle.
 *
 * # Safety
 * `traj` must be NULL or a live handle.
 */
size_t ctcm_trajectory_len(const struct CtcmTrajectory *traj);

/**
 * Time of the jump into state `k` (0 for the initial state).
 *
 * # Safety
 * `traj` must be a live handle and `out` writable.
 */
enum CtcmStatus ctcm_trajectory_time(const struct CtcmTrajectory *traj, size_t k, double *out);

/**
 * Attached count of state `k`.
 *
 * # Safety
 * `traj` must be a live handle and `out` writable.
 */
enum CtcmStatus ctcm_trajectory_count(const struct CtcmTrajectory *traj, size_t k, size_t *out);

/**
 * Centroid at time `time` (right-continuous), `dim` coordinates.
 *
 * # Safety
 * `traj` must be a live handle and `out` must hold `len` doubles.
 */
enum CtcmStatus ctcm_trajectory_centroid_at(const struct CtcmTrajectory *traj,
                                            double time,
                                            double *out,
                                            size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTCM_H */
