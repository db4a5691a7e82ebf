#ifndef DELAY_ATTRACTOR_H
#define DELAY_ATTRACTOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DaStatus {
  DA_STATUS_OK = 0,
  DA_STATUS_NULL_POINTER = 1,
  DA_STATUS_INVALID_ARGUMENT = 2,
  DA_STATUS_INFEASIBLE = 3,
  DA_STATUS_DIVERGENCE = 4,
  DA_STATUS_UNSUPPORTED = 5,
  DA_STATUS_CONFIG = 6,
  DA_STATUS_IO = 7,
  DA_STATUS_PANIC = 8,
} DaStatus;

/**
 * Validated model built from a run configuration.
 */
typedef struct DaModel DaModel;

/**
 * A running trajectory together with its semiflow.
 */
typedef struct DaTrajectory DaTrajectory;

/**
 * One evaluated `(m, α)` point of the dimension bound.
 */
typedef struct DaBound {
  size_t m;
  size_t k_m;
  double alpha;
  double zeta;
  /**
   * NaN when infeasible.
   */
  double dim_bound;
  bool feasible;
} DaBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *da_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next library call on this thread.
 */
const char *da_last_error(void);

/**
 * Builds a model from TOML text in the `delay-attractor` config format.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DaStatus da_model_from_toml(const char *toml, struct DaModel **out);

/**
 * Applies a dotted `key=value` override and re-validates. The model is left
 * unchanged on failure.
 *
 * # Safety
 * `model` must come from this library; `assignment` must be NUL-terminated.
 */
enum DaStatus da_model_set(struct DaModel *model, const char *assignment);

/**
 * # Safety
 * `model` must come from this library or be null; it is invalid afterwards.
 */
void da_model_free(struct DaModel *model);

/**
 * Hypothesis flags of the model.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_model_validate(const struct DaModel *model,
                                bool *absorbing_ok,
                                bool *tail_contracts);

/**
 * Radius of the absorbing ball; `DA_STATUS_INFEASIBLE` when the model is not dissipative.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_model_absorbing_radius(const struct DaModel *model, double *out);

/**
 * Dominant real characteristic root for one Dirichlet eigenvalue, using the
 * model's `spectral.charEq` setting.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_model_dominant_root(const struct DaModel *model, double eigenvalue, double *out);

/**
 * ζ and the dimension bound at a given cut `m` and slack `alpha`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_model_bound_at(const struct DaModel *model,
                                size_t m,
                                double alpha,
                                struct DaBound *out);

/**
 * Best feasible `(m, α)` over the configured search, or the least-ζ point if none is feasible.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_model_optimize_bound(const struct DaModel *model, struct DaBound *out);

/**
 * Trajectory from the constant history `u ≡ value`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_trajectory_new_constant(const struct DaModel *model,
                                         double value,
                                         struct DaTrajectory **out);

/**
 * Trajectory from a seeded band-limited random history with `‖φ‖_C = norm`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DaStatus da_trajectory_new_random(const struct DaModel *model,
                                       double norm,
                                       uint64_t seed,
                                       struct DaTrajectory **out);

/**
 * Advances by `steps` integrator steps.
 *
 * # Safety
 * `traj` must come from this library.
 */
enum DaStatus da_trajectory_step(struct DaTrajectory *traj, size_t steps);

/**
 * Advances by `duration`, which must be a multiple of the step `τ/n_τ`.
 *
 * # Safety
 * `traj` must come from this library.
 */
enum DaStatus da_trajectory_advance(struct DaTrajectory *traj, double duration);

/**
 * Elapsed time, or NaN for a null handle.
 *
 * # Safety
 * `traj` must come from this library or be null.
 */
double da_trajectory_time(const struct DaTrajectory *traj);

/**
 * `‖u_t‖_C` of the current history window, or NaN for a null handle.
 *
 * # Safety
 * `traj` must come from this library or be null.
 */
double da_trajectory_segment_norm(const struct DaTrajectory *traj);

/**
 * Number of grid nodes in one state, or 0 for a null handle.
 *
 * # Safety
 * `traj` must come from this library or be null.
 */
size_t da_trajectory_len(const struct DaTrajectory *traj);

/**
 * Copies the current state `u(t)` (row-major) into `buf` of length `len`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum DaStatus da_trajectory_state(const struct DaTrajectory *traj, double *buf, size_t len);

/**
 * # Safety
 * `traj` must come from this library or be null; it is invalid afterwards.
 */
void da_trajectory_free(struct DaTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELAY_ATTRACTOR_H */
