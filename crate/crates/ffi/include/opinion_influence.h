#ifndef OPINION_INFLUENCE_H
#define OPINION_INFLUENCE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define OI_TIMING_CONSENSUS 0

#define OI_TIMING_START 1

#define OI_TIMING_UNIFORM 2

typedef enum OiStatus {
  OI_OK = 0,
  OI_NULL_POINTER = 1,
  OI_INVALID_ARGUMENT = 2,
  /**
   * Matrix entries are negative, non-finite, or rows do not sum to 1.
   */
  OI_NOT_STOCHASTIC = 3,
  /**
   * Power iteration hit its iteration cap.
   */
  OI_NO_CONVERGENCE = 4,
  /**
   * The simulation ran out of rounds before reaching consensus.
   */
  OI_NOT_CONVERGED = 5,
  OI_GENERATION_FAILURE = 6,
  OI_PANIC = 7,
} OiStatus;

/**
 * Opaque row-stochastic interaction matrix.
 */
typedef struct OiMatrix OiMatrix;

typedef struct OiReport {
  /**
   * Mean limiting opinion.
   */
  double measured;
  /**
   * `1 - (1 - s lambda)^k` for the combined influence of the targets.
   */
  double predicted;
  double s_combined;
  double abs_error;
  uint64_t rounds_executed;
} OiReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library from the
 * same thread. Never null.
 */
const char *oi_last_error(void);

/**
 * Builds a matrix from `n * n` row-major entries, checking each row sums to
 * 1 within `tol`.
 *
 * # Safety
 * `entries` must point to `n * n` readable doubles and `out` to writable
 * storage for one handle.
 */
enum OiStatus oi_matrix_new(const double *entries, size_t n, double tol, struct OiMatrix **out);

/**
 * Random strongly connected, aperiodic matrix; same seed, same matrix.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum OiStatus oi_matrix_generate(size_t n,
                                 double edge_density,
                                 double self_loop_min,
                                 uint64_t seed,
                                 struct OiMatrix **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void oi_matrix_free(struct OiMatrix *m);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t oi_matrix_dim(const struct OiMatrix *m);

/**
 * Copies the `n * n` row-major entries into `out`, which holds `len` doubles.
 *
 * # Safety
 * `m` must be a live handle and `out` must point to `len` writable doubles.
 */
enum OiStatus oi_matrix_copy_entries(const struct OiMatrix *m, double *out, size_t len);

/**
 * Writes 1 to `out` when every agent reaches every other, else 0.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum OiStatus oi_is_strongly_connected(const struct OiMatrix *m, bool *out);

/**
 * Writes 1 to `out` when the graph has period 1. Fails with
 * `OI_INVALID_ARGUMENT` on a matrix that is not strongly connected.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum OiStatus oi_is_aperiodic(const struct OiMatrix *m, bool *out);

/**
 * Left Perron vector `s` with `s T = s`, `sum(s) = 1`, to `tol` in the
 * infinity norm.
 *
 * # Safety
 * `m` must be a live handle and `out` must point to `len` writable doubles,
 * `len` equal to the matrix dimension.
 */
enum OiStatus oi_social_influence_vector(const struct OiMatrix *m,
                                         double tol,
                                         size_t max_iter,
                                         double *out,
                                         size_t len);

/**
 * `1 - (1 - s lambda)^k`.
 *
 * # Safety
 * `out` must be writable.
 */
enum OiStatus oi_closed_form_influence(uint64_t k, double lambda, double s_combined, double *out);

/**
 * One round with the external agent (opinion 1) present:
 * targeted agents scale their row by `1 - lambda` and add `lambda`.
 *
 * # Safety
 * `m` must be a live handle; `targets` must hold `targets_len` indices;
 * `opinions` and `out` must each hold `n` doubles and may alias.
 */
enum OiStatus oi_step_intervened(const struct OiMatrix *m,
                                 const size_t *targets,
                                 size_t targets_len,
                                 double lambda,
                                 const double *opinions,
                                 double *out,
                                 size_t n);

/**
 * Runs a full simulation from all-zero opinions and compares the limiting
 * mean opinion with the closed form.
 *
 * # Safety
 * `m` must be a live handle, `targets` must hold `targets_len` indices and
 * `out` must be writable.
 */
enum OiStatus oi_simulate(const struct OiMatrix *m,
                          const size_t *targets,
                          size_t targets_len,
                          double lambda,
                          size_t k,
                          uint32_t timing,
                          uint64_t horizon,
                          uint64_t seed,
                          struct OiReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPINION_INFLUENCE_H */
