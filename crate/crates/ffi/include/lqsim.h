#ifndef LQSIM_H
#define LQSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LqStatus {
  LQ_STATUS_OK = 0,
  LQ_STATUS_NULL_POINTER = 1,
  LQ_STATUS_INVALID_ARGUMENT = 2,
  LQ_STATUS_DIMENSION = 3,
  LQ_STATUS_INVALID_INPUT = 4,
  LQ_STATUS_NUMERICAL = 5,
  LQ_STATUS_SCHEMA = 6,
  LQ_STATUS_PANIC = 7,
} LqStatus;

typedef enum LqDecompStatus {
  LQ_DECOMP_STATUS_FEASIBLE = 0,
  LQ_DECOMP_STATUS_INFEASIBLE = 1,
  LQ_DECOMP_STATUS_UNDECIDED = 2,
} LqDecompStatus;

/**
 * Opaque simulation model.
 */
typedef struct LqModel LqModel;

/**
 * Opaque decomposition outcome.
 */
typedef struct LqOutcome LqOutcome;

/**
 * Opaque valid preparation.
 */
typedef struct LqPreparation LqPreparation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread; do not free.
 */
const char *lq_last_error_message(void);

/**
 * Static version string; do not free.
 */
const char *lq_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lq_string_free(char *s);

/**
 * Preparation from a JSON source: `{"positive_map_state": {...}}` or
 * `{"explicit": {...}}`, as in scenario files.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LqStatus lq_preparation_from_json(const char *json, struct LqPreparation **out);

/**
 * Preparation `C = (1 ⊗ √d) C_u (1 ⊗ √d)` from a named unital positive map
 * `u` on `M_n` and a state `d` (`2 * n * n` doubles). `lambda` is read only
 * by `depolarizing`; pass NaN otherwise.
 *
 * # Safety
 * `name` must be NUL-terminated, `state` must hold `2 * n * n` doubles and
 * `out` must be writable.
 */
enum LqStatus lq_preparation_from_map(const char *name,
                                      size_t n,
                                      double lambda,
                                      const double *state,
                                      struct LqPreparation **out);

/**
 * # Safety
 * `p` must be a live handle; the out-pointers must be writable.
 */
enum LqStatus lq_preparation_dims(const struct LqPreparation *p, size_t *dim_a, size_t *dim_b);

/**
 * `ω(Q, R)` for Hermitian `Q` (dim_a) and `R` (dim_b).
 *
 * # Safety
 * `p` must be a live handle, `q` and `r` must hold `2 n^2` doubles for their
 * dimensions and `out` must be writable.
 */
enum LqStatus lq_preparation_eval(const struct LqPreparation *p,
                                  const double *q,
                                  const double *r,
                                  double *out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void lq_preparation_free(struct LqPreparation *p);

/**
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum LqStatus lq_model_build(const struct LqPreparation *p, struct LqModel **out);

/**
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum LqStatus lq_model_support_dim(const struct LqModel *m, size_t *out);

/**
 * `<Ω| ν_A(Q) ν_B(R) |Ω>`.
 *
 * # Safety
 * As for [`lq_preparation_eval`], with a model handle.
 */
enum LqStatus lq_model_simulate_value(const struct LqModel *m,
                                      const double *q,
                                      const double *r,
                                      double *out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void lq_model_free(struct LqModel *m);

/**
 * Decomposability search on the Choi matrix of a named map. `max_iter == 0`
 * keeps the default cap.
 *
 * # Safety
 * `name` must be NUL-terminated and `out` writable.
 */
enum LqStatus lq_decompose_map(const char *name,
                               size_t n,
                               double lambda,
                               size_t max_iter,
                               uint64_t seed,
                               struct LqOutcome **out);

/**
 * # Safety
 * `o` must be a live handle and `out` writable.
 */
enum LqStatus lq_outcome_status(const struct LqOutcome *o, enum LqDecompStatus *out);

/**
 * Witness violation `-<W, C>`; zero unless infeasible.
 *
 * # Safety
 * `o` must be a live handle and `out` writable.
 */
enum LqStatus lq_outcome_violation(const struct LqOutcome *o, double *out);

/**
 * # Safety
 * `o` must be a live handle and `out` writable.
 */
enum LqStatus lq_outcome_iterations(const struct LqOutcome *o, size_t *out);

/**
 * Full outcome as JSON; release with [`lq_string_free`].
 *
 * # Safety
 * `o` must be a live handle and `out` writable.
 */
enum LqStatus lq_outcome_to_json(const struct LqOutcome *o, char **out);

/**
 * # Safety
 * `o` must be null or a handle not yet freed.
 */
void lq_outcome_free(struct LqOutcome *o);

/**
 * Runs a scenario document (which must name its `kind`). `report` receives
 * the report, or an error document when execution fails; `exit_code`
 * receives 0, 1 or 2 as for the command-line tool. The return status only
 * reports problems with the arguments themselves.
 *
 * # Safety
 * `json` must be NUL-terminated; `report` and `exit_code` writable.
 */
enum LqStatus lq_run_scenario_json(const char *json, char **report, int *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LQSIM_H */
