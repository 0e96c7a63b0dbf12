#ifndef RDIAG_H
#define RDIAG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `Ok` is zero; everything else is a failure.
typedef enum RdiagStatus {
  RDIAG_STATUS_OK = 0,
  RDIAG_STATUS_NULL_POINTER = 1,
  RDIAG_STATUS_INVALID_ARGUMENT = 2,
  RDIAG_STATUS_RESOURCE_BOUND = 3,
  RDIAG_STATUS_POLE = 4,
  RDIAG_STATUS_BRANCH_UNDEFINED = 5,
  RDIAG_STATUS_SINGULAR_INVERSE = 6,
  RDIAG_STATUS_NUMERICAL = 7,
  RDIAG_STATUS_OUTSIDE_REGIME = 8,
  RDIAG_STATUS_PARSE = 9,
  RDIAG_STATUS_BUFFER_TOO_SMALL = 10,
  RDIAG_STATUS_PANIC = 11,
} RdiagStatus;

// An operator model. Opaque to C.
typedef struct RdiagModel RdiagModel;

// Output of [`rdiag_resolvent_norm`].
typedef struct RdiagNormResult {
  double lambda;
  double norm;
  double m_lambda;
  double asymptotic;
  double ratio;
  double x_lambda;
  // 0 for a closed-form R-transform, otherwise the truncation order.
  uint32_t truncation_order;
} RdiagNormResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *rdiag_last_error(void);

// Library version as a static NUL-terminated string.
const char *rdiag_version(void);

// Creates a builtin model: `"circular"`, `"haar"` or `"two-atom"`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum RdiagStatus rdiag_model_builtin(const char *name, struct RdiagModel **out);

// Creates a model from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum RdiagStatus rdiag_model_from_json(const char *json, struct RdiagModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from `rdiag_model_*` and not be used afterwards.
void rdiag_model_free(struct RdiagModel *model);

// `v(a) = ‖a‖₄⁴ − 1`.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum RdiagStatus rdiag_model_variance(const struct RdiagModel *model, double *out);

// `‖(λ − a)^{−1}‖` and the quantities around it.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum RdiagStatus rdiag_resolvent_norm(const struct RdiagModel *model,
                                      double lambda,
                                      struct RdiagNormResult *out);

// Exact `m_{−2k−2}` of `|λ − a|²` at a rational `λ` (given as `"p/q"` or a
// finite decimal), written as `"p/q"` into `buf`.
//
// # Safety
// `model` must be a live handle, `lambda` a NUL-terminated string and `buf`
// writable for `len` bytes. `needed` may be null.
enum RdiagStatus rdiag_negative_moment(const struct RdiagModel *model,
                                       const char *lambda,
                                       uint32_t k,
                                       char *buf,
                                       uintptr_t len,
                                       uintptr_t *needed);

// Support `[s⁻, s⁺]` of `|λ − c|²` for the circular operator.
//
// # Safety
// `lo` and `hi` must be valid pointers.
enum RdiagStatus rdiag_circular_support(double lambda, double *lo, double *hi);

// Number of non-crossing partitions of `n` points, by enumeration.
//
// # Safety
// `out` must be a valid pointer.
enum RdiagStatus rdiag_count_nc(uint32_t n, uint64_t *out);

// Number of 4-gon tilings of the `2(k+1)`-gon.
//
// # Safety
// `out` must be a valid pointer.
enum RdiagStatus rdiag_count_tilings(uint32_t k, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDIAG_H */
