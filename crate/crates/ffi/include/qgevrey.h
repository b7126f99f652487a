#ifndef QGEVREY_H
#define QGEVREY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
enum QgStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  QG_STATUS_OK = 0,
  QG_STATUS_NULL_POINTER = 1,
  QG_STATUS_INVALID_ARGUMENT = 2,
  QG_STATUS_OUTSIDE_DOMAIN = 3,
  QG_STATUS_CERTIFICATION_FAILED = 4,
  QG_STATUS_NUMERICAL = 5,
  QG_STATUS_PARSE = 6,
  QG_STATUS_PANIC = 7,
};
#ifndef __cplusplus
typedef int32_t QgStatus;
#endif // __cplusplus

// Opaque scenario handle.
typedef struct QgScenario QgScenario;

// Opaque theta function handle.
typedef struct QgTheta QgTheta;

// A complex number as two doubles.
typedef struct QgComplex {
  double re;
  double im;
} QgComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Pointer to the last error message of this thread, or null. The string
// stays valid until the next failing call on the same thread.
const char *qg_last_error_message(void);

// Creates a theta handle for `(q, k)` with its growth constant calibrated.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle pointer.
QgStatus qg_theta_new(double q, double k, struct QgTheta **out);

// Releases a theta handle. Null is accepted.
//
// # Safety
// `h` must come from [`qg_theta_new`] and not be used afterwards.
void qg_theta_free(struct QgTheta *h);

// Evaluates theta at `z`.
//
// # Safety
// `h` must be a live handle and `out` writable.
QgStatus qg_theta_eval(const struct QgTheta *h, struct QgComplex z, struct QgComplex *out);

// Relative residual of the q-difference equation after `m` shifts.
//
// # Safety
// `h` must be a live handle and `out` writable.
QgStatus qg_theta_qdiff_residual(const struct QgTheta *h,
                                 struct QgComplex z,
                                 int32_t m,
                                 double *out);

// Creates the built-in two-level scenario.
//
// # Safety
// `out` must be writable.
QgStatus qg_scenario_default(struct QgScenario **out);

// Parses and validates a scenario from a NUL-terminated JSON string.
//
// # Safety
// `json` must be a valid C string and `out` writable.
QgStatus qg_scenario_from_json(const char *json, struct QgScenario **out);

// Releases a scenario handle. Null is accepted.
//
// # Safety
// `h` must come from a scenario constructor and not be used afterwards.
void qg_scenario_free(struct QgScenario *h);

// Number of directions (and overlaps) in the scenario.
//
// # Safety
// `h` must be a live handle and `out` writable.
QgStatus qg_scenario_len(const struct QgScenario *h, uintptr_t *out);

// Writes 1 if overlap `p` is of intersecting type and 0 if disjoint.
//
// # Safety
// `h` must be a live handle and `out` writable.
QgStatus qg_scenario_overlap_intersecting(const struct QgScenario *h, uintptr_t p, int32_t *out);

// Sectorial solution `u_p(t, z, eps)` with its quadrature error estimate.
//
// # Safety
// `h` must be a live handle; `out` and `err` writable (`err` may be null).
QgStatus qg_scenario_solution(const struct QgScenario *h,
                              uintptr_t p,
                              struct QgComplex t,
                              struct QgComplex z,
                              struct QgComplex eps,
                              struct QgComplex *out,
                              double *err);

// Constant `c` with `L(u^n)(T) = c T^n` for the transform of order `k`
// along direction `d`.
//
// # Safety
// `out` must be writable.
QgStatus qg_qlaplace_monomial_constant(double q,
                                       double k,
                                       double d,
                                       uint32_t n,
                                       struct QgComplex *out);

// Inverse Fourier transform of a built-in symbol (`"expdecay"`, `"odd"` or
// `"gaussian"`) at `z` in the strip `|Im z| < beta_prime`.
//
// # Safety
// `symbol` must be a valid C string; `out` writable.
QgStatus qg_inverse_fourier(const char *symbol,
                            double beta_prime,
                            struct QgComplex z,
                            struct QgComplex *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QGEVREY_H */
