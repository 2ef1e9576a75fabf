#ifndef LCBOUND_H
#define LCBOUND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum LcbStatus {
  LCB_STATUS_OK = 0,
  LCB_STATUS_NULL_POINTER = 1,
  LCB_STATUS_INVALID_ARGUMENT = 2,
  LCB_STATUS_DOMAIN = 3,
  LCB_STATUS_TOLERANCE_UNREACHABLE = 4,
  LCB_STATUS_HYPOTHESIS_VIOLATED = 5,
  LCB_STATUS_NUMERICAL = 6,
  LCB_STATUS_BUFFER_TOO_SMALL = 7,
  LCB_STATUS_PANIC = 8,
} LcbStatus;

// Opaque handle to the zeta example with fixed `(beta1, beta2, beta0)`.
typedef struct LcbSpecialCase LcbSpecialCase;

// Opaque handle to a stationary distribution on levels `0..=n`.
typedef struct LcbStationary LcbStationary;

// Closed-form constants of the zeta example.
typedef struct LcbSpecialConstants {
  double kappa;
  double epsilon;
  double delta0;
  double x0;
  double rho;
  double c1;
  double c2;
  uint64_t k;
  double b;
  double big_b;
  double c_breve;
  double sigma;
  double sigma1;
} LcbSpecialConstants;

// The two terms of a bound and their sum.
typedef struct LcbBound {
  double m;
  double n;
  double bound;
  double term_mixing;
  double term_truncation;
} LcbBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` as a NUL-terminated string,
// truncating if needed. Returns the full message length excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t lcb_last_error_message(char *buf, size_t len);

// Static name of a status code.
const char *lcb_status_name(enum LcbStatus status);

// Builds the example. Requires `2 < beta1 < beta2`, `1 < beta0 < beta1 - 1` and a positive
// `kappa`.
//
// # Safety
// `out` must be null or valid for writes. On success `*out` owns a handle to release with
// [`lcb_special_case_free`].
enum LcbStatus lcb_special_case_new(double beta1,
                                    double beta2,
                                    double beta0,
                                    struct LcbSpecialCase **out);

// # Safety
// `h` must be null or a handle from [`lcb_special_case_new`] not yet freed.
void lcb_special_case_free(struct LcbSpecialCase *h);

// # Safety
// `h` must be a live handle and `out` valid for writes.
enum LcbStatus lcb_special_case_constants(const struct LcbSpecialCase *h,
                                          struct LcbSpecialConstants *out);

// Closed-form bound at integer-valued `(m, n)`.
//
// # Safety
// `h` must be a live handle and `out` valid for writes.
enum LcbStatus lcb_special_case_bound(const struct LcbSpecialCase *h,
                                      double m,
                                      double n,
                                      struct LcbBound *out);

// `(m0, n0)` with bound at most `tolerance`, which must lie in `(0, 2)`.
//
// # Safety
// `h` must be a live handle; `m0` and `n0` valid for writes.
enum LcbStatus lcb_special_case_plan(const struct LcbSpecialCase *h,
                                     double tolerance,
                                     double *m0,
                                     double *n0);

// Stationary distribution of the truncation at level `n` of `P`, or of `P_N` when
// `fold > 0`.
//
// # Safety
// `h` must be a live handle and `out` valid for writes. On success `*out` owns a handle to
// release with [`lcb_stationary_free`].
enum LcbStatus lcb_special_case_stationary(const struct LcbSpecialCase *h,
                                           size_t n,
                                           size_t fold,
                                           struct LcbStationary **out);

// Stationary distribution of a dense row-major stochastic matrix with `phases` states per
// level.
//
// # Safety
// `data` must point to `states * states` readable doubles and `out` be valid for writes.
enum LcbStatus lcb_stationary_from_dense(size_t states,
                                         size_t phases,
                                         const double *data,
                                         struct LcbStationary **out);

// # Safety
// `h` must be null or a live handle.
void lcb_stationary_free(struct LcbStationary *h);

// Number of entries (levels times phases); 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
size_t lcb_stationary_len(const struct LcbStationary *h);

// Phases per level; 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
size_t lcb_stationary_phases(const struct LcbStationary *h);

// Copies the entries, level-major, into `buf` of length `len`.
//
// # Safety
// `h` must be a live handle and `buf` point to `len` writable doubles.
enum LcbStatus lcb_stationary_copy(const struct LcbStationary *h, double *buf, size_t len);

// Total variation distance, the shorter vector padded with zeros.
//
// # Safety
// `a` and `b` must be live handles and `out` valid for writes.
enum LcbStatus lcb_total_variation(const struct LcbStationary *a,
                                   const struct LcbStationary *b,
                                   double *out);

// Bound `8 v(1, varpi) / r_phi(m - 1) + 2 m b sum_i 1 / phi(v(n, i))` with
// `phi(t) = kappa beta0 t^{1 - 1/beta0}`.
//
// # Safety
// `phi_v_n` must point to `phases` readable doubles and `out` be valid for writes.
enum LcbStatus lcb_bound_main_b(double m,
                                double n,
                                double v1_varpi,
                                double kappa,
                                double beta0,
                                double b,
                                const double *phi_v_n,
                                size_t phases,
                                struct LcbBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCBOUND_H */
