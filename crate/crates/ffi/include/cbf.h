#ifndef CBF_H
#define CBF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CbfStatus {
  CBF_STATUS_OK = 0,
  CBF_STATUS_NULL_POINTER = 1,
  CBF_STATUS_VALIDATION = 2,
  CBF_STATUS_NUMERIC = 3,
  CBF_STATUS_PANIC = 4,
} CbfStatus;

// Opaque kernel pair.
typedef struct CbfPair CbfPair;

// Kernel values at one point.
typedef struct CbfKernelValues {
  double tail;
  double density;
  double tail_primitive;
  double potential;
} CbfKernelValues;

// Series diagnostics of a solve.
typedef struct CbfDiagnostics {
  size_t terms_used;
  double tail_bound;
  double residual;
  double q;
  double bound_excess;
} CbfDiagnostics;

// A Monte Carlo estimate.
typedef struct CbfEstimate {
  double estimate;
  double stderr;
  size_t n;
} CbfEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Stable pair with index `alpha` in (0, 1).
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle to free
// with `cbf_pair_free`.
enum CbfStatus cbf_pair_new_stable(double alpha, struct CbfPair **out_pair);

// Pair from a JSON Bernstein specification, e.g.
// `{"family": "tempered_stable", "alpha": 0.5, "theta": 1.0}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out_pair` a valid pointer.
enum CbfStatus cbf_pair_new_from_json(const char *json, struct CbfPair **out_pair);

// Releases a handle; null is ignored.
//
// # Safety
// `pair` must come from a constructor of this library and not be used again.
void cbf_pair_free(struct CbfPair *pair);

// Contraction constant `q` of the pair.
//
// # Safety
// Pointers must be valid.
enum CbfStatus cbf_pair_q(const struct CbfPair *pair, double *out_q);

// Tail, density, tail primitive and potential at `x > 0`.
//
// # Safety
// Pointers must be valid.
enum CbfStatus cbf_pair_eval(const struct CbfPair *pair,
                             double x,
                             struct CbfKernelValues *out_values);

// Largest deviation of `μ̄ ∗ k` from 1 on `n` cells of `[0, t_end]`.
//
// # Safety
// Pointers must be valid.
enum CbfStatus cbf_verify_sonine(const struct CbfPair *pair,
                                 double t_end,
                                 size_t n,
                                 double *out_deviation);

// Homogeneous resolvent solution on `n` cells of `[0, t_end]`; `out_values`
// must hold `n + 1` values. `out_diagnostics` may be null.
//
// # Safety
// Pointers must be valid and `out_values` must have room for `len` values.
enum CbfStatus cbf_solve_resolvent(const struct CbfPair *pair,
                                   double t_end,
                                   size_t n,
                                   double lambda,
                                   double phi0,
                                   double tol,
                                   double *out_values,
                                   size_t len,
                                   struct CbfDiagnostics *out_diagnostics);

// Censored initial value problem with source values `g` at the `n + 1`
// nodes of `[0, t_end]`.
//
// # Safety
// `g` and `out_values` must each hold `len = n + 1` values.
enum CbfStatus cbf_solve_ivp(const struct CbfPair *pair,
                             double t_end,
                             size_t n,
                             const double *g,
                             double phi0,
                             double tol,
                             double *out_values,
                             size_t len,
                             struct CbfDiagnostics *out_diagnostics);

// `E^x[τ_∞]` from `n_chains` exact undershoot chains.
//
// # Safety
// Pointers must be valid.
enum CbfStatus cbf_estimate_lifetime_mean(const struct CbfPair *pair,
                                          double x0,
                                          size_t n_chains,
                                          uint64_t seed,
                                          struct CbfEstimate *out_estimate);

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next call into this library from the same thread.
const char *cbf_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBF_H */
