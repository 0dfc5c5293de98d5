#ifndef RESILIENT_SCHWARZ_H
#define RESILIENT_SCHWARZ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RscMethod {
  RSC_METHOD_PSC = 0,
  RSC_METHOD_SSC = 1,
  RSC_METHOD_SRSC = 2,
  RSC_METHOD_PRSC = 3,
} RscMethod;

typedef enum RscStatus {
  RSC_STATUS_OK = 0,
  RSC_STATUS_NULL_POINTER = 1,
  RSC_STATUS_INVALID_ARGUMENT = 2,
  RSC_STATUS_DIMENSION = 3,
  RSC_STATUS_NUMERICAL = 4,
  RSC_STATUS_PAIR_FAILURE = 5,
  RSC_STATUS_IO = 6,
  RSC_STATUS_NOT_CONVERGED = 7,
  RSC_STATUS_PANIC = 8,
} RscStatus;

/**
 * Configured method and fault schedule bound to one system.
 */
typedef struct RscSolver RscSolver;

/**
 * Sparse linear system `A u = f`.
 */
typedef struct RscSystem RscSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rsc_last_error_message(void);

/**
 * Finite-difference Poisson system on a `dims[0] x ... x dims[n_dims-1]`
 * interior grid (1 to 3 axes) with an all-ones right-hand side.
 *
 * # Safety
 * `dims` must point to `n_dims` values and `out` must be writable.
 */
enum RscStatus rsc_system_poisson(const size_t *dims, size_t n_dims, struct RscSystem **out);

/**
 * System from a square CSR matrix. `rhs` may be null for all ones.
 *
 * # Safety
 * `row_offsets` holds `n + 1` entries, `col_indices` and `values` hold
 * `row_offsets[n]` entries, `rhs` is null or holds `n` entries.
 */
enum RscStatus rsc_system_from_csr(size_t n,
                                   const size_t *row_offsets,
                                   const size_t *col_indices,
                                   const double *values,
                                   const double *rhs,
                                   struct RscSystem **out);

/**
 * System from a Matrix Market coordinate file, right-hand side all ones.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` writable.
 */
enum RscStatus rsc_system_load_mtx(const char *path, struct RscSystem **out);

/**
 * # Safety
 * `system` must be null or a handle from an `rsc_system_*` constructor
 * that has not been freed.
 */
void rsc_system_free(struct RscSystem *system);

/**
 * # Safety
 * `system` must be a live handle and `n` writable.
 */
enum RscStatus rsc_system_size(const struct RscSystem *system, size_t *n);

/**
 * Solver over `n_ranks` contiguous subdomains with `overlap` layers and a
 * method code from [`RscMethod`]. The system is copied, so it may be freed
 * afterwards. `stationary` nonzero iterates the method directly (ssc and
 * srsc only) instead of FGMRES(30).
 *
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum RscStatus rsc_solver_new(const struct RscSystem *system,
                              size_t n_ranks,
                              size_t overlap,
                              int32_t method,
                              int32_t stationary,
                              struct RscSolver **out);

/**
 * Schedules a permanent fail-stop of `rank` from outer iteration
 * `at_iteration` (0 means failed from the start).
 *
 * # Safety
 * `solver` must be a live handle.
 */
enum RscStatus rsc_solver_set_failed(struct RscSolver *solver, size_t rank, size_t at_iteration);

/**
 * Solves from a zero initial guess to relative residual `tol`. The
 * iterate is written to `x` (length `x_len` = system size) even when the
 * tolerance is missed, in which case `RSC_STATUS_NOT_CONVERGED` is
 * returned. `iterations` and `relres` may be null.
 *
 * # Safety
 * `solver` must be a live handle, `x` must hold `x_len` values.
 */
enum RscStatus rsc_solver_solve(struct RscSolver *solver,
                                double tol,
                                size_t max_iters,
                                double *x,
                                size_t x_len,
                                size_t *iterations,
                                double *relres);

/**
 * # Safety
 * `solver` must be null or a live handle from [`rsc_solver_new`].
 */
void rsc_solver_free(struct RscSolver *solver);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESILIENT_SCHWARZ_H */
