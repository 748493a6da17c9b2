#ifndef AVGPROC_H
#define AVGPROC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AvgStatus {
  AVG_STATUS_OK = 0,
  AVG_STATUS_NULL_POINTER = 1,
  AVG_STATUS_INVALID_PARAMETER = 2,
  AVG_STATUS_UNSUPPORTED = 3,
  AVG_STATUS_NUMERICAL = 4,
  AVG_STATUS_PANIC = 5,
} AvgStatus;

/**
 * Part of `K_{m,n-m}` holding the starting vertex.
 */
typedef enum AvgSide {
  /**
   * The `m` vertices of the smaller part.
   */
  AVG_SIDE_C1 = 1,
  AVG_SIDE_C2 = 2,
} AvgSide;

/**
 * Opaque graph handle.
 */
typedef struct AvgGraph AvgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Hypercube `{0,1}^d`, `1 <= d <= 30`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum AvgStatus avg_graph_hypercube(uint32_t d, struct AvgGraph **out);

/**
 * Complete bipartite graph with parts of sizes `m <= k`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum AvgStatus avg_graph_complete_bipartite(size_t m, size_t k, struct AvgGraph **out);

/**
 * Complete graph on `n` vertices.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum AvgStatus avg_graph_complete(size_t n, struct AvgGraph **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `g` must be null or a handle from an `avg_graph_*` constructor that has
 * not been freed.
 */
void avg_graph_free(struct AvgGraph *g);

/**
 * # Safety
 * `g` must be null or a live handle; `n` and `edges` null or writable.
 */
enum AvgStatus avg_graph_size(const struct AvgGraph *g, size_t *n, size_t *edges);

/**
 * Monte Carlo `E ||eta_t/pi - 1||_p^p` from a unit mass at `start`.
 * Deterministic for a given `seed`, whatever the thread count.
 *
 * # Safety
 * `g` must be null or a live handle; out pointers null or writable.
 */
enum AvgStatus avg_mean_lp(const struct AvgGraph *g,
                           size_t start,
                           double t,
                           uint32_t p,
                           size_t replicas,
                           uint64_t seed,
                           double *mean,
                           double *std_error);

/**
 * Exact `E ||eta_t/pi - 1||_2^2` on `K_{m,n-m}` from a vertex on `side`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum AvgStatus avg_bipartite_exact_l2(size_t m, size_t n, enum AvgSide side, double t, double *out);

/**
 * Window time, exact distance and limiting profile at offset `a`.
 *
 * # Safety
 * Out pointers must be null or writable.
 */
enum AvgStatus avg_bipartite_profile(size_t m,
                                     size_t n,
                                     double a,
                                     double *time,
                                     double *exact,
                                     double *predicted);

/**
 * Smallest nonzero eigenvalue of the lumped pair chain on `K_{m,n-m}`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum AvgStatus avg_bipartite_rho1(size_t m, size_t n, double *out);

/**
 * Exact hypercube `E ||eta_t/pi - 1||_2^2` from a vertex. `value` may be
 * `+inf` for large `d` and small `t`; `log1p_value` is always finite.
 *
 * # Safety
 * Out pointers must be null or writable.
 */
enum AvgStatus avg_hypercube_exact_l2(uint32_t d, double t, double *value, double *log1p_value);

/**
 * Hardy constant `C_M` of the urn chain, `1 <= big_m <= d/2`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum AvgStatus avg_hardy_constant(uint32_t d, size_t big_m, double *out);

/**
 * Message for the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *avg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *avg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AVGPROC_H */
