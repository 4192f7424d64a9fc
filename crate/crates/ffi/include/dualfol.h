#ifndef DUALFOL_H
#define DUALFOL_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of a call.
 */
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an out-of-range index.
   */
  DF_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Unknown manifold or invalid catalog parameter.
   */
  DF_STATUS_UNKNOWN_NAME = 2,
  /**
   * A point or path left the manifold's domain.
   */
  DF_STATUS_DOMAIN = 3,
  /**
   * The Jacobi family is not self-adjoint.
   */
  DF_STATUS_NOT_SELF_ADJOINT = 4,
  /**
   * A hypothesis of the verifier does not hold (negative curvature).
   */
  DF_STATUS_INAPPLICABLE = 5,
  /**
   * Any other numerical failure.
   */
  DF_STATUS_NUMERICAL = 6,
  /**
   * A panic was caught at the boundary.
   */
  DF_STATUS_INTERNAL = 7,
} DfStatus;

typedef struct DfFamily DfFamily;

typedef struct DfGeodesic DfGeodesic;

typedef struct DfManifold DfManifold;

/**
 * Dimensions and defects of a decomposition.
 */
typedef struct DfDecomposition {
  size_t vanishing;
  size_t parallel;
  double direct_sum_defect;
  double orthogonality_defect;
  /**
   * Negative when the quotient is trivial.
   */
  double quotient_riccati;
  bool passed;
} DfDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *df_last_error(void);

/**
 * Static version string.
 */
const char *df_version(void);

/**
 * Parses a manifold spec such as `sphere(2,1)`.
 *
 * # Safety
 * `spec` must be a nul-terminated string and `out` a valid pointer.
 */
enum DfStatus df_manifold_new(const char *spec, struct DfManifold **out);

/**
 * # Safety
 * `m` must come from `df_manifold_new` and not be used afterwards.
 */
void df_manifold_free(struct DfManifold *m);

/**
 * Intrinsic dimension, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t df_manifold_dim(const struct DfManifold *m);

/**
 * Length of a point representation, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t df_manifold_point_dim(const struct DfManifold *m);

/**
 * Sectional curvature of the plane spanned by `u` and `v` at `x`.
 *
 * # Safety
 * `x` holds `point_dim` values, `u` and `v` hold `dim` values.
 */
enum DfStatus df_manifold_sectional(const struct DfManifold *m,
                                    const double *x,
                                    const double *u,
                                    const double *v,
                                    double *out);

/**
 * Integrates the geodesic through `x0` with direction `v0` (normalized
 * here) over `[t0, t1]`.
 *
 * # Safety
 * `x0` holds `point_dim` values, `v0` holds `dim` values.
 */
enum DfStatus df_geodesic_new(const struct DfManifold *m,
                              const double *x0,
                              const double *v0,
                              double t0,
                              double t1,
                              double step,
                              struct DfGeodesic **out);

/**
 * # Safety
 * `g` must come from `df_geodesic_new` and not be used afterwards.
 */
void df_geodesic_free(struct DfGeodesic *g);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t df_geodesic_len(const struct DfGeodesic *g);

/**
 * Parameter, position and velocity of sample `k`. `x` and `v` may be null.
 *
 * # Safety
 * Non-null `x` holds `point_dim` slots, non-null `v` holds `dim` slots.
 */
enum DfStatus df_geodesic_sample(const struct DfGeodesic *g,
                                 size_t k,
                                 double *t,
                                 double *x,
                                 double *v);

/**
 * Rank of the normal bundle along the geodesic (family size).
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t df_geodesic_normal_rank(const struct DfGeodesic *g);

/**
 * Family with initial frame coefficients `y0`, `y0p` (both `r × r`,
 * column-major, `r` the normal rank). Fails with `NotSelfAdjoint` unless
 * the data are Lagrangian.
 *
 * # Safety
 * `y0` and `y0p` hold `r·r` values.
 */
enum DfStatus df_family_new(const struct DfGeodesic *g,
                            const double *y0,
                            const double *y0p,
                            size_t r,
                            struct DfFamily **out);

/**
 * # Safety
 * `f` must come from `df_family_new` and not be used afterwards.
 */
void df_family_free(struct DfFamily *f);

/**
 * Vanishing/parallel decomposition over the whole path.
 *
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum DfStatus df_family_decompose(const struct DfFamily *f,
                                  uint64_t seed,
                                  struct DfDecomposition *out);

/**
 * Transversal Jacobi residual of the subfamily spanned by the `d` columns
 * of `coeffs` (`r × d`, column-major), probed with the field on which the
 * O'Neill term is most prominent. `control` receives the residual with that
 * term dropped and may be null.
 *
 * # Safety
 * `coeffs` holds `r·d` values.
 */
enum DfStatus df_family_transversal_residual(const struct DfFamily *f,
                                             const double *coeffs,
                                             size_t d,
                                             double *residual,
                                             double *control);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUALFOL_H */
