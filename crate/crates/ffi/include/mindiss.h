#ifndef MINDISS_H
#define MINDISS_H

/* Generated from the Rust sources by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_DOMAIN = 3,
  MD_STATUS_NON_CONVERGENCE = 4,
  MD_STATUS_NUMERICAL = 5,
  MD_STATUS_BUFFER_TOO_SMALL = 6,
  MD_STATUS_PANIC = 7,
} MdStatus;

// Opaque geodesic handle.
typedef struct MdGeodesic MdGeodesic;

// Opaque model handle.
typedef struct MdModel MdModel;

// Dissipation summary of a geodesic. `landauer_reference` is NaN for
// models without a spin count.
typedef struct MdReport {
  double length;
  double w_diss;
  double delta_f;
  double work_total;
  double work_variance;
  double landauer_reference;
  bool converged;
  size_t samples;
  size_t n_params;
} MdReport;

typedef struct MdPyramidBound {
  double length_bound;
  double w_diss_bound;
  uint64_t n_total;
  double w_diss_asymptotic;
} MdPyramidBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *md_version(void);

// Message of the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *md_last_error(void);

// Builds a model from a JSON description such as
// `{"model": "all_to_all", "N": 10}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum MdStatus md_model_from_json(const char *json, struct MdModel **out);

// # Safety
// `model` must be null or a handle from [`md_model_from_json`] not yet freed.
void md_model_free(struct MdModel *model);

// Number of control parameters, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t md_model_n_params(const struct MdModel *model);

// # Safety
// `model` must be a live handle, `point` must hold `len` doubles and `out`
// must be writable.
enum MdStatus md_model_ln_z(const struct MdModel *model,
                            const double *point,
                            size_t len,
                            double beta,
                            double *out);

// Writes the `n x n` metric in row-major order into `out`, which must hold
// `out_len >= n * n` doubles.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum MdStatus md_model_metric(const struct MdModel *model,
                              const double *point,
                              size_t len,
                              double beta,
                              double *out,
                              size_t out_len);

// Shoots the optimal protocol from the origin to field `eps_final` (and
// zero coupling for two-parameter models). `steps = 0` keeps the default
// resolution. A non-converged solution is still returned, with status
// `MD_STATUS_NON_CONVERGENCE`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum MdStatus md_shoot(const struct MdModel *model,
                       double eps_final,
                       double beta,
                       double tau,
                       size_t steps,
                       struct MdGeodesic **out);

// # Safety
// `geodesic` must be a live handle and `out` writable.
enum MdStatus md_geodesic_report(const struct MdGeodesic *geodesic, struct MdReport *out);

// Copies sample times into `times` (`capacity` doubles) and parameters,
// row-major, into `params` (`capacity * n_params` doubles). Fails with
// `MD_STATUS_BUFFER_TOO_SMALL` when `capacity` is below the sample count.
//
// # Safety
// Buffers must be writable for the stated sizes.
enum MdStatus md_geodesic_copy(const struct MdGeodesic *geodesic,
                               double *times,
                               double *params,
                               size_t capacity);

// # Safety
// `geodesic` must be null or a handle from [`md_shoot`] not yet freed.
void md_geodesic_free(struct MdGeodesic *geodesic);

// Hellinger angle `2 arccos sum sqrt(p_i q_i)` between two distributions.
//
// # Safety
// `p` and `q` must hold `len` doubles; `out` must be writable.
enum MdStatus md_hellinger_angle(const double *p, const double *q, size_t len, double *out);

// Minimal dissipation over all protocols with full control of the levels.
//
// # Safety
// `p` and `q` must hold `len` doubles; `out` must be writable.
enum MdStatus md_fundamental_wdiss(const double *p,
                                   const double *q,
                                   size_t len,
                                   double tau,
                                   double beta,
                                   double *out);

// # Safety
// `out` must be writable.
enum MdStatus md_pyramid_bound(size_t layers,
                               size_t aperture,
                               size_t base,
                               size_t dimension,
                               double tau,
                               double beta,
                               struct MdPyramidBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINDISS_H */
