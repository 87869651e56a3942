#ifndef REGCCA_H
#define REGCCA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Bit flags reported by [`regcca_estimate_flags`].
#define REGCCA_FLAG_DEGENERATE 1

#define REGCCA_FLAG_RANK_DEFICIENT 2

#define REGCCA_FLAG_NOT_CONVERGED 4

typedef enum RegccaEstimator {
  REGCCA_ESTIMATOR_RCCA = 0,
  REGCCA_ESTIMATOR_SPLS = 1,
  REGCCA_ESTIMATOR_SCCA = 2,
  REGCCA_ESTIMATOR_GCCA = 3,
} RegccaEstimator;

typedef enum RegccaStatus {
  REGCCA_STATUS_OK = 0,
  REGCCA_STATUS_NULL_POINTER = 1,
  REGCCA_STATUS_INVALID_INPUT = 2,
  REGCCA_STATUS_CONVERGENCE = 3,
  REGCCA_STATUS_NUMERICAL = 4,
  REGCCA_STATUS_PANIC = 5,
} RegccaStatus;

// Opaque paired dataset.
typedef struct RegccaDataset RegccaDataset;

// Opaque fitted estimate.
typedef struct RegccaEstimate RegccaEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread (empty after a success).
// The pointer stays valid until the next call on the same thread.
const char *regcca_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *regcca_version(void);

// Build a dataset from `x` (`n × p`) and `y` (`n × q`), both column-major.
// The data are copied and column-centred.
//
// # Safety
// `x` and `y` must point to `n*p` and `n*q` readable doubles; `out` must be writable.
enum RegccaStatus regcca_dataset_new(const double *x,
                                     const double *y,
                                     size_t n,
                                     size_t p,
                                     size_t q,
                                     struct RegccaDataset **out);

// # Safety
// `data` must come from [`regcca_dataset_new`] and not be freed twice. Null is ignored.
void regcca_dataset_free(struct RegccaDataset *data);

// Fit `k` canonical pairs with the chosen estimator and penalty.
//
// # Safety
// `data` must be a live dataset handle; `out` must be writable.
enum RegccaStatus regcca_fit(const struct RegccaDataset *data,
                             enum RegccaEstimator estimator,
                             double penalty,
                             size_t k,
                             struct RegccaEstimate **out);

// # Safety
// `est` must come from [`regcca_fit`] and not be freed twice. Null is ignored.
void regcca_estimate_free(struct RegccaEstimate *est);

// Number of pairs, and the two view dimensions.
//
// # Safety
// `est` must be a live handle; each output pointer may be null.
enum RegccaStatus regcca_estimate_dims(const struct RegccaEstimate *est,
                                       size_t *k,
                                       size_t *p,
                                       size_t *q);

// Copy the `k` canonical correlations into `out` (capacity `len`).
//
// # Safety
// `est` must be a live handle; `out` must hold `len` doubles.
enum RegccaStatus regcca_estimate_rho(const struct RegccaEstimate *est, double *out, size_t len);

// Copy the `p × k` X-view directions (column-major) into `out`.
//
// # Safety
// `est` must be a live handle; `out` must hold `len` doubles.
enum RegccaStatus regcca_estimate_u(const struct RegccaEstimate *est, double *out, size_t len);

// Copy the `q × k` Y-view directions (column-major) into `out`.
//
// # Safety
// `est` must be a live handle; `out` must hold `len` doubles.
enum RegccaStatus regcca_estimate_v(const struct RegccaEstimate *est, double *out, size_t len);

// Bitwise OR of the `REGCCA_FLAG_*` constants.
//
// # Safety
// `est` must be a live handle; `out` must be writable.
enum RegccaStatus regcca_estimate_flags(const struct RegccaEstimate *est, uint32_t *out);

// Graphical lasso on the `d × d` covariance `c`, writing the precision
// estimate (column-major) into `omega_out`.
//
// # Safety
// `c` must hold `d*d` doubles and `omega_out` must hold `d*d` writable doubles.
enum RegccaStatus regcca_glasso(const double *c, size_t d, double lambda, double *omega_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGCCA_H */
