#ifndef PROJRES_H
#define PROJRES_H

/* Generated with cbindgen:0.26.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PrMethod {
  PR_METHOD_RETRAIN = 0,
  PR_METHOD_NEWTON = 1,
  PR_METHOD_INFLUENCE = 2,
  PR_METHOD_GRADIENT = 3,
  PR_METHOD_RESIDUAL = 4,
} PrMethod;

typedef enum PrStatus {
  PR_STATUS_OK = 0,
  PR_STATUS_NULL_POINTER = 1,
  PR_STATUS_INVALID_ARGUMENT = 2,
  PR_STATUS_DIMENSION_MISMATCH = 3,
  PR_STATUS_DATA_ERROR = 4,
  PR_STATUS_SINGULAR = 5,
  PR_STATUS_INVALID_DELETION = 6,
  PR_STATUS_DEGENERATE_DELETION = 7,
  PR_STATUS_IO = 8,
  PR_STATUS_PANIC = 9,
} PrStatus;

/**
 * Owned training data.
 */
typedef struct PrDataset PrDataset;

/**
 * Ridge model with its precomputed hat state and a copy of its training data.
 */
typedef struct PrModel PrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pr_version(void);

/**
 * Message for the last failed call on this thread, or an empty string.
 * Valid until the next library call on the same thread.
 */
const char *pr_last_error_message(void);

/**
 * Copies a row-major `n × d` matrix and `n` labels into a new dataset.
 */
enum PrStatus pr_dataset_new(const double *x,
                             const double *y,
                             size_t n,
                             size_t d,
                             struct PrDataset **out);

/**
 * Loads a numeric CSV whose last column is the label.
 */
enum PrStatus pr_dataset_load_csv(const char *path, bool has_header, struct PrDataset **out);

/**
 * Seeded synthetic sparse dataset with `n` rows and `d` features.
 */
enum PrStatus pr_dataset_generate(size_t n,
                                  size_t d,
                                  double p,
                                  uint64_t seed,
                                  struct PrDataset **out);

/**
 * Number of rows, or 0 for a null handle.
 */
size_t pr_dataset_rows(const struct PrDataset *data);

/**
 * Number of features, or 0 for a null handle.
 */
size_t pr_dataset_cols(const struct PrDataset *data);

/**
 * Releases a dataset. Null is ignored.
 */
void pr_dataset_free(struct PrDataset *data);

/**
 * Trains a ridge model and precomputes its hat state. The dataset is copied
 * and may be freed afterwards.
 */
enum PrStatus pr_model_train(const struct PrDataset *data, double lambda, struct PrModel **out);

/**
 * Parameter count, or 0 for a null handle.
 */
size_t pr_model_dim(const struct PrModel *model);

/**
 * Copies θ into `out`, which must hold exactly `pr_model_dim` values.
 */
enum PrStatus pr_model_theta(const struct PrModel *model, double *out, size_t len);

/**
 * Prediction `θᵀx` for one feature vector of length `pr_model_dim`.
 */
enum PrStatus pr_model_predict(const struct PrModel *model,
                               const double *x,
                               size_t len,
                               double *out);

/**
 * Parameters after deleting rows `indices[0..k]` with `method`, one of the
 * `PrMethod` values.
 *
 * `alpha` is the gradient-method step size; pass NaN for the default.
 * The updated θ is written to `theta_out` (length `pr_model_dim`) and the
 * timed wall-clock seconds to `seconds_out` when it is non-null. The model
 * itself is not modified.
 */
enum PrStatus pr_model_unlearn(const struct PrModel *model,
                               uint32_t method,
                               const size_t *indices,
                               size_t k,
                               double alpha,
                               double *theta_out,
                               size_t len,
                               double *seconds_out);

/**
 * Releases a model. Null is ignored.
 */
void pr_model_free(struct PrModel *model);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* PROJRES_H */
