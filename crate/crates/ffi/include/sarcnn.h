#ifndef SARCNN_H
#define SARCNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values are stable.
 */
typedef enum SarStatus {
  SAR_STATUS_OK = 0,
  SAR_STATUS_INVALID_PARAMETER = 1,
  SAR_STATUS_SHAPE_MISMATCH = 2,
  SAR_STATUS_INVALID_STATE = 3,
  SAR_STATUS_IO = 4,
  SAR_STATUS_FORMAT = 5,
  SAR_STATUS_IMAGE = 6,
  SAR_STATUS_DATASET = 7,
  SAR_STATUS_GENERATION = 8,
  SAR_STATUS_NULL_POINTER = 9,
  SAR_STATUS_BUFFER_TOO_SMALL = 10,
  SAR_STATUS_PANIC = 11,
} SarStatus;

typedef enum SarShapeKind {
  /**
   * `a` = radius.
   */
  SAR_SHAPE_KIND_CIRCLE = 1,
  /**
   * `a` = side.
   */
  SAR_SHAPE_KIND_SQUARE = 2,
  /**
   * `a`, `b` = semi-axes along z1 and z2.
   */
  SAR_SHAPE_KIND_ELLIPSE = 3,
  /**
   * `a` = half diagonal.
   */
  SAR_SHAPE_KIND_RHOMBUS = 4,
} SarShapeKind;

typedef enum SarMode {
  SAR_MODE_RAW = 0,
  SAR_MODE_BACKPROJECTED = 1,
} SarMode;

typedef struct SarDataset SarDataset;

typedef struct SarModel SarModel;

typedef struct SarRawData SarRawData;

typedef struct SarReflectivity SarReflectivity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *sar_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sar_version(void);

/**
 * Creates an all-zero reflectivity map on an `n × n` grid over `[z_min, z_max]²`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SarStatus sar_reflectivity_new(double z_min,
                                    double z_max,
                                    size_t n,
                                    struct SarReflectivity **out);

/**
 * Adds a shape to the map (union). `kind` is a [`SarShapeKind`] value, which
 * also says what `a` and `b` mean.
 *
 * # Safety
 * `map` must come from [`sar_reflectivity_new`].
 */
enum SarStatus sar_reflectivity_add_shape(struct SarReflectivity *map,
                                          uint32_t kind,
                                          double a,
                                          double b,
                                          double center_z1,
                                          double center_z2);

/**
 * Side length of the map's grid.
 *
 * # Safety
 * `map` must be a valid handle or null (returns 0).
 */
size_t sar_reflectivity_size(const struct SarReflectivity *map);

/**
 * Copies the `n × n` map values (row index along z1) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum SarStatus sar_reflectivity_values(const struct SarReflectivity *map, double *buf, size_t len);

/**
 * # Safety
 * `map` must be a handle from this library or null.
 */
void sar_reflectivity_free(struct SarReflectivity *map);

/**
 * Simulates raw data from the standard flight track (radius 20, 100
 * positions, `c0 = 1`) at `height`, with 100 fast-time samples. The result
 * is smoothed when `smoothed` is nonzero.
 *
 * # Safety
 * `map` must be valid; `out` must be a valid pointer.
 */
enum SarStatus sar_simulate(const struct SarReflectivity *map,
                            double height,
                            int32_t paper_times,
                            int32_t smoothed,
                            struct SarRawData **out);

/**
 * Rows (fast-time samples) and columns (antenna positions) of the data.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SarStatus sar_raw_dims(const struct SarRawData *raw, size_t *rows, size_t *cols);

/**
 * Copies the data matrix, row-major, into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum SarStatus sar_raw_values(const struct SarRawData *raw, double *buf, size_t len);

/**
 * Backprojects smoothed data onto an `n × n` grid over `[z_min, z_max]²`
 * and writes the `[0, 1]` image into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum SarStatus sar_backproject(const struct SarRawData *raw,
                               double z_min,
                               double z_max,
                               size_t n,
                               double tol,
                               double *buf,
                               size_t len);

/**
 * # Safety
 * `raw` must be a handle from this library or null.
 */
void sar_raw_free(struct SarRawData *raw);

/**
 * Generates the four-class shape dataset with default simulation settings.
 * `mode` is a [`SarMode`] value.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SarStatus sar_dataset_generate_shapes(size_t n_per_class,
                                           double height,
                                           uint32_t mode,
                                           uint64_t seed,
                                           struct SarDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum SarStatus sar_dataset_load(const char *path, struct SarDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SarStatus sar_dataset_save(const struct SarDataset *ds, const char *path);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be a valid handle or null.
 */
size_t sar_dataset_len(const struct SarDataset *ds);

/**
 * Side of the square inputs, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be a valid handle or null.
 */
size_t sar_dataset_input_size(const struct SarDataset *ds);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be a valid handle or null.
 */
size_t sar_dataset_class_count(const struct SarDataset *ds);

/**
 * Copies sample `index` into `buf` (row-major, `P²` floats) and its 1-based label into `label`.
 *
 * # Safety
 * `buf` must hold `len` floats; `label` must be valid.
 */
enum SarStatus sar_dataset_sample(const struct SarDataset *ds,
                                  size_t index,
                                  uint8_t *label,
                                  float *buf,
                                  size_t len);

/**
 * # Safety
 * `ds` must be a handle from this library or null.
 */
void sar_dataset_free(struct SarDataset *ds);

/**
 * Trains a network (`K_f = 13`, `filters` filters) on the dataset's training
 * split with ADAM defaults apart from the given rate, batch size and epochs.
 *
 * # Safety
 * `ds` must be valid; `out` a valid pointer.
 */
enum SarStatus sar_model_train(const struct SarDataset *ds,
                               size_t filters,
                               size_t epochs,
                               double learning_rate,
                               size_t batch_size,
                               uint64_t seed,
                               struct SarModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum SarStatus sar_model_load(const char *path, struct SarModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SarStatus sar_model_save(const struct SarModel *model, const char *path);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a valid handle or null.
 */
size_t sar_model_class_count(const struct SarModel *model);

/**
 * Inference-mode class probabilities for one `P × P` input.
 *
 * # Safety
 * `input` must hold `input_len` floats and `probs` `probs_len` doubles.
 */
enum SarStatus sar_model_predict(const struct SarModel *model,
                                 const float *input,
                                 size_t input_len,
                                 double *probs,
                                 size_t probs_len);

/**
 * Test-split accuracy in `[0, 1]`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SarStatus sar_model_evaluate(const struct SarModel *model,
                                  const struct SarDataset *ds,
                                  uint64_t seed,
                                  double *accuracy);

/**
 * # Safety
 * `model` must be a handle from this library or null.
 */
void sar_model_free(struct SarModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SARCNN_H */
