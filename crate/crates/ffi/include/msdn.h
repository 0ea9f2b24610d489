#ifndef MSDN_H
#define MSDN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The numeric values of the core error kinds match the
 * command-line tool's exit codes.
 */
typedef enum MsdnStatus {
  MSDN_STATUS_OK = 0,
  /**
   * Bad argument, unreadable or unwritable file.
   */
  MSDN_STATUS_ARGUMENT = 2,
  /**
   * Malformed or invalid dataset/checkpoint.
   */
  MSDN_STATUS_DATA = 3,
  /**
   * Non-finite loss or parameters.
   */
  MSDN_STATUS_NUMERIC = 4,
  /**
   * Dimension mismatch.
   */
  MSDN_STATUS_SHAPE = 5,
  /**
   * Gradient check failure.
   */
  MSDN_STATUS_GRADIENT = 6,
  /**
   * A required pointer argument was null.
   */
  MSDN_STATUS_NULL_POINTER = 7,
  /**
   * Internal panic caught at the boundary.
   */
  MSDN_STATUS_PANIC = 8,
} MsdnStatus;

/**
 * Opaque dataset handle.
 */
typedef struct MsdnDataset MsdnDataset;

/**
 * Opaque handle to trained model parameters.
 */
typedef struct MsdnModel MsdnModel;

typedef struct MsdnDatasetInfo {
  size_t images;
  size_t regions;
  size_t visual_dim;
  size_t attributes;
  size_t attr_dim;
  size_t seen_classes;
  size_t unseen_classes;
  size_t train_samples;
  size_t test_seen_samples;
  size_t test_unseen_samples;
} MsdnDatasetInfo;

/**
 * Evaluation results. `acc` is CZSL accuracy on unseen classes; `unseen`,
 * `seen` and `harmonic` are the GZSL figures.
 */
typedef struct MsdnMetrics {
  double acc;
  double unseen;
  double seen;
  double harmonic;
} MsdnMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *msdn_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *msdn_version(void);

/**
 * Generates a synthetic dataset. `spec` holds `key=value` generator
 * settings, or is null for defaults.
 *
 * # Safety
 * `spec` must be null or a valid C string; `out` must be a valid pointer.
 */
enum MsdnStatus msdn_dataset_generate(const char *spec, struct MsdnDataset **out);

/**
 * Loads and validates a dataset container.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be a valid pointer.
 */
enum MsdnStatus msdn_dataset_load(const char *path, struct MsdnDataset **out);

/**
 * # Safety
 * `ds` must be a live handle; `path` must be a valid C string.
 */
enum MsdnStatus msdn_dataset_save(const struct MsdnDataset *ds, const char *path);

/**
 * # Safety
 * `ds` must be a live handle; `out` must be a valid pointer.
 */
enum MsdnStatus msdn_dataset_info(const struct MsdnDataset *ds, struct MsdnDatasetInfo *out);

/**
 * Releases a dataset. Null is accepted and ignored.
 *
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void msdn_dataset_free(struct MsdnDataset *ds);

/**
 * Trains a model. `config` holds `key=value` training settings, or is null
 * for defaults.
 *
 * # Safety
 * `ds` must be a live handle, `config` null or a valid C string, `out` a
 * valid pointer.
 */
enum MsdnStatus msdn_train(const struct MsdnDataset *ds,
                           const char *config,
                           struct MsdnModel **out);

/**
 * # Safety
 * `path` must be a valid C string; `out` must be a valid pointer.
 */
enum MsdnStatus msdn_model_load(const char *path, struct MsdnModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` must be a valid C string.
 */
enum MsdnStatus msdn_model_save(const struct MsdnModel *model, const char *path);

/**
 * Releases a model. Null is accepted and ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void msdn_model_free(struct MsdnModel *model);

/**
 * Evaluates `model` on the dataset's test splits with fusion weights
 * `alpha1` (attribute→visual) and `alpha2` (visual→attribute).
 *
 * # Safety
 * Handles must be live; `out` must be a valid pointer.
 */
enum MsdnStatus msdn_evaluate(const struct MsdnModel *model,
                              const struct MsdnDataset *ds,
                              double alpha1,
                              double alpha2,
                              struct MsdnMetrics *out);

/**
 * Copies the attention maps and embeddings for image `image` into caller
 * buffers: `beta` is `K × R` and `tau` is `R × K`, both row-major; `psi`
 * and `psi_mapped` have length `K`. Any buffer may be null to skip it; a
 * non-null buffer whose length differs from the required size is a shape
 * error.
 *
 * # Safety
 * Handles must be live; each non-null buffer must hold its stated length.
 */
enum MsdnStatus msdn_attention(const struct MsdnModel *model,
                               const struct MsdnDataset *ds,
                               size_t image,
                               double *beta,
                               size_t beta_len,
                               double *tau,
                               size_t tau_len,
                               double *psi,
                               size_t psi_len,
                               double *psi_mapped,
                               size_t psi_mapped_len);

/**
 * `2SU / (S + U)` for accuracies in `[0, 1]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MsdnStatus msdn_harmonic_mean(double seen, double unseen, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSDN_H */
