#ifndef ADSEL_H
#define ADSEL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum AdselStatus {
  ADSEL_STATUS_OK = 0,
  ADSEL_STATUS_NULL_POINTER = 1,
  ADSEL_STATUS_INVALID_INPUT = 2,
  ADSEL_STATUS_DIMENSION_MISMATCH = 3,
  ADSEL_STATUS_IO = 4,
  ADSEL_STATUS_PARSE = 5,
  ADSEL_STATUS_FIT = 6,
  ADSEL_STATUS_MODEL = 7,
  ADSEL_STATUS_TIMEOUT = 8,
  ADSEL_STATUS_PANIC = 9,
  ADSEL_STATUS_OTHER = 10,
} AdselStatus;

/**
 * An enclosing ball of a training set.
 */
typedef struct AdselBall AdselBall;

/**
 * A loaded labeled dataset.
 */
typedef struct AdselDataset AdselDataset;

/**
 * A fitted detector with its threshold.
 */
typedef struct AdselDetector AdselDetector;

/**
 * A loaded meta-model.
 */
typedef struct AdselMetaModel AdselMetaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *adsel_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *adsel_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void adsel_string_free(char *s);

/**
 * Default configuration of `algorithm` as JSON; free with [`adsel_string_free`].
 *
 * # Safety
 * `algorithm` must be a NUL-terminated string; `out_json` must be writable.
 */
enum AdselStatus adsel_default_config(const char *algorithm, char **out_json);

/**
 * Loads a CSV; a missing label column means all rows are normal.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_dataset` must be writable.
 */
enum AdselStatus adsel_dataset_load_csv(const char *path,
                                        const char *label_column,
                                        struct AdselDataset **out_dataset);

/**
 * # Safety
 * `dataset` must be a live handle; outputs must be writable.
 */
enum AdselStatus adsel_dataset_shape(const struct AdselDataset *dataset,
                                     size_t *out_rows,
                                     size_t *out_cols,
                                     size_t *out_anomalies);

/**
 * # Safety
 * `dataset` must come from [`adsel_dataset_load_csv`] or be null.
 */
void adsel_dataset_free(struct AdselDataset *dataset);

/**
 * Fits the detector described by `config_json` on a row-major matrix.
 *
 * # Safety
 * `data` must point to `n_rows * n_cols` doubles; `config_json` must be
 * NUL-terminated; `out_detector` must be writable.
 */
enum AdselStatus adsel_detector_fit(const char *config_json,
                                    const double *data,
                                    size_t n_rows,
                                    size_t n_cols,
                                    struct AdselDetector **out_detector);

/**
 * Fits on the normal rows of a loaded dataset.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `dataset` a live handle;
 * `out_detector` writable.
 */
enum AdselStatus adsel_detector_fit_dataset(const char *config_json,
                                            const struct AdselDataset *dataset,
                                            struct AdselDetector **out_detector);

/**
 * Outlier scores of `n_rows` rows into `out_scores`.
 *
 * # Safety
 * `data` must hold `n_rows * n_cols` doubles and `out_scores` `n_rows`.
 */
enum AdselStatus adsel_detector_score(const struct AdselDetector *detector,
                                      const double *data,
                                      size_t n_rows,
                                      size_t n_cols,
                                      double *out_scores);

/**
 * Writes 1 for anomalies and 0 for normal rows into `out_flags`.
 *
 * # Safety
 * `data` must hold `n_rows * n_cols` doubles and `out_flags` `n_rows` bytes.
 */
enum AdselStatus adsel_detector_predict(const struct AdselDetector *detector,
                                        const double *data,
                                        size_t n_rows,
                                        size_t n_cols,
                                        uint8_t *out_flags);

/**
 * # Safety
 * `detector` must be a live handle; `out_threshold` writable.
 */
enum AdselStatus adsel_detector_threshold(const struct AdselDetector *detector,
                                          double *out_threshold);

/**
 * # Safety
 * `detector` must come from a fit function or be null.
 */
void adsel_detector_free(struct AdselDetector *detector);

/**
 * (1+epsilon)-approximate minimal enclosing ball of the rows.
 *
 * # Safety
 * `data` must hold `n_rows * n_cols` doubles; `out_ball` writable.
 */
enum AdselStatus adsel_ball_fit(const double *data,
                                size_t n_rows,
                                size_t n_cols,
                                double epsilon,
                                struct AdselBall **out_ball);

/**
 * Copies the centre into `out_center` (length `dim`) and the radius.
 *
 * # Safety
 * `out_center` must hold `dim` doubles; `out_radius` writable.
 */
enum AdselStatus adsel_ball_get(const struct AdselBall *ball,
                                double *out_center,
                                size_t dim,
                                double *out_radius);

/**
 * # Safety
 * `ball` must come from [`adsel_ball_fit`] or be null.
 */
void adsel_ball_free(struct AdselBall *ball);

/**
 * Fraction of `n_samples` uniform ball points the detector deems normal.
 *
 * # Safety
 * Handles must be live; outputs writable.
 */
enum AdselStatus adsel_hypervolume(const struct AdselDetector *detector,
                                   const struct AdselBall *ball,
                                   size_t n_samples,
                                   uint64_t seed,
                                   double *out_fraction,
                                   double *out_std_error);

/**
 * Monte Carlo cross-validated false-positive rate on normal-only rows.
 *
 * # Safety
 * `config_json` NUL-terminated; `data` holds `n_rows * n_cols` doubles.
 */
enum AdselStatus adsel_mc_cv_fpr(const char *config_json,
                                 const double *data,
                                 size_t n_rows,
                                 size_t n_cols,
                                 double test_fraction,
                                 size_t repetitions,
                                 uint64_t seed,
                                 double *out_fpr);

/**
 * # Safety
 * `path` NUL-terminated; `out_model` writable.
 */
enum AdselStatus adsel_metamodel_load(const char *path, struct AdselMetaModel **out_model);

/**
 * # Safety
 * `model` live; `out_count` writable.
 */
enum AdselStatus adsel_metamodel_n_columns(const struct AdselMetaModel *model, size_t *out_count);

/**
 * Name of feature column `index`; free with [`adsel_string_free`].
 *
 * # Safety
 * `model` live; `out_name` writable.
 */
enum AdselStatus adsel_metamodel_column_name(const struct AdselMetaModel *model,
                                             size_t index,
                                             char **out_name);

/**
 * Predicted scaled MCC for one instance given in model column order;
 * NaN marks an absent value.
 *
 * # Safety
 * `values` must hold `len` doubles; `out_prediction` writable.
 */
enum AdselStatus adsel_metamodel_predict(const struct AdselMetaModel *model,
                                         const double *values,
                                         size_t len,
                                         double *out_prediction);

/**
 * # Safety
 * `model` must come from [`adsel_metamodel_load`] or be null.
 */
void adsel_metamodel_free(struct AdselMetaModel *model);

/**
 * Matthews correlation and its [0, 1] rescaling.
 *
 * # Safety
 * Outputs must be writable.
 */
enum AdselStatus adsel_mcc(uint64_t tp,
                           uint64_t fp,
                           uint64_t fn_,
                           uint64_t tn,
                           double *out_mcc,
                           double *out_scaled);

/**
 * # Safety
 * `out_score` must be writable.
 */
enum AdselStatus adsel_lc_score(double hv, double fpr, double *out_score);

/**
 * # Safety
 * `x` and `y` must hold `n` doubles; `out_tau` writable.
 */
enum AdselStatus adsel_kendall_tau_b(const double *x, const double *y, size_t n, double *out_tau);

/**
 * NDCG of the ranking `order` (candidate indices, best first).
 *
 * # Safety
 * `order` and `relevance` must hold `n` elements; `out_ndcg` writable.
 */
enum AdselStatus adsel_ndcg(const size_t *order,
                            const double *relevance,
                            size_t n,
                            double *out_ndcg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADSEL_H */
