#ifndef SCENECLUSTER_H
#define SCENECLUSTER_H

/* Generated from the scenecluster-ffi crate sources; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of every fallible call in this interface.
 */
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SC_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SC_STATUS_UTF8_ERROR = 2,
  /**
   * Arguments or configuration violate a precondition.
   */
  SC_STATUS_INVALID_INPUT = 3,
  /**
   * No cluster count in the search interval has a defined affinity ratio.
   */
  SC_STATUS_NO_CONVERGENCE = 4,
  /**
   * Any other library failure; details via sc_last_error_message.
   */
  SC_STATUS_RUNTIME_ERROR = 5,
  /**
   * The library panicked; state is still consistent but the call did nothing.
   */
  SC_STATUS_PANIC = 6,
} ScStatus;

/**
 * An extracted log mel spectrogram.
 */
typedef struct ScLms ScLms;

/**
 * A finished clustering run.
 */
typedef struct ScResult ScResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing this thread's most recent failure. The pointer stays
 * valid until the next failing call on the same thread; never freed by the
 * caller.
 */
const char *sc_last_error_message(void);

/**
 * Compute the log mel spectrogram of a mono signal.
 *
 * `config_json` is an optional UTF-8 JSON object with the same fields as the
 * library's feature configuration; null means defaults. On success `*out`
 * owns the feature and must be released with [`sc_lms_free`].
 *
 * # Safety
 * `samples` must point to `n_samples` readable doubles and `out` to a
 * writable pointer slot; `config_json`, when non-null, must be a
 * NUL-terminated string.
 */
enum ScStatus sc_lms_extract(const double *samples,
                             size_t n_samples,
                             uint32_t sample_rate,
                             const char *config_json,
                             struct ScLms **out);

/**
 * Number of mel bands of an extracted feature; 0 for null.
 */
size_t sc_lms_bands(const struct ScLms *lms);

/**
 * Number of frames of an extracted feature; 0 for null.
 */
size_t sc_lms_frames(const struct ScLms *lms);

/**
 * Copy the feature values into `buf` in band-major order. `len` must be
 * exactly bands * frames.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum ScStatus sc_lms_values(const struct ScLms *lms, double *buf, size_t len);

/**
 * Release an extracted feature. Null is ignored.
 *
 * # Safety
 * `lms` must be null or a pointer obtained from [`sc_lms_extract`] that has
 * not been freed yet.
 */
void sc_lms_free(struct ScLms *lms);

/**
 * Cluster `n_items` feature vectors of width `dim`, laid out row-major.
 *
 * `config_json` is an optional UTF-8 JSON object with the same fields as the
 * library's joint configuration (neighbor count, cluster-count interval,
 * seed, ...); null means defaults. Vectors are clustered as given, no
 * network training happens. On success `*out` owns the result and must be
 * released with [`sc_result_free`].
 *
 * # Safety
 * `vectors` must point to `n_items * dim` readable doubles and `out` to a
 * writable pointer slot; `config_json`, when non-null, must be a
 * NUL-terminated string.
 */
enum ScStatus sc_cluster_fixed(const double *vectors,
                               size_t n_items,
                               size_t dim,
                               const char *config_json,
                               struct ScResult **out);

/**
 * Selected cluster count; 0 for null.
 */
size_t sc_result_n_clusters(const struct ScResult *result);

/**
 * Number of clustered items; 0 for null.
 */
size_t sc_result_n_items(const struct ScResult *result);

/**
 * Affinity ratio at the selected point; NaN for null.
 */
double sc_result_gamma(const struct ScResult *result);

/**
 * Copy the item labels into `buf`. `len` must be exactly the item count;
 * labels are dense in [0, n_clusters).
 *
 * # Safety
 * `buf` must point to `len` writable size_t slots.
 */
enum ScStatus sc_result_labels(const struct ScResult *result, size_t *buf, size_t len);

/**
 * Release a clustering result. Null is ignored.
 *
 * # Safety
 * `result` must be null or a pointer obtained from [`sc_cluster_fixed`] that
 * has not been freed yet.
 */
void sc_result_free(struct ScResult *result);

/**
 * Normalized mutual information between two labelings of `n` items.
 *
 * # Safety
 * `pred` and `truth` must point to `n` readable size_t labels and `out` to a
 * writable double.
 */
enum ScStatus sc_nmi(const size_t *pred, const size_t *truth, size_t n, double *out);

/**
 * Clustering accuracy under the best cluster-to-class mapping.
 *
 * # Safety
 * `pred` and `truth` must point to `n` readable size_t labels and `out` to a
 * writable double.
 */
enum ScStatus sc_clustering_accuracy(const size_t *pred,
                                     const size_t *truth,
                                     size_t n,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCENECLUSTER_H */
