#ifndef XNEC_H
#define XNEC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum XnecStatus {
  XNEC_STATUS_OK = 0,
  XNEC_STATUS_NULL_POINTER = 1,
  XNEC_STATUS_INVALID_ARGUMENT = 2,
  XNEC_STATUS_IO = 3,
  XNEC_STATUS_CHECKPOINT = 4,
  XNEC_STATUS_MODEL = 5,
  XNEC_STATUS_STATS = 6,
  XNEC_STATUS_PANIC = 7,
} XnecStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct XnecModel XnecModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *xnec_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *xnec_version(void);

/**
 * Loads a model archive. On success `*out` owns a handle that must be
 * released with [`xnec_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum XnecStatus xnec_model_load(const char *path, struct XnecModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`xnec_model_load`] and not be used afterwards.
 */
void xnec_model_free(struct XnecModel *model);

/**
 * Frames per scored window.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum XnecStatus xnec_model_window_len(const struct XnecModel *model, size_t *out);

/**
 * Decision threshold stored with the model.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum XnecStatus xnec_model_threshold(const struct XnecModel *model, double *out);

/**
 * Necessity score of the window ending at frame `end_frame` of a clip.
 * `gaze` may be null; otherwise it holds `n_frames` single-channel maps of
 * the same size. `speed` holds one sample per frame.
 *
 * # Safety
 * Buffers must hold the sizes implied by the arguments; `model` must be a
 * live handle and `out_score` writable.
 */
enum XnecStatus xnec_model_score(const struct XnecModel *model,
                                 const uint8_t *frames,
                                 const uint8_t *gaze,
                                 size_t n_frames,
                                 uint16_t width,
                                 uint16_t height,
                                 uint8_t channels,
                                 const double *speed,
                                 size_t end_frame,
                                 double *out_score);

/**
 * Writes 1 to `out_explain` when `score >= threshold`, else 0.
 *
 * # Safety
 * `out_explain` must be writable.
 */
enum XnecStatus xnec_decide(double score, double threshold, int *out_explain);

/**
 * Pearson correlation of two length-`n` series.
 *
 * # Safety
 * `x` and `y` must hold `n` values; `out` must be writable.
 */
enum XnecStatus xnec_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * Point-biserial correlation; `b` holds 0 or 1 per observation.
 *
 * # Safety
 * `b` and `y` must hold `n` values; `out` must be writable.
 */
enum XnecStatus xnec_point_biserial(const uint8_t *b, const double *y, size_t n, double *out);

/**
 * Area under the ROC curve; `labels` holds 0 or 1 per score.
 *
 * # Safety
 * `scores` and `labels` must hold `n` values; `out` must be writable.
 */
enum XnecStatus xnec_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Mean after dropping one minimum and one maximum.
 *
 * # Safety
 * `scores` must hold `n` values; `out` must be writable.
 */
enum XnecStatus xnec_truncated_mean(const double *scores, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XNEC_H */
