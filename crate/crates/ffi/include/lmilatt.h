#ifndef LMILATT_H
#define LMILATT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum LmilStatus {
  LMIL_STATUS_OK = 0,
  LMIL_STATUS_NULL_POINTER = 1,
  LMIL_STATUS_INVALID_ARGUMENT = 2,
  LMIL_STATUS_DATA = 3,
  LMIL_STATUS_NUMERICAL = 4,
  LMIL_STATUS_IO = 5,
  LMIL_STATUS_BUFFER_TOO_SMALL = 6,
  LMIL_STATUS_PANIC = 7,
} LmilStatus;

/**
 * A loaded embedded corpus.
 */
typedef struct LmilCorpus LmilCorpus;

/**
 * A loaded model checkpoint.
 */
typedef struct LmilModel LmilModel;

/**
 * Confusion counts and metrics. `auc` is NaN when only one class is
 * present. `warnings` has bit 0 set when precision was undefined, bit 1
 * for recall and bit 2 for F1.
 */
typedef struct LmilMetrics {
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tn;
  double accuracy;
  double precision;
  double recall;
  double f1;
  double auc;
  uint32_t warnings;
} LmilMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lmil_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the full message length
 * including the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t lmil_last_error_message(char *buf, size_t len);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LmilStatus lmil_model_load(const char *path, struct LmilModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`lmil_model_load`] and not be used afterwards.
 */
void lmil_model_free(struct LmilModel *model);

/**
 * Embedding width the model expects.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum LmilStatus lmil_model_embedding_dim(const struct LmilModel *model, size_t *out);

/**
 * Loads an embedded corpus (binary or JSON lines).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LmilStatus lmil_corpus_load(const char *path, struct LmilCorpus **out);

/**
 * Releases a corpus. Null is ignored.
 *
 * # Safety
 * `corpus` must come from [`lmil_corpus_load`] and not be used afterwards.
 */
void lmil_corpus_free(struct LmilCorpus *corpus);

/**
 * Number of users in a corpus.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum LmilStatus lmil_corpus_len(const struct LmilCorpus *corpus, size_t *out);

/**
 * Scores one user given as `m` row-major embedding rows of width `dim`.
 * Writes the probability and, when `weights` is non-null, the `m`
 * per-tweet weights.
 *
 * # Safety
 * `rows` must hold `m * dim` floats; `probability` must be writable;
 * `weights` must be null or hold `m` writable doubles.
 */
enum LmilStatus lmil_predict_rows(const struct LmilModel *model,
                                  const float *rows,
                                  size_t m,
                                  size_t dim,
                                  double *probability,
                                  double *weights);

/**
 * Probabilities for every user of `corpus`, in corpus order. `len` is
 * the capacity of `probabilities` and must be at least the corpus size.
 *
 * # Safety
 * Handles must be live; `probabilities` must hold `len` writable doubles.
 */
enum LmilStatus lmil_predict_corpus(const struct LmilModel *model,
                                    const struct LmilCorpus *corpus,
                                    double *probabilities,
                                    size_t len);

/**
 * Confusion counts, metrics and AUC for `n` scored users with 0/1 truth.
 *
 * # Safety
 * `probabilities` and `truth` must hold `n` values; `out` must be writable.
 */
enum LmilStatus lmil_metrics(const double *probabilities,
                             const uint8_t *truth,
                             size_t n,
                             double threshold,
                             struct LmilMetrics *out);

/**
 * Deterministic hash embedding of `text` into `dim` floats.
 *
 * # Safety
 * `text` must be a NUL-terminated UTF-8 string; `out` must hold `dim`
 * writable floats.
 */
enum LmilStatus lmil_hash_embed(const char *text, size_t dim, uint64_t seed, float *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LMILATT_H */
