#ifndef FLYHASH_H
#define FLYHASH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by all fallible functions.
 */
typedef enum FlyhashStatus {
  FLYHASH_STATUS_OK = 0,
  FLYHASH_STATUS_NULL_ARGUMENT = 1,
  FLYHASH_STATUS_INVALID_UTF8 = 2,
  FLYHASH_STATUS_LOAD_FAILED = 3,
  FLYHASH_STATUS_WORD_NOT_FOUND = 4,
  FLYHASH_STATUS_INVALID_CONFIG = 5,
  FLYHASH_STATUS_BUFFER_TOO_SMALL = 6,
  FLYHASH_STATUS_INTERNAL_ERROR = 7,
} FlyhashStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct FlyhashModel FlyhashModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the last error message for this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *flyhash_last_error(void);

/**
 * Loads a model file. On success writes a handle through `out` which must
 * be released with `flyhash_model_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum FlyhashStatus flyhash_model_load(const char *path, struct FlyhashModel **out);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must have come from `flyhash_model_load` and not been freed.
 */
void flyhash_model_free(struct FlyhashModel *model);

/**
 * Number of Kenyon-cell units (hash code length in bits).
 *
 * # Safety
 * `model` must be a live handle.
 */
int flyhash_model_units(const struct FlyhashModel *model);

/**
 * Vocabulary size.
 *
 * # Safety
 * `model` must be a live handle.
 */
int flyhash_model_vocab_size(const struct FlyhashModel *model);

/**
 * Static embedding of a single word: writes the `k` active unit indices
 * (ascending) into `out_units`, which must hold at least `k` entries.
 *
 * # Safety
 * `model`, `word`, and `out_units` must be valid; `out_units` must have
 * room for `k` values.
 */
enum FlyhashStatus flyhash_static_embedding(const struct FlyhashModel *model,
                                            const char *word,
                                            uintptr_t k,
                                            uint32_t *out_units);

/**
 * Context-dependent embedding: tokenizes `sentence`, takes the token at
 * `target_index` as the target and the other in-vocabulary tokens as the
 * context, and writes the `k` active unit indices into `out_units`.
 *
 * # Safety
 * `model`, `sentence`, and `out_units` must be valid; `out_units` must
 * have room for `k` values.
 */
enum FlyhashStatus flyhash_context_embedding(const struct FlyhashModel *model,
                                             const char *sentence,
                                             uintptr_t target_index,
                                             uintptr_t k,
                                             uint32_t *out_units);

/**
 * Fraction of matching bits between two codes over `units` total bits.
 * Both arrays list ascending active unit indices. Returns a value in
 * [0, 1], or -1.0 on error.
 *
 * # Safety
 * `a` and `b` must point to `a_len` / `b_len` readable entries.
 */
double flyhash_similarity(uint32_t units,
                          const uint32_t *a,
                          uintptr_t a_len,
                          const uint32_t *b,
                          uintptr_t b_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLYHASH_H */
