#ifndef PEX_H
#define PEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum {
  PEX_STATUS_OK = 0,
  /**
   * A null pointer, invalid UTF-8 or an unknown enum string.
   */
  PEX_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Corpus, model or evaluation input failed validation.
   */
  PEX_STATUS_DATA_ERROR = 2,
  /**
   * The completion backend failed, including replay cache misses.
   */
  PEX_STATUS_BACKEND_ERROR = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  PEX_STATUS_PANIC = 4,
} PexStatus;

/**
 * Opaque handle to a loaded corpus.
 */
typedef struct PexCorpus PexCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next FFI call on the same thread.
 */
const char *pex_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library and not yet freed.
 */
void pex_string_free(char *s);

/**
 * Opens the corpus bundled with the library.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
PexStatus pex_corpus_bundled(PexCorpus **out);

/**
 * Loads and validates a canonical corpus file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` a valid pointer.
 */
PexStatus pex_corpus_load(const char *path, PexCorpus **out);

/**
 * Releases a corpus. Null is ignored.
 *
 * # Safety
 * `corpus` must be null or a handle from this library and not yet freed.
 */
void pex_corpus_free(PexCorpus *corpus);

/**
 * Number of documents in the corpus; 0 for null.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t pex_corpus_len(const PexCorpus *corpus);

/**
 * Renders the prompt for `question` ("q1".."q3") under `setting` ("raw",
 * "defs", "2shots", "defs+2shots"). `x` and `y` may be null.
 *
 * # Safety
 * String arguments must be null or nul-terminated; `out` a valid pointer.
 */
PexStatus pex_render_prompt(const PexCorpus *corpus,
                            const char *doc_id,
                            const char *question,
                            const char *setting,
                            const char *x,
                            const char *y,
                            char **out);

/**
 * Runs the question dialogue on one document and returns the model JSON.
 *
 * `source` is "extracted" or "gold". `backend` is "oracle" or "replay";
 * replay requires `cache_path`, which oracle records into when non-null.
 *
 * # Safety
 * String arguments must be null or nul-terminated; `out` a valid pointer.
 */
PexStatus pex_extract(const PexCorpus *corpus,
                      const char *doc_id,
                      const char *setting,
                      const char *source,
                      const char *backend,
                      const char *cache_path,
                      char **out);

/**
 * Scores model JSON against the corpus gold standard and returns the
 * report JSON. Either model may be null, not both. The bundled alias list
 * is used for phrase matching.
 *
 * # Safety
 * String arguments must be null or nul-terminated; `out` a valid pointer.
 */
PexStatus pex_evaluate(const PexCorpus *corpus,
                       const char *ex_model_json,
                       const char *gs_model_json,
                       char **out);

/**
 * Derives directly-follows pairs between activity nodes.
 *
 * `kinds[i]` is 0 for an activity, 1 gateway, 2 condition, 3 other.
 * `edges` holds `n_edges` (source, target) pairs flattened. The result is a
 * JSON array of `[source, target]` node-index pairs.
 *
 * # Safety
 * `kinds` must point to `n_nodes` bytes and `edges` to `2 * n_edges` values
 * (either may be null when its count is 0); `out` a valid pointer.
 */
PexStatus pex_derive_follows(const uint8_t *kinds,
                             size_t n_nodes,
                             const size_t *edges,
                             size_t n_edges,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEX_H */
