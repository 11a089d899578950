#ifndef GHOST_H
#define GHOST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GhostModel {
  GHOST_MODEL_MPC = 0,
  GHOST_MODEL_MPCPP = 1,
  GHOST_MODEL_QB = 2,
} GhostModel;

typedef enum GhostStatus {
  GHOST_STATUS_OK = 0,
  GHOST_STATUS_NULL_POINTER = 1,
  GHOST_STATUS_INVALID_UTF8 = 2,
  GHOST_STATUS_INVALID_ARGUMENT = 3,
  GHOST_STATUS_IO = 4,
  GHOST_STATUS_FORMAT = 5,
  GHOST_STATUS_MODEL_NOT_LOADED = 6,
  GHOST_STATUS_FINGERPRINT_MISMATCH = 7,
  GHOST_STATUS_INTERNAL = 8,
} GhostStatus;

typedef enum GhostStop {
  GHOST_STOP_NONE = 0,
  /**
   * `stop_value` is the word budget.
   */
  GHOST_STOP_MAX_WORDS = 1,
  /**
   * `stop_value` is the entropy threshold in nats.
   */
  GHOST_STOP_ENTROPY = 2,
} GhostStop;

/**
 * Loaded indices. Immutable once opened, so one handle may serve
 * concurrent `ghost_suggest` calls.
 */
typedef struct GhostEngine GhostEngine;

typedef struct GhostRequest {
  const char *prefix;
  /**
   * Earlier turns, oldest first. May be NULL when `context_len` is 0.
   */
  const char *const *context;
  size_t context_len;
  enum GhostModel model;
  bool rerank;
  enum GhostStop stop;
  double stop_value;
  bool has_min_confidence;
  double min_confidence;
} GhostRequest;

/**
 * Filled by `ghost_suggest`; release with `ghost_suggestion_clear`.
 */
typedef struct GhostSuggestion {
  /**
   * Empty on abstention.
   */
  char *text;
  /**
   * Negative infinity on abstention.
   */
  double score;
  bool shown;
  /**
   * Static string, never freed.
   */
  const char *source;
  /**
   * NULL unless the engine abstained.
   */
  char *abstain_reason;
} GhostSuggestion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *ghost_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next call into this library on the same thread.
 */
const char *ghost_last_error(void);

/**
 * Loads index files (or directories of `*.ghst` files) into a new engine.
 *
 * # Safety
 * `paths` must point to `n_paths` valid NUL-terminated strings and `out`
 * must be a valid pointer. On success `*out` owns an engine that must be
 * released with [`ghost_engine_free`].
 */
enum GhostStatus ghost_engine_open(const char *const *paths,
                                   size_t n_paths,
                                   struct GhostEngine **out);

/**
 * # Safety
 * `engine` must come from [`ghost_engine_open`] and not have been freed.
 * NULL is accepted and ignored.
 */
void ghost_engine_free(struct GhostEngine *engine);

/**
 * # Safety
 * `engine` must be NULL or a live handle.
 */
bool ghost_engine_has_model(const struct GhostEngine *engine, enum GhostModel model);

/**
 * # Safety
 * `engine` must be NULL or a live handle.
 */
bool ghost_engine_can_rerank(const struct GhostEngine *engine);

/**
 * Training-corpus fingerprint shared by the loaded indices, or NULL when
 * nothing is loaded. Owned by the engine.
 *
 * # Safety
 * `engine` must be NULL or a live handle.
 */
const char *ghost_engine_fingerprint(const struct GhostEngine *engine);

/**
 * Computes one suggestion. An abstention is a successful call with
 * `shown == false`.
 *
 * # Safety
 * `engine` must be a live handle, `req` must point to a valid request whose
 * strings are valid for the call, and `out` must be writable. On `GHOST_OK`
 * the caller owns `*out` and must release it with [`ghost_suggestion_clear`].
 * On any other status `*out` is left zeroed.
 */
enum GhostStatus ghost_suggest(const struct GhostEngine *engine,
                               const struct GhostRequest *req,
                               struct GhostSuggestion *out);

/**
 * Frees the strings owned by a suggestion and zeroes it. Safe to call twice.
 *
 * # Safety
 * `s` must be NULL or point to a suggestion filled by [`ghost_suggest`].
 */
void ghost_suggestion_clear(struct GhostSuggestion *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GHOST_H */
