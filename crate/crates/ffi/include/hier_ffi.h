/* C interface for the hierarchical instruction resolution engine. */

#ifndef HIER_FFI_H
#define HIER_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of a C-ABI call.
typedef enum HierStatus {
  // The call succeeded.
  HIER_STATUS_OK = 0,
  // A required pointer argument was null.
  HIER_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  HIER_STATUS_INVALID_UTF8 = 2,
  // The input parsed but was rejected (bad JSON, domain error).
  HIER_STATUS_BAD_INPUT = 3,
  // The requested configuration needs facilities this ABI does not
  // expose (e.g. an external network detector).
  HIER_STATUS_UNSUPPORTED = 4,
  // An internal invariant failed; the library caught a panic.
  HIER_STATUS_INTERNAL = 5,
} HierStatus;

// Opaque resolution engine: atomizer rules, hierarchy shape, and the
// offline detector configuration.
typedef struct HierEngine HierEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Borrowed message for the current thread's most recent failure, or null
// if the last call succeeded. Valid until the next call into this library
// on the same thread. Do not free.
const char *hier_last_error_message(void);

// Borrowed, static library version string. Do not free.
const char *hier_version(void);

// Creates an engine with the built-in defaults (rule-based detector,
// standard three-level hierarchy). Returns null only on internal failure.
struct HierEngine *hier_engine_new(void);

// Creates an engine from a configuration JSON document (the same format
// the CLI's `--config` accepts). Returns null on failure; consult
// [`hier_last_error_message`].
//
// # Safety
// `config_json` must be null or a valid NUL-terminated string.
struct HierEngine *hier_engine_new_with_config(const char *config_json);

// Releases an engine. Null is ignored.
//
// # Safety
// `engine` must be null or a pointer previously returned by an engine
// constructor, not yet freed.
void hier_engine_free(struct HierEngine *engine);

// Releases a string returned through an `out` parameter. Null is ignored.
//
// # Safety
// `string` must be null or a pointer previously written by this library,
// not yet freed.
void hier_string_free(char *string);

// Resolves a context document (`{"messages": [...]}`) through the full
// pipeline. On success writes a JSON bundle (atoms, conflict matrix,
// resolution, refined context) to `out_json`.
//
// # Safety
// `engine` must be a live engine pointer; `context_json` must be null or
// a valid NUL-terminated string; `out_json` must be null or a valid
// destination for one pointer.
enum HierStatus hier_engine_resolve_json(const struct HierEngine *engine,
                                         const char *context_json,
                                         char **out_json);

// Checks a candidate output against a previously resolved bundle. On
// success writes a compliance report JSON (`all_pass`, per-constraint
// results, refusal/hybrid flags) to `out_json`. A failing candidate is
// still `HIER_STATUS_OK`; the verdict lives in the report.
//
// # Safety
// `engine` must be a live engine pointer; `bundle_json` and `candidate`
// must be null or valid NUL-terminated strings; `out_json` must be null
// or a valid destination for one pointer.
enum HierStatus hier_engine_verify_json(const struct HierEngine *engine,
                                        const char *bundle_json,
                                        const char *candidate,
                                        char **out_json);

// Evaluates the alignment loss for one score record. `scores_json`
// accepts the same shapes as the CLI's `loss` input: scalar scores
// (`{"s_w": ..., "s_l": ...}`, optionally with `_ref` fields) or token
// log-probability arrays (`{"logp_w": [...], "logp_l": [...]}`).
// `params_json` is an optional `{"tau", "gamma", "beta"}` document; null
// selects the defaults. Writes the loss breakdown JSON to `out_json`.
//
// # Safety
// `scores_json` must be null or a valid NUL-terminated string;
// `params_json` may be null; `out_json` must be null or a valid
// destination for one pointer.
enum HierStatus hier_loss_json(const char *scores_json, const char *params_json, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIER_FFI_H */
