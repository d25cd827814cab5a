#ifndef OPGUIDE_H
#define OPGUIDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpgStatus {
  OPG_STATUS_OK = 0,
  OPG_STATUS_NULL_POINTER = 1,
  OPG_STATUS_INVALID_UTF8 = 2,
  OPG_STATUS_MALFORMED_INPUT = 3,
  OPG_STATUS_EMPTY_GRAPH = 4,
  OPG_STATUS_UNKNOWN_STATE = 5,
  OPG_STATUS_INVALID_ARGUMENT = 6,
  OPG_STATUS_NON_POSITIVE_DURATION = 7,
  OPG_STATUS_PANIC = 99,
} OpgStatus;

typedef enum OpgGuidanceKind {
  OPG_GUIDANCE_KIND_RECOMMEND = 0,
  OPG_GUIDANCE_KIND_REPEAT = 1,
} OpgGuidanceKind;

/**
 * Opaque reference graph handle.
 */
typedef struct OpgGraph OpgGraph;

/**
 * Scored transition. `rank` is 0 when the observed label is not a successor.
 */
typedef struct OpgAssessment {
  uint32_t rank;
  double probability;
  double entropy;
  double certainty;
  double score;
  bool unknown_state;
} OpgAssessment;

/**
 * Ranks are 0 for a repeat outcome.
 */
typedef struct OpgGuidance {
  enum OpgGuidanceKind kind;
  uint32_t graph_rank;
  uint32_t model_rank;
  uint32_t rank_sum;
} OpgGuidance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after success.
 * The pointer stays valid until the next `opg_*` call on the same thread.
 */
const char *opg_last_error_message(void);

/**
 * Builds a graph from annotation CSV text at `level` ("action", "verb" or
 * "noun").
 *
 * # Safety
 * `csv` and `level` must be NUL-terminated strings; `out` must be writable.
 */
enum OpgStatus opg_graph_from_annotations(const char *csv,
                                          const char *level,
                                          struct OpgGraph **out);

/**
 * Loads a graph from its canonical JSON encoding.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum OpgStatus opg_graph_from_json(const char *json, struct OpgGraph **out);

/**
 * Canonical JSON encoding of `graph`; free with [`opg_string_free`].
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum OpgStatus opg_graph_to_json(const struct OpgGraph *graph, char **out);

/**
 * Releases a graph handle. Null is ignored.
 *
 * # Safety
 * `graph` must come from an `opg_graph_*` constructor and not be freed twice.
 */
void opg_graph_free(struct OpgGraph *graph);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void opg_string_free(char *s);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum OpgStatus opg_graph_total_transitions(const struct OpgGraph *graph, uint64_t *out);

/**
 * Entropy in nats of the successor distribution of `state` (0 when the
 * state has no successors).
 *
 * # Safety
 * `graph` must be a live handle, `state` NUL-terminated, `out` writable.
 */
enum OpgStatus opg_graph_row_entropy(const struct OpgGraph *graph, const char *state, double *out);

/**
 * Anomaly score of the transition `state -> observed`.
 *
 * # Safety
 * `graph` must be a live handle, strings NUL-terminated, `out` writable.
 */
enum OpgStatus opg_assess_transition(const struct OpgGraph *graph,
                                     const char *state,
                                     const char *observed,
                                     bool use_certainty,
                                     bool literal_factor2,
                                     struct OpgAssessment *out);

/**
 * Next-action guidance from `state`. `predicted` lists the anticipated
 * labels best first (at most 5). With `dictionary_len == 0` the whole graph
 * vocabulary is admitted. `out_json`, when non-null, receives the full
 * outcome as JSON.
 *
 * # Safety
 * `graph` must be a live handle; array pointers must reference the stated
 * number of NUL-terminated strings; `out` must be writable.
 */
enum OpgStatus opg_recommend_next(const struct OpgGraph *graph,
                                  const char *state,
                                  const char *const *predicted,
                                  size_t predicted_len,
                                  const char *const *dictionary,
                                  size_t dictionary_len,
                                  struct OpgGuidance *out,
                                  char **out_json);

/**
 * Time-weighted accuracy of one step.
 *
 * # Safety
 * `out` must be writable.
 */
enum OpgStatus opg_step_twsa(double reference_s, double actual_s, bool correct, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPGUIDE_H */
