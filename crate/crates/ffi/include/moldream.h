#ifndef MOLDREAM_H
#define MOLDREAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_UTF8 = 2,
  MD_STATUS_PARSE_ERROR = 3,
  MD_STATUS_ENCODE_ERROR = 4,
  MD_STATUS_IO_ERROR = 5,
  MD_STATUS_INVALID_ARGUMENT = 6,
  MD_STATUS_DREAM_ERROR = 7,
  MD_STATUS_PANIC = 8,
} MdStatus;

// Opaque molecular graph.
typedef struct MdGraph MdGraph;

// Opaque trained property model.
typedef struct MdModel MdModel;

// Dreaming parameters; obtain defaults from [`md_dream_params_default`].
typedef struct MdDreamParams {
  // Target property value in raw units.
  double target;
  double learning_rate;
  size_t max_epochs;
  double grad_tolerance;
  // In `[0, 1)`.
  double noise_upper_bound;
  uint64_t seed;
} MdDreamParams;

// Summary of a finished dream.
typedef struct MdDreamSummary {
  // Network prediction for the final input, raw units.
  double predicted;
  // Distinct molecules visited, including the start.
  size_t steps;
  size_t epochs_run;
  // 1 if the gradient vanished, 0 if the epoch budget ran out.
  int32_t converged;
} MdDreamSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or NULL if none. The
// pointer stays valid until the next failing call on the same thread.
const char *md_last_error(void);

// Library version as a static NUL-terminated string.
const char *md_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a string from this library not yet freed.
void md_string_free(char *s);

// Parses a SMILES string into a new graph handle.
//
// # Safety
// `smiles` must be a NUL-terminated string; `out` must be writable.
enum MdStatus md_graph_from_smiles(const char *smiles, struct MdGraph **out);

// Decodes a bracketed token string such as `[C][=O]` into a new graph.
// Every sequence of known tokens decodes to a valid molecule.
//
// # Safety
// `tokens` must be a NUL-terminated string; `out` must be writable.
enum MdStatus md_graph_from_tokens(const char *tokens, struct MdGraph **out);

// Releases a graph handle. NULL is ignored.
//
// # Safety
// `g` must be NULL or a handle from this library not yet freed.
void md_graph_free(struct MdGraph *g);

// Heavy-atom count, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live graph handle.
size_t md_graph_atom_count(const struct MdGraph *g);

// Writes the graph as SMILES into a new string.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum MdStatus md_graph_to_smiles(const struct MdGraph *g, char **out);

// Writes the isomorphism-invariant key of the graph into a new string.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum MdStatus md_graph_canonical_key(const struct MdGraph *g, char **out);

// Encodes the graph as a token string of at most `max_len` tokens.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum MdStatus md_graph_encode(const struct MdGraph *g, size_t max_len, char **out);

// Surrogate lipophilicity of the graph under the default table.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum MdStatus md_surrogate_logp(const struct MdGraph *g, double *out);

// Loads a model file written by `moldream train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MdStatus md_model_load(const char *path, struct MdModel **out);

// Releases a model handle. NULL is ignored.
//
// # Safety
// `m` must be NULL or a handle from this library not yet freed.
void md_model_free(struct MdModel *m);

// Network prediction for a molecule, raw property units.
//
// # Safety
// `m` and `g` must be live handles; `out` must be writable.
enum MdStatus md_model_predict(const struct MdModel *m, const struct MdGraph *g, double *out);

// Default dreaming parameters with the given target.
struct MdDreamParams md_dream_params_default(double target);

// Dreams `start` toward `params->target`. On success `*out_final` receives
// a new handle to the final molecule and `*out_summary` (if not NULL) the
// run summary.
//
// # Safety
// `m`, `start` and `params` must be valid; `out_final` must be writable;
// `out_summary` must be NULL or writable.
enum MdStatus md_dream(const struct MdModel *m,
                       const struct MdGraph *start,
                       const struct MdDreamParams *params,
                       struct MdGraph **out_final,
                       struct MdDreamSummary *out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOLDREAM_H */
