#ifndef PROTOPERF_H
#define PROTOPERF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PpCategory {
  PP_CATEGORY_SYMMETRIC_ENCRYPT = 0,
  PP_CATEGORY_SYMMETRIC_DECRYPT = 1,
  PP_CATEGORY_HASH = 2,
  PP_CATEGORY_ASYMMETRIC_ENCRYPT = 3,
  PP_CATEGORY_ASYMMETRIC_DECRYPT = 4,
} PpCategory;

// Which side a comparison predicts to be cheaper.
typedef enum PpFaster {
  PP_FASTER_P = 0,
  PP_FASTER_Q = 1,
  PP_FASTER_TIE = 2,
} PpFaster;

typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_ARGUMENT = 1,
  PP_STATUS_INVALID_UTF8 = 2,
  PP_STATUS_INVALID_ARGUMENT = 3,
  PP_STATUS_IO = 4,
  PP_STATUS_PARSE = 5,
  PP_STATUS_REGISTRY = 6,
  PP_STATUS_ESTIMATE = 7,
  PP_STATUS_FIT = 8,
  PP_STATUS_NOT_FOUND = 9,
  PP_STATUS_PANIC = 10,
} PpStatus;

typedef struct PpCorpus PpCorpus;

typedef struct PpRegistry PpRegistry;

typedef struct PpVerdict {
  double est_p;
  double est_q;
  // NaN when `est_q` is zero.
  double est_ratio;
  enum PpFaster faster;
} PpVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or "" after a success.
// The pointer stays valid until the next call on this thread.
const char *pp_last_error(void);

// # Safety
// `s` is null or a string returned by this library that has not been freed.
void pp_string_free(char *s);

// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum PpStatus pp_registry_load(const char *path, struct PpRegistry **out);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum PpStatus pp_registry_from_json(const char *json, struct PpRegistry **out);

// The bundled reference coefficients.
//
// # Safety
// `out` is writable.
enum PpStatus pp_registry_table1(struct PpRegistry **out);

// Serializes the registry to its JSON file format. Free with [`pp_string_free`].
//
// # Safety
// `reg` is a live handle; `out` is writable.
enum PpStatus pp_registry_to_json(const struct PpRegistry *reg, char **out);

// Evaluates one category's model at `x`.
//
// # Safety
// `reg` is a live handle; `out` is writable.
enum PpStatus pp_registry_eval(const struct PpRegistry *reg,
                               enum PpCategory category,
                               double x,
                               double *out);

// # Safety
// `reg` is null or a handle not yet freed.
void pp_registry_free(struct PpRegistry *reg);

// # Safety
// `text` is a NUL-terminated string; `out` is writable.
enum PpStatus pp_corpus_parse(const char *text, struct PpCorpus **out);

// Generates `n` protocols from `seed` with the default generator settings.
//
// # Safety
// `out` is writable.
enum PpStatus pp_generate(uint64_t seed, uintptr_t n, struct PpCorpus **out);

// Canonical text of the corpus. Free with [`pp_string_free`].
//
// # Safety
// `corpus` is a live handle; `out` is writable.
enum PpStatus pp_corpus_serialize(const struct PpCorpus *corpus, char **out);

// Number of protocols, 0 for a null handle.
//
// # Safety
// `corpus` is null or a live handle.
uintptr_t pp_corpus_len(const struct PpCorpus *corpus);

// # Safety
// `corpus` is null or a handle not yet freed.
void pp_corpus_free(struct PpCorpus *corpus);

// Estimated cost of protocol `id`, in the registry's unit.
//
// # Safety
// Handles are live; `id` is a NUL-terminated string; `out` is writable.
enum PpStatus pp_estimate(const struct PpRegistry *reg,
                          const struct PpCorpus *corpus,
                          const char *id,
                          double *out);

// Compares protocols `p_id` and `q_id`. Relative gaps up to `tie_epsilon`
// count as a tie.
//
// # Safety
// Handles are live; ids are NUL-terminated strings; `out` is writable.
enum PpStatus pp_compare(const struct PpRegistry *reg,
                         const struct PpCorpus *corpus,
                         const char *p_id,
                         const char *q_id,
                         double tie_epsilon,
                         struct PpVerdict *out);

// Least-squares cubic through `n` points. Writes `[α₁, α₂, α₃, α₄]`
// (constant term first) to `coeffs_out` and the RMSE to `rmse_out` if it is
// not null.
//
// # Safety
// `xs` and `ys` point to `n` readable doubles; `coeffs_out` to 4 writable
// ones.
enum PpStatus pp_fit_cubic(const double *xs,
                           const double *ys,
                           uintptr_t n,
                           double *coeffs_out,
                           double *rmse_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROTOPERF_H */
