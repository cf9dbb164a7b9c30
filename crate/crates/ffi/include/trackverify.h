#ifndef TRACKVERIFY_H
#define TRACKVERIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TvStatus {
  TV_STATUS_OK = 0,
  TV_STATUS_NULL_POINTER = 1,
  TV_STATUS_INVALID_ARGUMENT = 2,
  TV_STATUS_IO = 3,
  TV_STATUS_FORMAT = 4,
  TV_STATUS_PARSE = 5,
  TV_STATUS_SHAPE = 6,
  TV_STATUS_VERIFY = 7,
  TV_STATUS_PANIC = 8,
} TvStatus;

typedef enum TvVerdict {
  TV_VERDICT_VERIFIED = 0,
  TV_VERDICT_FALSIFIED = 1,
  TV_VERDICT_UNKNOWN = 2,
} TvVerdict;

/**
 * Opaque network handle.
 */
typedef struct TvNetwork TvNetwork;

/**
 * Opaque parsed property.
 */
typedef struct TvProperty TvProperty;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tv_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *tv_last_error(void);

/**
 * Freshly initialized network for square `side`x`side` inputs (`side` a
 * multiple of 4; 112 is the canonical size).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TvStatus tv_network_new(uint64_t seed, size_t side, struct TvNetwork **out);

/**
 * Loads a network from an NNW weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TvStatus tv_network_load(const char *path, struct TvNetwork **out);

/**
 * # Safety
 * `net` must come from this library and `path` be a NUL-terminated string.
 */
enum TvStatus tv_network_save(const struct TvNetwork *net, const char *path);

/**
 * Releases a network; null is ignored.
 *
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void tv_network_free(struct TvNetwork *net);

/**
 * Input side length and trainable parameter count.
 *
 * # Safety
 * `net` must come from this library; the out-pointers may be null.
 */
enum TvStatus tv_network_info(const struct TvNetwork *net, size_t *side, size_t *params);

/**
 * Forward pass on a row-major image of `input_len` values in [0, 1];
 * writes the two normalized outputs.
 *
 * # Safety
 * Buffers must hold at least the stated number of values.
 */
enum TvStatus tv_network_forward(const struct TvNetwork *net,
                                 const float *input,
                                 size_t input_len,
                                 float *output,
                                 size_t output_len);

/**
 * Interval bounds of the outputs over the L-infinity ball of radius
 * `epsilon` around the input, intersected with [0, 1].
 *
 * # Safety
 * Buffers must hold at least the stated number of values.
 */
enum TvStatus tv_network_bounds(const struct TvNetwork *net,
                                const float *input,
                                size_t input_len,
                                double epsilon,
                                float *lower,
                                float *upper,
                                size_t output_len);

/**
 * Checks `|N(x)[i] - N(x0)[i]| <= delta` for every output over the ball.
 * When the verdict is falsified and `counterexample` is non-null, the
 * witness (`input_len` values) is written there.
 *
 * # Safety
 * Buffers must hold at least `input_len` values; `verdict` must be valid.
 */
enum TvStatus tv_check_robustness(const struct TvNetwork *net,
                                  const float *input,
                                  size_t input_len,
                                  double epsilon,
                                  double delta,
                                  size_t split_budget,
                                  uint64_t seed,
                                  enum TvVerdict *verdict,
                                  float *counterexample);

/**
 * Parses property text. Parse errors report `line:col: message` through
 * [`tv_last_error`].
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TvStatus tv_property_parse(const char *source, struct TvProperty **out);

/**
 * # Safety
 * `prop` must come from this library and not be used afterwards.
 */
void tv_property_free(struct TvProperty *prop);

/**
 * Ball radius after substituting parameter values.
 *
 * # Safety
 * `prop` must come from this library and `epsilon` be valid.
 */
enum TvStatus tv_property_epsilon(const struct TvProperty *prop, double *epsilon);

/**
 * Canonical text of the property, to be released with [`tv_string_free`].
 *
 * # Safety
 * `prop` must come from this library and `text` be valid.
 */
enum TvStatus tv_property_format(const struct TvProperty *prop, char **text);

/**
 * # Safety
 * `s` must come from this library; null is ignored.
 */
void tv_string_free(char *s);

/**
 * Checks a parsed property against `net`. Input paths resolve against
 * `base_dir` (null means the working directory). `counterexample`, when
 * non-null, receives the witness of a falsified verdict and must hold one
 * network input.
 *
 * # Safety
 * Handles must come from this library; `verdict` must be valid.
 */
enum TvStatus tv_property_verify(const struct TvProperty *prop,
                                 const struct TvNetwork *net,
                                 const char *base_dir,
                                 size_t split_budget,
                                 uint64_t seed,
                                 enum TvVerdict *verdict,
                                 float *counterexample);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRACKVERIFY_H */
