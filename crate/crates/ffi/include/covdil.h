#ifndef COVDIL_H
#define COVDIL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CovdilStatus {
  COVDIL_STATUS_OK = 0,
  /**
   * The report was produced but at least one clause failed.
   */
  COVDIL_STATUS_CLAUSE_FAILED = 1,
  /**
   * Malformed or rejected input.
   */
  COVDIL_STATUS_INVALID = 2,
  COVDIL_STATUS_INTERNAL = 3,
  COVDIL_STATUS_NULL_POINTER = 4,
  COVDIL_STATUS_INVALID_UTF8 = 5,
  /**
   * The caller's output buffer is too small; the needed size is still written.
   */
  COVDIL_STATUS_BUFFER_TOO_SMALL = 6,
} CovdilStatus;

/**
 * A validated scenario.
 */
typedef struct CovdilScenario CovdilScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *covdil_version(void);

/**
 * Message for the last failure on this thread, or null. Valid until the next
 * call into the library from the same thread; do not free.
 */
const char *covdil_last_error(void);

/**
 * Parse and validate a scenario from JSON text.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` must be null or
 * writable.
 */
enum CovdilStatus covdil_scenario_from_json(const char *json, struct CovdilScenario **out);

/**
 * Load and validate a scenario file.
 *
 * # Safety
 * As for [`covdil_scenario_from_json`].
 */
enum CovdilStatus covdil_scenario_from_path(const char *path, struct CovdilScenario **out);

/**
 * One of the built-in scenarios: "scalar", "automorphism" or "tower".
 *
 * # Safety
 * As for [`covdil_scenario_from_json`].
 */
enum CovdilStatus covdil_demo_scenario(const char *name, struct CovdilScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void covdil_scenario_free(struct CovdilScenario *scenario);

/**
 * Run `command` ("check", "extend", "dilate", "unitary" or "matricial") and
 * write the JSON report to `*report`. The report is produced for both
 * `Ok` and `ClauseFailed`.
 *
 * # Safety
 * `scenario` must be a live handle, `command` a NUL-terminated string and
 * `report` writable.
 */
enum CovdilStatus covdil_run(const struct CovdilScenario *scenario,
                             const char *command,
                             char **report);

/**
 * Compare the extensions of two scenarios.
 *
 * # Safety
 * As for [`covdil_run`].
 */
enum CovdilStatus covdil_compare(const struct CovdilScenario *a,
                                 const struct CovdilScenario *b,
                                 char **report);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void covdil_string_free(char *s);

/**
 * Schäffer isometric dilation of an `n × n` complex contraction with `copies`
 * defect copies. Matrices are row-major with interleaved real and imaginary
 * parts, so `t` holds `2 n²` doubles. The dilation dimension is written to
 * `*dim` and the matrix to `out`, which must hold `2 dim²` doubles
 * (`capacity` counts doubles). Pass a null `out` to query the dimension.
 *
 * # Safety
 * `t` must point to `2 n²` readable doubles, `dim` must be writable, and
 * `out` must be null or point to `capacity` writable doubles.
 */
enum CovdilStatus covdil_schaffer_dilation(const double *t,
                                           size_t n,
                                           size_t copies,
                                           double *out,
                                           size_t capacity,
                                           size_t *dim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVDIL_H */
