#ifndef ABSSLICE_H
#define ABSSLICE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AbssliceStatus {
  ABSSLICE_STATUS_OK = 0,
  ABSSLICE_STATUS_NULL_ARGUMENT = 1,
  ABSSLICE_STATUS_INVALID_UTF8 = 2,
  ABSSLICE_STATUS_PARSE_ERROR = 3,
  ABSSLICE_STATUS_CRITERION_ERROR = 4,
  ABSSLICE_STATUS_UNSUPPORTED = 5,
  /**
   * The analysis ran and the answer is negative (for example, a failed
   * slice verification).
   */
  ABSSLICE_STATUS_ANALYSIS_FAILED = 6,
  ABSSLICE_STATUS_INVALID_ARGUMENT = 7,
  ABSSLICE_STATUS_PANIC = 8,
} AbssliceStatus;

typedef struct AbssliceCriterion AbssliceCriterion;

typedef struct AbssliceProgram AbssliceProgram;

typedef struct AbssliceSlice AbssliceSlice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *absslice_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void absslice_string_free(char *s);

/**
 * Parses program source into `*out`.
 *
 * # Safety
 * `src` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AbssliceStatus absslice_program_parse(const char *src, struct AbssliceProgram **out);

/**
 * # Safety
 * `p` must be null or a handle from this library, not yet freed.
 */
void absslice_program_free(struct AbssliceProgram *p);

/**
 * Source text of a program with line labels; null on a null handle.
 *
 * # Safety
 * `p` must be null or a live program handle.
 */
char *absslice_program_to_string(const struct AbssliceProgram *p);

/**
 * Parses a criterion file's text for use with `program`.
 *
 * # Safety
 * `text_` must be a NUL-terminated string, `program` a live handle and `out`
 * a valid pointer.
 */
enum AbssliceStatus absslice_criterion_parse(const char *text_,
                                             const struct AbssliceProgram *program,
                                             struct AbssliceCriterion **out);

/**
 * # Safety
 * `c` must be null or a handle from this library, not yet freed.
 */
void absslice_criterion_free(struct AbssliceCriterion *c);

/**
 * Computes a verified slice. With `concrete` set, every criterion variable is
 * observed exactly.
 *
 * # Safety
 * `program` and `criterion` must be live handles and `out` a valid pointer.
 */
enum AbssliceStatus absslice_slice(const struct AbssliceProgram *program,
                                   const struct AbssliceCriterion *criterion,
                                   int64_t bound,
                                   uintptr_t step_limit,
                                   bool concrete,
                                   struct AbssliceSlice **out);

/**
 * # Safety
 * `s` must be null or a handle from this library, not yet freed.
 */
void absslice_slice_free(struct AbssliceSlice *s);

/**
 * The sliced program as a new handle, or null on a null argument.
 *
 * # Safety
 * `s` must be null or a live slice handle.
 */
struct AbssliceProgram *absslice_slice_program(const struct AbssliceSlice *s);

/**
 * Copies up to `cap` kept line numbers into `buf` and returns how many lines
 * were kept in total.
 *
 * # Safety
 * `s` must be a live slice handle; `buf` must have room for `cap` values
 * (it may be null when `cap` is 0).
 */
uintptr_t absslice_slice_kept(const struct AbssliceSlice *s, uint32_t *buf, uintptr_t cap);

/**
 * JSON report of the slice, or null on a null argument.
 *
 * # Safety
 * `s` must be null or a live slice handle.
 */
char *absslice_slice_report_json(const struct AbssliceSlice *s);

/**
 * Sets `*holds` to whether `candidate` is a slice of `program` for
 * `criterion` on the enumerated inputs.
 *
 * # Safety
 * All handles must be live and `holds` a valid pointer.
 */
enum AbssliceStatus absslice_check(const struct AbssliceProgram *program,
                                   const struct AbssliceProgram *candidate,
                                   const struct AbssliceCriterion *criterion,
                                   int64_t bound,
                                   uintptr_t step_limit,
                                   bool *holds);

/**
 * Variables of `expr` that may affect its property in `domain`, as a
 * comma-separated string in `*out`.
 *
 * # Safety
 * `expr` and `domain` must be NUL-terminated strings and `out` a valid pointer.
 */
enum AbssliceStatus absslice_find_ndeps(const char *expr,
                                        const char *domain,
                                        int64_t bound,
                                        char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABSSLICE_H */
