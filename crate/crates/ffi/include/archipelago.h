#ifndef ARCHIPELAGO_H
#define ARCHIPELAGO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArchH {
  ARCH_H_UNIT = 0,
  ARCH_H_EQ4 = 1,
} ArchH;

typedef enum ArchMethod {
  ARCH_METHOD_ARCH_ATTRIBUTE = 0,
  ARCH_METHOD_DIFFERENCE = 1,
} ArchMethod;

/**
 * Result of every call.
 */
typedef enum ArchStatus {
  ARCH_STATUS_OK = 0,
  ARCH_STATUS_NULL_POINTER = 1,
  ARCH_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The function (callback, expression or bridge host) failed.
   */
  ARCH_STATUS_EVALUATION = 3,
  /**
   * Exhaustive enumeration over too many features.
   */
  ARCH_STATUS_CAPACITY = 4,
  /**
   * A caller buffer is too small; the needed length was written.
   */
  ARCH_STATUS_BUFFER_TOO_SMALL = 5,
  ARCH_STATUS_OUT_OF_RANGE = 6,
  ARCH_STATUS_PANIC = 7,
} ArchStatus;

typedef enum ArchWireMode {
  ARCH_WIRE_MODE_VECTOR = 0,
  ARCH_WIRE_MODE_MASK = 1,
} ArchWireMode;

/**
 * A memoized function bound to a target and a baseline.
 */
typedef struct ArchBlackBox ArchBlackBox;

/**
 * Disjoint feature sets and their attributions.
 */
typedef struct ArchExplanation ArchExplanation;

/**
 * Feature pairs ranked by interaction strength.
 */
typedef struct ArchRanking ArchRanking;

/**
 * Scalar model supplied by the caller. Writes `f(x)` to `out` and returns
 * 0, or returns nonzero on failure. Never called concurrently for one
 * black box.
 */
typedef int (*ArchEvalFn)(void *user_data, const double *x, size_t p, double *out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *arch_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *arch_version(void);

/**
 * One of the benchmark functions `"F1"`..`"F4"` at its default target
 * (all ones) and baseline (all minus ones).
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum ArchStatus arch_blackbox_synthetic(const char *name, enum ArchH h, struct ArchBlackBox **out);

/**
 * A function given in the expression language (`x1..xp`, `+ - * /`,
 * `min`, `max`, `relu`, `abs`).
 *
 * # Safety
 * `expr` must be a nul-terminated string, `target` and `baseline` must
 * point to `p` values and `out` must be valid.
 */
enum ArchStatus arch_blackbox_expr(const char *expr,
                                   const double *target,
                                   const double *baseline,
                                   size_t p,
                                   enum ArchH h,
                                   struct ArchBlackBox **out);

/**
 * A function supplied as a C callback.
 *
 * # Safety
 * `target` and `baseline` must point to `p` values, `f` must be safe to
 * call with `user_data` until the handle is freed, and `out` must be valid.
 */
enum ArchStatus arch_blackbox_callback(ArchEvalFn f,
                                       void *user_data,
                                       const double *target,
                                       const double *baseline,
                                       size_t p,
                                       enum ArchH h,
                                       struct ArchBlackBox **out);

/**
 * A model hosted by a child process speaking the line-delimited JSON
 * protocol. `timeout_ms` of 0 keeps the default.
 *
 * # Safety
 * `command` must be a nul-terminated string, `target` and `baseline` must
 * point to `p` values and `out` must be valid.
 */
enum ArchStatus arch_blackbox_bridge(const char *command,
                                     enum ArchWireMode mode,
                                     uint64_t timeout_ms,
                                     const double *target,
                                     const double *baseline,
                                     size_t p,
                                     enum ArchH h,
                                     struct ArchBlackBox **out);

/**
 * # Safety
 * `bb` must be null or a handle not yet freed.
 */
void arch_blackbox_free(struct ArchBlackBox *bb);

/**
 * # Safety
 * `bb` and `p` must be valid.
 */
enum ArchStatus arch_blackbox_p(const struct ArchBlackBox *bb, size_t *p);

/**
 * Distinct evaluations performed so far.
 *
 * # Safety
 * `bb` and `count` must be valid.
 */
enum ArchStatus arch_blackbox_call_count(const struct ArchBlackBox *bb, uint64_t *count);

/**
 * Evaluates one mask of `p` bytes (nonzero selects the target value).
 *
 * # Safety
 * `mask` must point to `p` bytes where `p` is the handle's dimension.
 */
enum ArchStatus arch_blackbox_eval_mask(const struct ArchBlackBox *bb,
                                        const uint8_t *mask,
                                        double *value);

/**
 * Ranks every pair. `contexts` is `"archdetect"`, `"target-only"`,
 * `"baseline-only"`, `"random:N"` or `"full"` (null means archdetect);
 * `seed` drives the random regime; `workers` of 0 uses all cores.
 *
 * # Safety
 * `bb` and `out` must be valid; `contexts` null or nul-terminated.
 */
enum ArchStatus arch_detect(const struct ArchBlackBox *bb,
                            const char *contexts,
                            uint64_t seed,
                            size_t workers,
                            struct ArchRanking **out);

/**
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void arch_ranking_free(struct ArchRanking *r);

/**
 * # Safety
 * `r` and `len` must be valid.
 */
enum ArchStatus arch_ranking_len(const struct ArchRanking *r, size_t *len);

/**
 * The pair at rank `k` (0 is strongest).
 *
 * # Safety
 * All pointers must be valid.
 */
enum ArchStatus arch_ranking_get(const struct ArchRanking *r,
                                 size_t k,
                                 size_t *i,
                                 size_t *j,
                                 double *strength);

/**
 * Merges the top `top_k` nonzero pairs into islands, adds singletons and
 * attributes each set.
 *
 * # Safety
 * All pointers must be valid handles or out pointers.
 */
enum ArchStatus arch_explain(const struct ArchBlackBox *bb,
                             const struct ArchRanking *r,
                             size_t top_k,
                             enum ArchMethod m,
                             struct ArchExplanation **out);

/**
 * Attribution of one set of `n` feature indices.
 *
 * # Safety
 * `indices` must point to `n` values; `bb` and `phi` must be valid.
 */
enum ArchStatus arch_attribute(const struct ArchBlackBox *bb,
                               const size_t *indices,
                               size_t n,
                               enum ArchMethod m,
                               double *phi);

/**
 * Attributes caller-chosen disjoint sets given in CSR form: set `k` holds
 * `indices[offsets[k]..offsets[k + 1]]`, with `num_sets + 1` offsets.
 *
 * # Safety
 * `offsets` must point to `num_sets + 1` values and `indices` to
 * `offsets[num_sets]` values.
 */
enum ArchStatus arch_attribute_sets(const struct ArchBlackBox *bb,
                                    const size_t *indices,
                                    const size_t *offsets,
                                    size_t num_sets,
                                    enum ArchMethod m,
                                    struct ArchExplanation **out);

/**
 * # Safety
 * `e` must be null or a handle not yet freed.
 */
void arch_explanation_free(struct ArchExplanation *e);

/**
 * # Safety
 * `e` and `n` must be valid.
 */
enum ArchStatus arch_explanation_num_sets(const struct ArchExplanation *e, size_t *n);

/**
 * Copies the indices of set `k` into `buf`. `len` receives the set size;
 * when `cap` is too small nothing is copied and
 * `ARCH_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `buf` must hold `cap` values (may be null when `cap` is 0).
 */
enum ArchStatus arch_explanation_set(const struct ArchExplanation *e,
                                     size_t k,
                                     size_t *buf,
                                     size_t cap,
                                     size_t *len);

/**
 * # Safety
 * `e` and `phi` must be valid.
 */
enum ArchStatus arch_explanation_phi(const struct ArchExplanation *e, size_t k, double *phi);

/**
 * `f(target)`, `f(baseline)` and `f(target) - f(baseline) - sum(phi)`.
 * Any out pointer may be null.
 *
 * # Safety
 * `e` must be valid.
 */
enum ArchStatus arch_explanation_summary(const struct ArchExplanation *e,
                                         double *f_target,
                                         double *f_baseline,
                                         double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARCHIPELAGO_H */
