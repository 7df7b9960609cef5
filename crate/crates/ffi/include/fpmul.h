#ifndef FPMUL_H
#define FPMUL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum FpmulStatus {
  FPMUL_STATUS_OK = 0,
  FPMUL_STATUS_NULL_POINTER = 1,
  FPMUL_STATUS_NOT_PRIME = 2,
  FPMUL_STATUS_INVALID_ARGUMENT = 3,
  FPMUL_STATUS_BUFFER_TOO_SMALL = 4,
  FPMUL_STATUS_COEFFICIENT_OUT_OF_RANGE = 5,
  FPMUL_STATUS_INTERNAL = 6,
  FPMUL_STATUS_PANIC = 7,
} FpmulStatus;

/**
 * Algorithm selection for a multiplier handle.
 */
typedef enum FpmulStrategy {
  FPMUL_STRATEGY_AUTO = 0,
  FPMUL_STRATEGY_KRONECKER = 1,
  FPMUL_STRATEGY_CF_FFT = 2,
} FpmulStrategy;

/**
 * Opaque multiplier bound to one prime. Plans are cached per handle; a
 * handle may be shared across threads for concurrent multiplications.
 */
typedef struct FpmulMultiplier FpmulMultiplier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a multiplier for the prime `p` and stores it in `*out`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FpmulStatus fpmul_multiplier_new(uint64_t p,
                                      enum FpmulStrategy strategy,
                                      struct FpmulMultiplier **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `m` must come from `fpmul_multiplier_new` and not be used afterwards.
 */
void fpmul_multiplier_free(struct FpmulMultiplier *m);

/**
 * Writes the handle's prime to `*p`.
 *
 * # Safety
 * `m` must be a live handle and `p` writable.
 */
enum FpmulStatus fpmul_multiplier_prime(const struct FpmulMultiplier *m, uint64_t *p);

/**
 * Full product of `a` and `b`. The product has `a_len + b_len - 1`
 * coefficients (zero if either is empty); that count is written to
 * `*out_len` whether or not `out_cap` suffices.
 *
 * # Safety
 * `a`, `b` point to `a_len`, `b_len` readable coefficients; `out` to
 * `out_cap` writable ones; `out_len` is writable.
 */
enum FpmulStatus fpmul_multiply(const struct FpmulMultiplier *m,
                                const uint64_t *a,
                                size_t a_len,
                                const uint64_t *b,
                                size_t b_len,
                                uint64_t *out,
                                size_t out_cap,
                                size_t *out_len);

/**
 * Product of `a` and `b` modulo `X^n - 1`, written as `n` coefficients.
 * Inputs longer than `n` are folded first.
 *
 * # Safety
 * As for [`fpmul_multiply`], with `out` holding at least `n` entries.
 */
enum FpmulStatus fpmul_cyclic_multiply(const struct FpmulMultiplier *m,
                                       const uint64_t *a,
                                       size_t a_len,
                                       const uint64_t *b,
                                       size_t b_len,
                                       size_t n,
                                       uint64_t *out,
                                       size_t out_cap);

/**
 * Writes the planner report for `(p, n)` as a NUL-terminated string.
 * `*out_len` receives the byte count including the terminator.
 *
 * # Safety
 * `buf` must hold `cap` writable bytes (may be null when `cap == 0`);
 * `out_len` is writable.
 */
enum FpmulStatus fpmul_explain(uint64_t p,
                               size_t n,
                               enum FpmulStrategy strategy,
                               char *buf,
                               size_t cap,
                               size_t *out_len);

/**
 * Copies the calling thread's last error message (NUL-terminated,
 * truncated to `cap`) and returns its full length including the
 * terminator; 0 when there is none.
 *
 * # Safety
 * `buf` must hold `cap` writable bytes (may be null when `cap == 0`).
 */
size_t fpmul_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fpmul_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FPMUL_H */
