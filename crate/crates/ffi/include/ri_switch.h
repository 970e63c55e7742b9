#ifndef RI_SWITCH_H
#define RI_SWITCH_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum RiStatus {
  RI_STATUS_OK = 0,
  RI_STATUS_NULL_POINTER = 1,
  RI_STATUS_INVALID_UTF8 = 2,
  RI_STATUS_PARSE_ERROR = 3,
  RI_STATUS_ELABORATE_ERROR = 4,
  RI_STATUS_INVALID_ARGUMENT = 5,
  RI_STATUS_INVALID_INPUT = 6,
  RI_STATUS_INVALID_OUTPUT = 7,
  RI_STATUS_OUT_OF_ORDER = 8,
  RI_STATUS_MASK_VIOLATION = 9,
  RI_STATUS_POLICY_DEADLOCK = 10,
  RI_STATUS_STEP_ERROR = 11,
  RI_STATUS_BUFFER_TOO_SMALL = 12,
  RI_STATUS_TRACE_ERROR = 13,
  RI_STATUS_PANIC = 99,
} RiStatus;

/**
 * How the manager picks among valid groups.
 */
typedef enum RiSelection {
  RI_SELECTION_PREFER_LAST = 0,
  RI_SELECTION_LOWEST_INDEX = 1,
  RI_SELECTION_SEEDED_RANDOM = 2,
} RiSelection;

/**
 * Opaque manager.
 */
typedef struct RiManager RiManager;

/**
 * Opaque elaborated policy.
 */
typedef struct RiPolicy RiPolicy;

/**
 * Outcome of one completed tick.
 */
typedef struct RiTickResult {
  uint64_t tick;
  size_t selected;
  /**
   * True when no group was valid and the fallback group was released.
   */
  bool fallback_used;
} RiTickResult;

/**
 * Verdicts of a trace check; `first_violation` is -1 for a passing
 * constraint. Order: Snd, Snd-witness, Mono, Inst, Ca.
 */
typedef struct RiCheckReport {
  bool pass[5];
  int64_t first_violation[5];
  /**
   * Runs (cars) found in the trace; the verdicts combine all of them.
   */
  size_t runs;
} RiCheckReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread. Valid until the next
 * failing call on the same thread. Never null.
 */
const char *ri_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ri_version(void);

/**
 * Parses and elaborates a policy. `fov_deg` configures the scanner
 * geometry seen by `min_front`; pass 0 for the default 230°.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RiStatus ri_policy_parse(const char *source, double fov_deg, struct RiPolicy **out);

/**
 * # Safety
 * `policy` must come from [`ri_policy_parse`] and not be used afterwards.
 */
void ri_policy_free(struct RiPolicy *policy);

/**
 * Copies the policy name into `buf` (NUL-terminated). `needed` receives the
 * required size including the terminator.
 *
 * # Safety
 * `buf` must hold `len` bytes; `needed` may be null.
 */
enum RiStatus ri_policy_name(const struct RiPolicy *policy, char *buf, size_t len, size_t *needed);

/**
 * Creates a manager over `n` policies, one per controller group, in group
 * order. The policies are shared, so they may be freed afterwards.
 * `fallback` is a group index released when no group is valid, or -1 for
 * none (deadlock is then an error).
 *
 * # Safety
 * `policies` must point to `n` valid policy handles; `out` must be valid.
 */
enum RiStatus ri_manager_new(const struct RiPolicy *const *policies,
                             size_t n,
                             enum RiSelection selection,
                             uint64_t seed,
                             int64_t fallback,
                             struct RiManager **out);

/**
 * # Safety
 * `mgr` must come from [`ri_manager_new`] and not be used afterwards.
 */
void ri_manager_free(struct RiManager *mgr);

/**
 * Number of policies (and controller groups).
 *
 * # Safety
 * `mgr` must be a valid handle or null.
 */
size_t ri_manager_len(const struct RiManager *mgr);

/**
 * Number of input channels.
 *
 * # Safety
 * `mgr` must be a valid handle or null.
 */
size_t ri_manager_input_count(const struct RiManager *mgr);

/**
 * Number of output channels.
 *
 * # Safety
 * `mgr` must be a valid handle or null.
 */
size_t ri_manager_output_count(const struct RiManager *mgr);

/**
 * Ticks completed so far.
 *
 * # Safety
 * `mgr` must be a valid handle or null.
 */
uint64_t ri_manager_tick(const struct RiManager *mgr);

/**
 * Input phase. Writes one flag per group into `mask` (`mask_len` must be
 * at least the group count): nonzero groups must be executed, zero groups
 * are suspended.
 *
 * # Safety
 * Buffers must match the given lengths.
 */
enum RiStatus ri_manager_begin_tick(struct RiManager *mgr,
                                    const double *data,
                                    const size_t *lens,
                                    size_t n_channels,
                                    bool *mask,
                                    size_t mask_len);

/**
 * Output phase. `outputs[g]` points to group `g`'s flat output buffer, or
 * is null for a suspended group. `lens` gives the per-channel lengths,
 * shared by all groups. On failure nothing is committed and the tick
 * stays open.
 *
 * # Safety
 * `outputs` must hold `n_groups` pointers, each null or pointing to a
 * buffer of `sum(lens)` doubles.
 */
enum RiStatus ri_manager_end_tick(struct RiManager *mgr,
                                  const double *const *outputs,
                                  size_t n_groups,
                                  const size_t *lens,
                                  size_t n_channels,
                                  struct RiTickResult *result);

/**
 * Copies the output released on the last tick into `buf` as a flat
 * buffer. `written` receives the number of doubles needed.
 *
 * # Safety
 * `buf` must hold `len` doubles; `written` may be null.
 */
enum RiStatus ri_manager_released(const struct RiManager *mgr,
                                  double *buf,
                                  size_t len,
                                  size_t *written);

/**
 * Checks a JSON-lines tick log against `n` policies in group order.
 *
 * # Safety
 * `policies` must hold `n` valid handles, `jsonl` must be NUL-terminated
 * and `report` valid.
 */
enum RiStatus ri_check_trace_jsonl(const struct RiPolicy *const *policies,
                                   size_t n,
                                   const char *jsonl,
                                   struct RiCheckReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RI_SWITCH_H */
