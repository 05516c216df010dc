#ifndef TRIADSIM_H
#define TRIADSIM_H

/* Generated by cbindgen from triadsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes shared with the CLI's exit codes.
 */
typedef enum TriadStatus {
  TriadStatus_Ok = 0,
  TriadStatus_ConfigError = 2,
  TriadStatus_PropertyViolation = 3,
  TriadStatus_IntegrityViolation = 4,
  TriadStatus_InvalidArgument = 5,
  TriadStatus_BufferTooSmall = 6,
} TriadStatus;

/*
 Opaque simulation handle: one configured controller plus its identity.
 */
typedef struct TriadSim TriadSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates a simulation from config text in the same `key = value` format
 the CLI accepts. Returns NULL on error; when `err_buf` is non-NULL the
 error message is written into it (NUL-terminated, truncated to fit).

 # Safety
 `config_text` must be a valid NUL-terminated string. `err_buf`, when
 non-NULL, must point to at least `err_len` writable bytes.
 */
struct TriadSim *triadsim_new(const char *config_text, char *err_buf, uintptr_t err_len);

/*
 # Safety
 `sim` must be a pointer returned by `triadsim_new` that has not been
 freed yet, or NULL.
 */
void triadsim_free(struct TriadSim *sim);

/*
 Writes one 64-byte block through the controller's persistence protocol.

 # Safety
 `sim` must be a live handle; `data` must point to 64 readable bytes.
 */
enum TriadStatus triadsim_write(struct TriadSim *sim, uint64_t addr, const uint8_t *data);

/*
 Verified read of one 64-byte block into `out`.

 # Safety
 `sim` must be a live handle; `out` must point to 64 writable bytes.
 */
enum TriadStatus triadsim_read(struct TriadSim *sim, uint64_t addr, uint8_t *out);

/*
 Power-loss operator: erases the volatile caches, keeps the persistence
 domain.

 # Safety
 `sim` must be a live handle.
 */
enum TriadStatus triadsim_crash(struct TriadSim *sim);

/*
 Runs the recovery procedure for the configured policy. When `report_buf`
 is non-NULL the line-oriented recovery report is written into it;
 `needed` (optional) receives the required buffer size including NUL.

 # Safety
 `sim` must be a live handle; `report_buf`, when non-NULL, must point to
 `report_len` writable bytes; `needed`, when non-NULL, must be writable.
 */
enum TriadStatus triadsim_recover(struct TriadSim *sim,
                                  char *report_buf,
                                  uintptr_t report_len,
                                  uintptr_t *needed);

/*
 Deterministic fingerprint of all durable state.

 # Safety
 `sim` must be a live handle.
 */
uint64_t triadsim_state_hash(const struct TriadSim *sim);

/*
 Number of duplicate (key, IV) pads observed so far; nonzero means the
 one-time-pad guarantee was violated.

 # Safety
 `sim` must be a live handle.
 */
uint64_t triadsim_pad_reuse_count(const struct TriadSim *sim);

/*
 Run statistics as a two-line CSV document (header + row).

 # Safety
 Same buffer contract as `triadsim_recover`.
 */
enum TriadStatus triadsim_stats_csv(const struct TriadSim *sim,
                                    char *buf,
                                    uintptr_t len,
                                    uintptr_t *needed);

/*
 Closed-form recovery time in seconds for a device of `capacity` bytes.
 `tier` selects the lowest persisted tier: -1 = nothing (full data
 sweep), 0 = counters, n >= 1 = tree level n. Returns a negative value
 on invalid arguments.
 */
double triadsim_recovery_seconds(uint64_t capacity, int32_t tier, double t_block_ns);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TRIADSIM_H */
