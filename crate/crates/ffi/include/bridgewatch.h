#ifndef BRIDGEWATCH_H
#define BRIDGEWATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BwStatus {
  BW_STATUS_OK = 0,
  BW_STATUS_NULL_ARGUMENT = 1,
  BW_STATUS_INVALID_UTF8 = 2,
  BW_STATUS_IO = 3,
  BW_STATUS_PARSE = 4,
  BW_STATUS_CONFIG = 5,
  BW_STATUS_ANALYSIS = 6,
  BW_STATUS_PANIC = 7,
} BwStatus;

/**
 * Validated bridge configuration.
 */
typedef struct BwConfig BwConfig;

/**
 * Runtime monitor holding allowed-unlock history.
 */
typedef struct BwMonitor BwMonitor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *bw_last_error(void);

/**
 * Static, NUL-terminated version string.
 */
const char *bw_version(void);

/**
 * Loads and validates a config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BwStatus bw_config_load(const char *path, struct BwConfig **out);

/**
 * Parses and validates a config from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum BwStatus bw_config_from_json(const char *json, struct BwConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is ignored.
 */
void bw_config_free(struct BwConfig *cfg);

/**
 * Analyzes trace files and relayer logs. On success `*out_report` holds
 * the JSONL report and `*out_violations` the violation count.
 *
 * # Safety
 * Path arrays must hold `n_*` valid strings; out-pointers must be writable.
 */
enum BwStatus bw_analyze(const struct BwConfig *cfg,
                         const char *const *trace_paths,
                         size_t n_traces,
                         const char *const *action_paths,
                         size_t n_actions,
                         char **out_report,
                         size_t *out_violations);

/**
 * Creates a monitor. The config is copied; `cfg` may be freed afterwards.
 *
 * # Safety
 * `cfg` must come from this library; `out` must be writable.
 */
enum BwStatus bw_monitor_new(const struct BwConfig *cfg, struct BwMonitor **out);

/**
 * Screens one request line. A malformed request is not an error: it
 * yields an abort response, like any other screening failure.
 *
 * # Safety
 * `m` must come from this library; `request` must be a NUL-terminated
 * string; `out_response` must be writable.
 */
enum BwStatus bw_monitor_screen(const struct BwMonitor *m,
                                const char *request,
                                char **out_response);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards. Null is ignored.
 */
void bw_monitor_free(struct BwMonitor *m);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void bw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRIDGEWATCH_H */
