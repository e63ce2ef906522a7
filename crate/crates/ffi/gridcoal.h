#ifndef GRIDCOAL_H
#define GRIDCOAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum GridcoalStatus {
  GridcoalStatus_Ok = 0,
  GridcoalStatus_NullArgument = 1,
  GridcoalStatus_InvalidUtf8 = 2,
  GridcoalStatus_ScenarioError = 3,
  GridcoalStatus_RuntimeError = 4,
} GridcoalStatus;

/**
 * Opaque handle to a loaded, validated scenario.
 */
typedef struct GridcoalScenario GridcoalScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *gridcoal_last_error(void);

/**
 * Load and validate a scenario file; on success writes a handle the caller
 * must release with `gridcoal_scenario_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GridcoalStatus gridcoal_scenario_load(const char *path, struct GridcoalScenario **out);

/**
 * Release a scenario handle. Passing NULL is a no-op.
 *
 * # Safety
 * `scn` must come from `gridcoal_scenario_load` and not be used afterwards.
 */
void gridcoal_scenario_free(struct GridcoalScenario *scn);

/**
 * Run market rounds and write `market_trace.csv` under `out_dir`.
 * `settled_out` (optional) receives 1 if the trace settled.
 *
 * # Safety
 * `scn` must be a live handle; `out_dir` a NUL-terminated string.
 */
enum GridcoalStatus gridcoal_run_market(const struct GridcoalScenario *scn,
                                        uintptr_t rounds,
                                        const char *out_dir,
                                        int32_t *settled_out);

/**
 * Run the coupled market/physics simulation and persist the full artifact.
 *
 * # Safety
 * `scn` must be a live handle; `out_dir` a NUL-terminated string.
 */
enum GridcoalStatus gridcoal_run_coupled(const struct GridcoalScenario *scn, const char *out_dir);

/**
 * Produce the consolidated analysis report as a JSON string the caller
 * frees with `gridcoal_string_free`.
 *
 * # Safety
 * `scn` must be a live handle and `out` a valid pointer.
 */
enum GridcoalStatus gridcoal_analyze(const struct GridcoalScenario *scn,
                                     uintptr_t rounds,
                                     char **out);

/**
 * Export all cost networks as CSV; free the string with
 * `gridcoal_string_free`.
 *
 * # Safety
 * `scn` must be a live handle and `out` a valid pointer.
 */
enum GridcoalStatus gridcoal_export_costnet(const struct GridcoalScenario *scn, char **out);

/**
 * Free a string returned by this library. Passing NULL is a no-op.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void gridcoal_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDCOAL_H */
