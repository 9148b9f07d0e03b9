#ifndef ASOR_LAB_H
#define ASOR_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum AsorStatus {
  ASOR_STATUS_OK = 0,
  ASOR_STATUS_NULL_POINTER = 1,
  ASOR_STATUS_INVALID_UTF8 = 2,
  // Bad configuration, layout or argument.
  ASOR_STATUS_INVALID_ARGUMENT = 3,
  // Model, policy or distribution failed validation.
  ASOR_STATUS_INVALID_MODEL = 4,
  ASOR_STATUS_OUT_OF_RANGE = 5,
  // A solver did not converge or hit a singular system.
  ASOR_STATUS_NUMERICAL = 6,
  // A detour certificate does not exist.
  ASOR_STATUS_INFEASIBLE = 7,
  ASOR_STATUS_IO = 8,
  // Malformed TOML, JSON or CSV input.
  ASOR_STATUS_PARSE = 9,
  // The output buffer is shorter than required.
  ASOR_STATUS_BUFFER_TOO_SMALL = 10,
  // A panic was caught at the boundary.
  ASOR_STATUS_INTERNAL = 11,
} AsorStatus;

// A stochastic tabular policy.
typedef struct AsorPolicy AsorPolicy;

// The outcome of one training run.
typedef struct AsorTrainResult AsorTrainResult;

// A lava-world family: layout, state encoding and the tabular model.
typedef struct AsorWorld AsorWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Crate version as a static NUL-terminated string.
const char *asor_version(void);

// Copy of the calling thread's last error message, or null if the last
// call succeeded. Release with [`asor_string_free`].
char *asor_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void asor_string_free(char *s);

// The built-in six-by-six layout with four hidden parameters.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum AsorStatus asor_world_canonical(struct AsorWorld **out);

// Builds a world from layout TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum AsorStatus asor_world_from_toml(const char *toml, struct AsorWorld **out);

// Builds a world from a layout TOML file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AsorStatus asor_world_load(const char *path, struct AsorWorld **out);

// # Safety
// `world` must come from an `asor_world_*` constructor or be null.
void asor_world_free(struct AsorWorld *world);

// Number of states; zero for a null handle.
//
// # Safety
// `world` must be a live handle or null.
size_t asor_world_num_states(const struct AsorWorld *world);

// # Safety
// `world` must be a live handle or null.
size_t asor_world_num_actions(const struct AsorWorld *world);

// # Safety
// `world` must be a live handle or null.
size_t asor_world_num_thetas(const struct AsorWorld *world);

// Index of the start state.
//
// # Safety
// `world` must be a live handle; `out` must be writable.
enum AsorStatus asor_world_start_state(const struct AsorWorld *world, size_t *out);

// Writes 1 for every globally accessible state and 0 elsewhere.
// `len` must be at least the number of states.
//
// # Safety
// `out` must point to `len` writable bytes.
enum AsorStatus asor_world_accessible_mask(const struct AsorWorld *world, uint8_t *out, size_t len);

// Optimal state values under hidden parameter `theta`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum AsorStatus asor_world_optimal_values(const struct AsorWorld *world,
                                          size_t theta,
                                          double *out,
                                          size_t len);

// Detour certificates for every ordered pair of hidden parameters, as JSON.
// An infeasible family is still reported with status `Ok`; inspect the
// `feasible` field.
//
// # Safety
// `out_json` must be writable; release the result with [`asor_string_free`].
enum AsorStatus asor_world_certify_json(const struct AsorWorld *world,
                                        size_t m_max,
                                        char **out_json);

// Uniform policy over the world's states and actions.
//
// # Safety
// `world` must be a live handle; `out` must be writable.
enum AsorStatus asor_policy_uniform(const struct AsorWorld *world, struct AsorPolicy **out);

// Deterministic optimal policy under hidden parameter `theta`.
//
// # Safety
// `world` must be a live handle; `out` must be writable.
enum AsorStatus asor_policy_optimal(const struct AsorWorld *world,
                                    size_t theta,
                                    struct AsorPolicy **out);

// Parses a policy from the JSON written by `train` or [`asor_policy_to_json`].
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum AsorStatus asor_policy_from_json(const char *json, struct AsorPolicy **out);

// # Safety
// `policy` must be a live handle; `out_json` must be writable.
enum AsorStatus asor_policy_to_json(const struct AsorPolicy *policy, char **out_json);

// Probability of `action` in `state`.
//
// # Safety
// `policy` must be a live handle; `out` must be writable.
enum AsorStatus asor_policy_prob(const struct AsorPolicy *policy,
                                 size_t state,
                                 size_t action,
                                 double *out);

// # Safety
// `policy` must come from an `asor_policy_*` constructor or be null.
void asor_policy_free(struct AsorPolicy *policy);

// Discounted value of `policy` from the start state under `theta`.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum AsorStatus asor_policy_start_value(const struct AsorWorld *world,
                                        const struct AsorPolicy *policy,
                                        size_t theta,
                                        double *out);

// Expected undiscounted episode return per hidden parameter, exact.
//
// # Safety
// Both handles must be live; `out` must point to `len` writable doubles.
enum AsorStatus asor_policy_episode_returns(const struct AsorWorld *world,
                                            const struct AsorPolicy *policy,
                                            double *out,
                                            size_t len);

// Trains one configuration. `config_json` holds trainer settings as a JSON
// object; omitted fields take their defaults, and null or `"{}"` means all
// defaults.
//
// # Safety
// `world` must be live; `config_json` must be null or NUL-terminated;
// `out` must be writable.
enum AsorStatus asor_train(const struct AsorWorld *world,
                           const char *config_json,
                           struct AsorTrainResult **out);

// Copy of the trained policy as a separate handle.
//
// # Safety
// `result` must be live; `out` must be writable.
enum AsorStatus asor_train_result_policy(const struct AsorTrainResult *result,
                                         struct AsorPolicy **out);

// Final mean return across hidden parameters.
//
// # Safety
// `result` must be live; `out` must be writable.
enum AsorStatus asor_train_result_mean_return(const struct AsorTrainResult *result, double *out);

// Full training report as JSON.
//
// # Safety
// `result` must be live; `out_json` must be writable.
enum AsorStatus asor_train_result_report_json(const struct AsorTrainResult *result,
                                              char **out_json);

// # Safety
// `result` must come from [`asor_train`] or be null.
void asor_train_result_free(struct AsorTrainResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASOR_LAB_H */
