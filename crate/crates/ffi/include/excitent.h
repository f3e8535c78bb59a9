#ifndef EXCITENT_H
#define EXCITENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ExStatus {
  EX_STATUS_OK = 0,
  EX_STATUS_NULL_POINTER = 1,
  EX_STATUS_INVALID_ARGUMENT = 2,
  EX_STATUS_CONFIG = 3,
  EX_STATUS_NUMERICAL = 4,
  EX_STATUS_PANIC = 5,
} ExStatus;

// Transport network description.
typedef struct ExNetwork ExNetwork;

// Full-versus-restricted transport report for one input amplitude.
typedef struct ExReport ExReport;

// Pure state of one or more truncated modes.
typedef struct ExState ExState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into this library from the same thread.
const char *ex_last_error_message(void);

// Library version as a static nul-terminated string.
const char *ex_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library and not yet freed.
void ex_string_free(char *s);

// Leveled coherent state `|alpha_N>` on a single mode with `levels` levels.
enum ExStatus ex_state_leveled_coherent(double alpha_re,
                                        double alpha_im,
                                        size_t levels,
                                        struct ExState **state_out);

// Coherent state truncated at dimension `dim`; fails if the discarded
// weight exceeds `tail_tol`.
enum ExStatus ex_state_coherent(double alpha_re,
                                double alpha_im,
                                size_t dim,
                                double tail_tol,
                                struct ExState **state_out);

// Puts a single-mode state next to a vacuum mode of dimension `dim_b` and
// applies the exchange evolution for phase `gt`.
//
// # Safety
// `state` must be a live handle.
enum ExStatus ex_state_evolve_with_vacuum(const struct ExState *state,
                                          size_t dim_b,
                                          double gt,
                                          struct ExState **state_out);

// Total Hilbert-space dimension of the state.
//
// # Safety
// `state` must be a live handle.
enum ExStatus ex_state_dimension(const struct ExState *state, size_t *dim_out);

// Copies the amplitudes into `re` and `im`, each of length `len` (which
// must equal the state dimension).
//
// # Safety
// `re` and `im` must be valid for `len` writes.
enum ExStatus ex_state_amplitudes(const struct ExState *state, double *re, double *im, size_t len);

// Pure-state concurrence between mode 0 and the remaining modes.
//
// # Safety
// `state` must be a live handle.
enum ExStatus ex_state_concurrence(const struct ExState *state, double *value_out);

// Projects onto the listed total-excitation numbers and renormalizes;
// `weight_out` receives the squared norm of the projection.
//
// # Safety
// `state` must be a live handle and `retained` valid for `count` reads.
enum ExStatus ex_state_project(const struct ExState *state,
                               const size_t *retained,
                               size_t count,
                               struct ExState **state_out,
                               double *weight_out);

// # Safety
// `state` must be null or a live handle; it is invalid afterwards.
void ex_state_free(struct ExState *state);

// Maximal concurrence of the evolved leveled coherent state.
enum ExStatus ex_cmax(double alpha, size_t levels, double *value_out);

// Small-amplitude leading coefficient `f_N`.
enum ExStatus ex_fn_estimate(size_t levels, double *value_out);

// Wootters concurrence of a two-qubit density matrix given as 16 real and
// 16 imaginary parts in row-major order (basis `|00>, |01>, |10>, |11>`).
//
// # Safety
// `re` and `im` must each be valid for 16 reads.
enum ExStatus ex_concurrence_wootters(const double *re, const double *im, double *value_out);

// Wootters concurrence of the number-decohered dimer state.
enum ExStatus ex_decohered_dimer_concurrence(double alpha, double gt, double *value_out);

// Parses a network from TOML text (the fields of a `[network]` table).
//
// # Safety
// `toml_text` must be a valid nul-terminated string.
enum ExStatus ex_network_from_toml(const char *toml_text, struct ExNetwork **network_out);

// Uniform chain with entry at site 0 and the sink on the last site.
enum ExStatus ex_network_chain(size_t sites,
                               double coupling,
                               double dephasing,
                               double sink_rate,
                               struct ExNetwork **network_out);

// # Safety
// `network` must be null or a live handle; it is invalid afterwards.
void ex_network_free(struct ExNetwork *network);

// Runs the truncation-robustness comparison on `steps` time steps over
// the default window.
//
// # Safety
// `network` must be a live handle.
enum ExStatus ex_transport_report(const struct ExNetwork *network,
                                  double alpha,
                                  size_t steps,
                                  struct ExReport **report_out);

// Integrated efficiencies of the full and restricted runs.
//
// # Safety
// `report` must be a live handle.
enum ExStatus ex_report_efficiencies(const struct ExReport *report,
                                     double *full_out,
                                     double *restricted_out);

// Relative efficiency difference between the full and restricted runs.
//
// # Safety
// `report` must be a live handle.
enum ExStatus ex_report_relative_difference(const struct ExReport *report, double *value_out);

// Serializes the report as JSON; free the result with [`ex_string_free`].
//
// # Safety
// `report` must be a live handle.
enum ExStatus ex_report_to_json(const struct ExReport *report, char **json_out);

// # Safety
// `report` must be null or a live handle; it is invalid afterwards.
void ex_report_free(struct ExReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXCITENT_H */
