#ifndef UNFOLD_EE_H
#define UNFOLD_EE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UeStatus {
  UE_STATUS_OK = 0,
  UE_STATUS_NULL_POINTER = 1,
  UE_STATUS_INVALID_INPUT = 2,
  UE_STATUS_SHAPE_MISMATCH = 3,
  UE_STATUS_UNTRAINED = 4,
  UE_STATUS_RUNTIME = 5,
  UE_STATUS_PANIC = 6,
} UeStatus;

typedef enum UeAlgorithm {
  // Algorithm 1: numerical inner solver.
  UE_ALGORITHM_NUMERICAL = 0,
  // Algorithm 2: closed-form updates.
  UE_ALGORITHM_CLOSED_FORM = 1,
} UeAlgorithm;

// One channel realization.
typedef struct UeChannel UeChannel;

typedef struct UeFumModel UeFumModel;

typedef struct UeMasumModel UeMasumModel;

// Scenario parameters.
typedef struct UeNetwork UeNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *ue_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ue_version(void);

// Default scenario with `num_bs` cells of `users_per_bs` users.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum UeStatus ue_network_new(size_t num_bs, size_t users_per_bs, struct UeNetwork **out);

// Scenario from a complete JSON object.
//
// # Safety
// `json` must be a NUL-terminated string; `out` as in [`ue_network_new`].
enum UeStatus ue_network_from_json(const char *json, struct UeNetwork **out);

// Sets the per-cell power budget in watts.
//
// # Safety
// `net` must be a live handle.
enum UeStatus ue_network_set_p_max(struct UeNetwork *net, double p_max_watts);

// Number of links, `num_bs × users_per_bs`; 0 for a null handle.
//
// # Safety
// `net` must be null or a live handle.
size_t ue_network_num_links(const struct UeNetwork *net);

// # Safety
// `net` must be null or a handle not yet freed.
void ue_network_free(struct UeNetwork *net);

// Draws a channel realization from the scenario with the given seed.
//
// # Safety
// `net` must be a live handle and `out` writable.
enum UeStatus ue_channel_generate(const struct UeNetwork *net,
                                  uint64_t seed,
                                  struct UeChannel **out);

// # Safety
// `ch` must be null or a handle not yet freed.
void ue_channel_free(struct UeChannel *ch);

// WSEE of a feasible allocation.
//
// # Safety
// Handles must be live, `rho` must point to `len` readable values and
// `wsee_out` must be writable.
enum UeStatus ue_wsee(const struct UeNetwork *net,
                      const struct UeChannel *ch,
                      const double *rho,
                      size_t len,
                      double *wsee_out);

// Runs a solver to convergence with default options. `rho_out` receives
// `len` = number of links values; `iterations_out` may be null.
//
// # Safety
// Handles must be live and the output pointers writable.
enum UeStatus ue_solve(const struct UeNetwork *net,
                       const struct UeChannel *ch,
                       enum UeAlgorithm algorithm,
                       double *rho_out,
                       size_t len,
                       double *wsee_out,
                       size_t *iterations_out);

// Loads a FUM model from its JSON serialisation.
//
// # Safety
// `json` must be NUL-terminated and `out` writable.
enum UeStatus ue_fum_from_json(const char *json, struct UeFumModel **out);

// An untrained FUM with `layers` layers for the scenario.
//
// # Safety
// `net` must be a live handle and `out` writable.
enum UeStatus ue_fum_new(const struct UeNetwork *net, size_t layers, struct UeFumModel **out);

// # Safety
// `m` must be null or a handle not yet freed.
void ue_fum_free(struct UeFumModel *m);

// One forward pass and the WSEE it achieves. The channel must match the
// model's scenario.
//
// # Safety
// Handles must be live and the output pointers writable.
enum UeStatus ue_fum_infer(const struct UeFumModel *m,
                           const struct UeChannel *ch,
                           double *rho_out,
                           size_t len,
                           double *wsee_out);

// Loads a MASUM model from its JSON serialisation.
//
// # Safety
// `json` must be NUL-terminated and `out` writable.
enum UeStatus ue_masum_from_json(const char *json, struct UeMasumModel **out);

// # Safety
// `m` must be null or a handle not yet freed.
void ue_masum_free(struct UeMasumModel *m);

// One forward pass and the WSEE it achieves. The channel must match the
// model's scenario.
//
// # Safety
// Handles must be live and the output pointers writable.
enum UeStatus ue_masum_infer(const struct UeMasumModel *m,
                             const struct UeChannel *ch,
                             double *rho_out,
                             size_t len,
                             double *wsee_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNFOLD_EE_H */
