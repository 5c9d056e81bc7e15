#ifndef TRAFFICGAME_H
#define TRAFFICGAME_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Behavior model selector for [`TgConfig::model`].
 */
#define TG_MODEL_FIXED 1

#define TG_MODEL_IMITATION 2

#define TG_MODEL_IMPATIENCE 3

typedef enum TgStatus {
  TG_STATUS_OK = 0,
  TG_STATUS_NULL_POINTER = 1,
  TG_STATUS_INVALID_CONFIG = 2,
  TG_STATUS_DOMAIN = 3,
  TG_STATUS_NO_DATA = 4,
  TG_STATUS_INVARIANT = 5,
  TG_STATUS_IO = 6,
  TG_STATUS_PANIC = 7,
} TgStatus;

/**
 * Opaque simulation handle.
 */
typedef struct TgSim TgSim;

/**
 * Plain-data simulation settings. Fill with [`tg_config_default`] and then
 * change what you need.
 */
typedef struct TgConfig {
  uint32_t model;
  uint64_t seed;
  double p_new;
  double p_slow;
  uint32_t v_max;
  uint64_t max_vehicles;
  uint64_t warmup_steps;
  /**
   * DE share for the fixed model, initial DE share for imitation.
   */
  double p_de;
  double core_fraction;
  uint64_t tau;
  double weibull_a;
  double weibull_b;
  /**
   * 0 discrete conditional, 1 raw clipped hazard.
   */
  uint32_t hazard_mode;
  bool clear_junction;
  bool record_meetings;
} TgConfig;

/**
 * Counts and means after the most recent step. Means are NaN when no
 * vehicle contributes.
 */
typedef struct TgMetrics {
  uint64_t step;
  uint64_t n_co;
  uint64_t n_de;
  uint64_t queued;
  double mean_speed_all;
  double mean_speed_co;
  double mean_speed_de;
  double ratio_q;
  double mean_wait;
  uint64_t conflicts_step;
  uint64_t type_changes_step;
  uint64_t conflicts_total;
  uint64_t type_changes_total;
  uint64_t meetings_logged;
} TgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tg_last_error(void);

/**
 * Static name of a status code; unknown codes give "unknown status".
 */
const char *tg_status_name(int32_t status);

/**
 * # Safety
 * `out` must be NULL or point to writable memory for one `TgConfig`.
 */
enum TgStatus tg_config_default(uint32_t model, struct TgConfig *out);

/**
 * Creates a simulation. On success `*out` owns a handle for [`tg_sim_free`].
 *
 * # Safety
 * `config` must be NULL or point to a valid `TgConfig`; `out` must be NULL
 * or writable.
 */
enum TgStatus tg_sim_new(const struct TgConfig *config, struct TgSim **out);

/**
 * # Safety
 * `sim` must be NULL or a handle from [`tg_sim_new`] not yet freed.
 */
void tg_sim_free(struct TgSim *sim);

/**
 * Advances `steps` time steps. With `check` set, lattice invariants are
 * verified after every step and the first violation stops the run.
 *
 * # Safety
 * `sim` must be NULL or a live handle.
 */
enum TgStatus tg_sim_step(struct TgSim *sim, uint64_t steps, bool check);

/**
 * # Safety
 * `sim` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum TgStatus tg_sim_metrics(const struct TgSim *sim, struct TgMetrics *out);

/**
 * Text picture of the lattice. Release `*out` with [`tg_string_free`].
 *
 * # Safety
 * `sim` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum TgStatus tg_sim_snapshot(const struct TgSim *sim, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void tg_string_free(char *s);

/**
 * Minimax and Bayes estimates of the CO share from the meetings logged so
 * far (requires `record_meetings`). Either output pointer may be NULL.
 *
 * # Safety
 * `sim` must be NULL or a live handle; outputs must be NULL or writable.
 */
enum TgStatus tg_sim_estimate(const struct TgSim *sim,
                              double prior_alpha,
                              double prior_beta,
                              double *minimax,
                              double *bayes);

/**
 * Estimates from `n` meetings with `sigma_xi` CO drivers among them.
 *
 * # Safety
 * Outputs must be NULL or writable.
 */
enum TgStatus tg_estimate(uint64_t n,
                          uint64_t sigma_xi,
                          double prior_alpha,
                          double prior_beta,
                          double *minimax,
                          double *bayes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAFFICGAME_H */
