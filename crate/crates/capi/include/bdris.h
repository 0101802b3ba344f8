#ifndef BDRIS_H
#define BDRIS_H

/* Generated by cbindgen from bdris-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define BDRIS_OK 0

/**
 * Null pointer or out-of-range argument.
 */
#define BDRIS_ERR_ARG 1

/**
 * Scenario rejected by validation or unparsable input.
 */
#define BDRIS_ERR_CONFIG 2

/**
 * Solver or factorization failure.
 */
#define BDRIS_ERR_NUMERICAL 3

/**
 * Internal panic caught at the boundary.
 */
#define BDRIS_ERR_PANIC 4

/**
 * Stage-one solver: Riemannian descent on the full surface.
 */
#define BDRIS_STAGE1_MO 0

/**
 * Stage-one solver: relax-then-project least squares.
 */
#define BDRIS_STAGE1_RTP 1

/**
 * Stage-one solver: per-group block descent (needs `group_size`).
 */
#define BDRIS_STAGE1_GROUP 2

/**
 * Stage-one solver: coordinate descent over diagonal phases.
 */
#define BDRIS_STAGE1_DIAG 3

/**
 * Stage-one solver: joint alternation with the beamformers.
 */
#define BDRIS_STAGE1_JOINT 4

/**
 * Stage-two design: per-link SVD with waterfilling.
 */
#define BDRIS_STAGE2_SVD 0

/**
 * Stage-two design: leakage-minimizing subspace alternation.
 */
#define BDRIS_STAGE2_MINIL 1

/**
 * Stage-two design: per-stream SINR maximization.
 */
#define BDRIS_STAGE2_MAXSINR 2

/**
 * Stage-two design: sum-rate surrogate ascent.
 */
#define BDRIS_STAGE2_MAXSR 3

/**
 * Opaque scenario handle.
 */
typedef struct BdrisScenario BdrisScenario;

/**
 * Metrics of one Monte-Carlo trial.
 */
typedef struct BdrisTrialMetrics {
  /**
   * Residual interference leakage after stage one (linear, mW).
   */
  double il;
  /**
   * Interference-to-noise change versus the surface switched off (dB).
   */
  double delta_inr_db;
  /**
   * Sum rate over all links (bit/s/Hz).
   */
  double sum_rate;
  /**
   * Stage-one iteration count.
   */
  int32_t iters_stage1;
} BdrisTrialMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `cap` bytes). Returns the full message length in bytes
 * excluding the NUL; call with a null `buf` or `cap` 0 to query the length.
 */
size_t bdris_last_error(char *buf, size_t cap);

/**
 * Allocate a scenario with the default three-link desk-scale geometry.
 */
struct BdrisScenario *bdris_scenario_new_default(void);

/**
 * Parse a scenario from TOML text (same keys as the CLI experiment file,
 * sweeps ignored). Returns null and sets the thread error on failure.
 *
 * # Safety
 * `text` must be a valid NUL-terminated C string.
 */
struct BdrisScenario *bdris_scenario_from_toml(const char *text);

/**
 * Release a scenario handle. Null is a no-op.
 *
 * # Safety
 * `scenario` must be null or a pointer produced by a `bdris_scenario_*`
 * constructor that has not been freed yet.
 */
void bdris_scenario_free(struct BdrisScenario *scenario);

/**
 * Set the number of surface elements.
 *
 * # Safety
 * `scenario` must be a live handle from a `bdris_scenario_*` constructor.
 */
int bdris_scenario_set_m(struct BdrisScenario *scenario, int m);

/**
 * Set the transmit power per link in dBm.
 *
 * # Safety
 * `scenario` must be a live handle from a `bdris_scenario_*` constructor.
 */
int bdris_scenario_set_pt_dbm(struct BdrisScenario *scenario, double pt_dbm);

/**
 * Set the surface position in meters.
 *
 * # Safety
 * `scenario` must be a live handle from a `bdris_scenario_*` constructor.
 */
int bdris_scenario_set_position(struct BdrisScenario *scenario, double x, double y, double z);

/**
 * Set the master seed that trial indices are derived from.
 *
 * # Safety
 * `scenario` must be a live handle from a `bdris_scenario_*` constructor.
 */
int bdris_scenario_set_seed(struct BdrisScenario *scenario, uint64_t seed);

/**
 * Free-space-plus-exponent path loss in dB at `distance_m` meters.
 */
double bdris_path_loss_db(double distance_m, double alpha);

/**
 * Thermal noise power in dBm for the given bandwidth and noise figure.
 */
double bdris_noise_power_dbm(double bandwidth_hz, double noise_figure_db);

/**
 * Run one seeded trial: draw channels, solve stage one, design stage-two
 * beamformers, and fill `out`. `trial` indexes an independent random
 * stream derived from the scenario seed; the same (scenario, trial) pair
 * always reproduces the same metrics.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer to a
 * `BdrisTrialMetrics`.
 */
int bdris_run_trial(const struct BdrisScenario *scenario,
                    uint64_t trial,
                    int stage1,
                    int group_size,
                    int stage2,
                    struct BdrisTrialMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDRIS_H */
