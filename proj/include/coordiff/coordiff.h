/* C interface to the coordinate-descent diffusion learning library.
 *
 * All functions return a cd_status; on failure, cd_last_error() describes the
 * problem (thread-local).  Strings returned through `*_out` parameters are
 * heap-allocated and must be released with cd_string_free().
 */
#ifndef COORDIFF_H
#define COORDIFF_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  CD_OK = 0,
  CD_ERR_VALIDATION = 1,    /* bad config, matrix, or parameter */
  CD_ERR_IO = 2,            /* file not found / unreadable */
  CD_ERR_NOT_CONVERGED = 3, /* learning curve not flat; lengthen the horizon */
  CD_ERR_DIVERGED = 4,      /* a trajectory blew up */
  CD_ERR_TOLERANCE = 5,     /* report produced, but a verdict failed */
  CD_ERR_INTERNAL = 6
} cd_status;

/* Opaque, fully materialized scenario (network, risks, run controls). */
typedef struct cd_scenario cd_scenario;

/* Message for the most recent error on this thread; never NULL. */
const char* cd_last_error(void);

/* Constructors: JSON config file, JSON text, or a built-in preset id
 * (two_agent_a, two_agent_b, mse_n100_smallr, mse_n25_smallr, mse_white,
 * logistic_uniform, logistic_theta_neg, logistic_theta_pos). */
cd_status cd_scenario_from_file(const char* path, cd_scenario** out);
cd_status cd_scenario_from_string(const char* json_text, cd_scenario** out);
cd_status cd_scenario_from_preset(const char* preset_id, cd_scenario** out);
void cd_scenario_free(cd_scenario* scenario);

/* Run-control overrides. */
cd_status cd_scenario_set_runs(cd_scenario* scenario, int runs);
cd_status cd_scenario_set_seed(cd_scenario* scenario, uint64_t seed);
cd_status cd_scenario_set_threads(cd_scenario* scenario, int threads);

/* Scenario serialized back to JSON with all parameter draws explicit. */
cd_status cd_scenario_to_json(const cd_scenario* scenario, char** json_out);

/* Ensemble-averaged learning curve as CSV (`iteration,msd_db[,er_db]`).
 * Nonzero `full_gradient` zeroes every missing probability (the reference
 * strategy). */
cd_status cd_simulate_csv(const cd_scenario* scenario, int full_gradient, char** csv_out);

/* Closed-form predictions (steady states, rates, comparison diagnostics,
 * operation counts) as JSON. */
cd_status cd_theory_json(const cd_scenario* scenario, char** json_out);

/* Simulation vs. theory comparison.  `coor_csv_out` / `grad_csv_out` may be
 * NULL when the curves are not wanted.  Returns CD_ERR_TOLERANCE (with the
 * report still written) when a verdict fails. */
cd_status cd_compare_json(const cd_scenario* scenario, char** report_out, char** coor_csv_out,
                          char** grad_csv_out);

/* End-to-end preset reproduction with per-preset verdicts; same output and
 * tolerance conventions as cd_compare_json. */
cd_status cd_reproduce_json(const cd_scenario* scenario, char** report_out, char** coor_csv_out,
                            char** grad_csv_out);

void cd_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* COORDIFF_H */
