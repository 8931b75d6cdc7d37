#ifndef PHIREG_H
#define PHIREG_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. `InvalidInput` and `Numerical` match the CLI exit codes.
 */
typedef enum PhiregStatus {
  PHIREG_STATUS_OK = 0,
  PHIREG_STATUS_NULL_POINTER = 1,
  PHIREG_STATUS_INVALID_INPUT = 2,
  PHIREG_STATUS_NUMERICAL = 3,
  PHIREG_STATUS_UTF8 = 4,
  PHIREG_STATUS_OUT_OF_RANGE = 5,
  PHIREG_STATUS_PANIC = 6,
} PhiregStatus;

/**
 * Online threshold learner for conformal prediction.
 */
typedef struct PhiregConformal PhiregConformal;

/**
 * A gradient learner (GD, OG or MD) on a convex set.
 */
typedef struct PhiregLearner PhiregLearner;

/**
 * The records and checks of one scenario run.
 */
typedef struct PhiregScenario PhiregScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length plus one,
 * or 0 when there is no error.
 */
size_t phireg_last_error(char *buf, size_t len);

/**
 * Releases a string returned by this library.
 */
void phireg_string_free(char *s);

enum PhiregStatus phireg_conformal_new(double theta1,
                                       double eta,
                                       double alpha,
                                       struct PhiregConformal **out);

/**
 * Feeds one score; `covered` receives whether it fell at or below the
 * threshold in force.
 */
enum PhiregStatus phireg_conformal_update(struct PhiregConformal *h, double score, bool *covered);

enum PhiregStatus phireg_conformal_theta(const struct PhiregConformal *h, double *out);

enum PhiregStatus phireg_conformal_rounds(const struct PhiregConformal *h, size_t *out);

/**
 * Empirical miscoverage, `|miscoverage - α|`, and `|θ_end - θ_1|/(ηT)`.
 * Any output pointer may be null.
 */
enum PhiregStatus phireg_conformal_stats(const struct PhiregConformal *h,
                                         double *miscoverage,
                                         double *gap,
                                         double *identity_gap);

void phireg_conformal_free(struct PhiregConformal *h);

/**
 * Builds a learner from JSON descriptions of the set and learner, e.g.
 * `{"kind":"ball","center":[0,0],"radius":1}` and
 * `{"learner":"gd","x1":[0,0],"schedule":{"schedule":"constant","eta":0.1}}`.
 */
enum PhiregStatus phireg_learner_new(const char *set_json,
                                     const char *learner_json,
                                     struct PhiregLearner **out);

enum PhiregStatus phireg_learner_dim(const struct PhiregLearner *h, size_t *out);

/**
 * Writes the current play into `x`, which must hold `len == dim` values.
 */
enum PhiregStatus phireg_learner_next(struct PhiregLearner *h, double *x, size_t len);

/**
 * Reports the gradient of this round's loss at the play.
 */
enum PhiregStatus phireg_learner_observe(struct PhiregLearner *h, const double *grad, size_t len);

void phireg_learner_free(struct PhiregLearner *h);

/**
 * Runs a scenario given as JSON text.
 */
enum PhiregStatus phireg_scenario_run(const char *config_json, struct PhiregScenario **out);

/**
 * `passed` receives whether every check passed.
 */
enum PhiregStatus phireg_scenario_passed(const struct PhiregScenario *h, bool *passed);

enum PhiregStatus phireg_scenario_check_count(const struct PhiregScenario *h, size_t *out);

/**
 * Check `i`: its result, and its name and detail as new strings the caller
 * frees with `phireg_string_free`. `name` and `detail` may be null.
 */
enum PhiregStatus phireg_scenario_check(const struct PhiregScenario *h,
                                        size_t i,
                                        bool *passed,
                                        char **name,
                                        char **detail);

enum PhiregStatus phireg_scenario_record_count(const struct PhiregScenario *h, size_t *out);

/**
 * Writes the run's CSV to `path`, creating parent directories.
 */
enum PhiregStatus phireg_scenario_write_csv(const struct PhiregScenario *h, const char *path);

void phireg_scenario_free(struct PhiregScenario *h);

/**
 * Audits a JSON trajectory against a JSON deviation spec. `out` receives a
 * JSON array of `{name, total, exactness, witness}` to be released with
 * `phireg_string_free`.
 */
enum PhiregStatus phireg_audit(const char *trajectory_json, const char *spec_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHIREG_H */
