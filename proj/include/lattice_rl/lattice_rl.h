/* Copyright 2026 The lattice_rl Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to lattice_rl. Every call returns an lrl_status; on failure a
 * message is available from lrl_last_error() on the same thread. Options and
 * results are JSON documents. Strings returned through `char**` are owned by
 * the caller and released with lrl_string_free().
 *
 * Every result object carries "options": the call's options with all
 * defaults filled in, which reproduce the result when passed back. Seeds are
 * root seeds; each call draws from its own named substream of the seed.
 */

#ifndef LATTICE_RL_H
#define LATTICE_RL_H

#include <stddef.h>

#if defined(_WIN32)
#define LRL_API __declspec(dllexport)
#else
#define LRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lrl_status {
    LRL_OK = 0,
    LRL_INVALID_ARGUMENT = 1,
    LRL_INVALID_LATTICE = 2,
    LRL_INVALID_ACTION = 3,
    LRL_STATE_SPACE_TOO_LARGE = 4,
    LRL_SYMMETRY_UNAVAILABLE = 5,
    LRL_INVALID_MODEL = 6,
    LRL_DEGENERATE_GROUND_STATE = 7,
    LRL_CONVERGENCE_FAILURE = 8,
    LRL_INVALID_SHIFT = 9,
    LRL_NON_ERGODIC = 10,
    LRL_INVALID_SCALE = 11,
    LRL_DIVISION_BY_ZERO_AMPLITUDE = 12,
    LRL_INVALID_WAVEFUNCTION = 13,
    LRL_TIMESTEP_TOO_LARGE = 14,
    LRL_TERMINAL_UNREACHABLE = 15,
    LRL_SUPPORT_MISMATCH = 16,
    LRL_SHAPE_ERROR = 17,
    LRL_TRAINING_DIVERGED = 18,
    LRL_SAMPLER_STUCK = 19,
    LRL_DEGENERATE_SERIES = 20,
    LRL_IO_ERROR = 21,
    LRL_FORMAT_ERROR = 22,
    LRL_INTERNAL = 100
} lrl_status;

typedef struct lrl_model lrl_model;
typedef struct lrl_qnet lrl_qnet;

LRL_API const char* lrl_version(void);
/* Stable identifier such as "InvalidArgument". */
LRL_API const char* lrl_status_name(lrl_status status);
/* Message of the last failed call on this thread; empty after a success. */
LRL_API const char* lrl_last_error(void);
LRL_API void lrl_string_free(char* text);

/* {"kind": "ising", "J", "h", "lattice": {"dims": [...], "periodic": ...}}
 * or {"kind": "xxz", "J", "J_perp", "lattice": {...}}. */
LRL_API lrl_status lrl_model_create(const char* spec_json, lrl_model** out);
LRL_API void lrl_model_destroy(lrl_model* model);
LRL_API lrl_status lrl_model_to_json(const lrl_model* model, char** out_json);
LRL_API int lrl_model_n_sites(const lrl_model* model);

/* Ground state by power iteration over the enumerated space.
 * options: {"sector", "energy_tol", "residual_tol", "max_iterations",
 *           "dump_states"}
 * result:  {"E0", "E0_per_site", "residual", "iterations", "n_states",
 *           "sector", "states": [{"state", "phi"}] (dump_states only)} */
LRL_API lrl_status lrl_ground_state(const lrl_model* model, const char* options_json,
                                    char** result_json);

/* Tabular solution of one RL formulation.
 * options: {"formulation": {...}, "sector", "method": "value_iteration" |
 *           "power_iteration", "tol", "max_iterations", "dump_states",
 *           "oracle"}
 * result:  {"formulation" (constants resolved), "method", "E0", "R_star",
 *           "residual", "iterations", "n_states", "oracle": {"E0",
 *           "E0_error", "amplitude_error"}, "states": [{"state", "U"}]}
 * "residual" is the sup-norm Bellman residual of the returned values. */
LRL_API lrl_status lrl_solve(const lrl_model* model, const char* options_json, char** result_json);

/* Feynman-Kac estimate of phi(s0). `qnet` may be NULL unless "checkpoint" is
 * requested.
 * options: {"s0", "T", "n_traj", "seed", "rates": "passive" | "optimal" |
 *           "checkpoint", "sign": "minus" | "plus", "energy": number |
 *           "oracle" | "checkpoint" | null, "terminal": "one" | "oracle" |
 *           "checkpoint", "sector"}
 * result:  {"estimate", "std_error", "variance", "n_jumps_mean", "n_traj",
 *           "energy", "oracle_phi" (when enumerable)} */
LRL_API lrl_status lrl_fk_estimate(const lrl_model* model, const lrl_qnet* qnet,
                                   const char* options_json, char** result_json);

typedef struct lrl_train_entry {
    int episode;
    double loss;
    int has_e_var;
    double e_var;
    double e0_estimate;
    double lr;
} lrl_train_entry;

typedef void (*lrl_train_callback)(const lrl_train_entry* entry, void* user);

/* Soft Q-learning. config: {"formulation", "learning_rate", "lr_decay",
 * "lr_decay_every", "batch_size", "buffer_size", "walkers", "target_update",
 * "episodes", "seed", "validation_interval", "validation_samples",
 * "exact_validation_max_sites", "network", "initial_energy",
 * "divergence_checkpoint", "oracle"}.
 * result: {"final_energy", "e0_estimate", "episodes", "n_params",
 *          "oracle_E0", "relative_error"}. `callback` may be NULL. */
LRL_API lrl_status lrl_train(const lrl_model* model, const char* config_json,
                             lrl_train_callback callback, void* user, lrl_qnet** out,
                             char** result_json);

LRL_API lrl_status lrl_qnet_save(const lrl_qnet* qnet, const char* path);
LRL_API lrl_status lrl_qnet_load(const char* path, lrl_qnet** out);
LRL_API void lrl_qnet_destroy(lrl_qnet* qnet);
/* {"model", "formulation", "network", "n_params", "e0_estimate", "episode"} */
LRL_API lrl_status lrl_qnet_info(const lrl_qnet* qnet, char** out_json);
LRL_API lrl_status lrl_qnet_model(const lrl_qnet* qnet, lrl_model** out);
/* log phi of `n` states written as '+'/'-' strings. */
LRL_API lrl_status lrl_qnet_log_phi(const lrl_qnet* qnet, const char* const* states, size_t n,
                                    double* out);

/* Metropolis-Hastings estimate of the variational energy.
 * options: {"proposal": "uniform" | "q1" | "qk:<k>", "steps", "burn_in",
 *           "seed", "guide": "network" | "exact", "tabulate", "series"}
 * result:  {"proposal", "guide", "energy", "std_error", "samples",
 *           "acceptance", "tau", "tau_integrated", "lags_used", "flagged",
 *           "series": {"local_energy", "diagonal_energy"} (series only)} */
LRL_API lrl_status lrl_sample(const lrl_model* model, const lrl_qnet* qnet,
                              const char* options_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif
