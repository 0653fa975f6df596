/*
 * Copyright 2026 The Pricure Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the pricure collaborative inference runtime.
 *
 * Fallible functions return a pricure_status. On failure a human-readable
 * message is available from pricure_last_error() on the calling thread until
 * the next call on that thread. Handles are opaque; each *_free function
 * accepts NULL. Handles are not thread-safe; distinct handles may be used
 * from distinct threads.
 */

#ifndef PRICURE_PRICURE_H_
#define PRICURE_PRICURE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(PRICURE_BUILDING_LIBRARY)
#define PRICURE_API __attribute__((visibility("default")))
#else
#define PRICURE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pricure_status {
  PRICURE_OK = 0,
  PRICURE_E_USAGE = 1,
  PRICURE_E_CONTRACT = 2,
  PRICURE_E_RANGE = 3,
  PRICURE_E_PARSE = 4,
  PRICURE_E_IO = 5,
  PRICURE_E_PROTOCOL = 10,
  PRICURE_E_DESYNC = 11,
  PRICURE_E_CONFIG_MISMATCH = 12,
  PRICURE_E_TRIPLE_REUSE = 13,
  PRICURE_E_TAMPER = 14,
  PRICURE_E_BUDGET_EXHAUSTED = 20,
  PRICURE_E_TIMEOUT = 30,
  PRICURE_E_CONNECTION_RESET = 31,
  PRICURE_E_TRANSPORT = 32,
  PRICURE_E_BAD_MAGIC = 40,
  PRICURE_E_BAD_VERSION = 41,
  PRICURE_E_SHORT_READ = 42,
  PRICURE_E_LENGTH_OVERFLOW = 43,
  PRICURE_E_UNKNOWN_TYPE = 44,
  PRICURE_E_INTERNAL = 99
} pricure_status;

/* Coarse classes of a status, used for process exit codes. */
typedef enum pricure_status_class {
  PRICURE_CLASS_OK = 0,
  PRICURE_CLASS_USAGE = 1,     /* usage, contract, range */
  PRICURE_CLASS_PROTOCOL = 2,  /* protocol violations, tampering */
  PRICURE_CLASS_TRANSPORT = 3, /* timeouts, resets, framing */
  PRICURE_CLASS_BUDGET = 4,
  PRICURE_CLASS_IO = 5, /* file access and parsing */
  PRICURE_CLASS_INTERNAL = 6
} pricure_status_class;

typedef enum pricure_mode {
  PRICURE_MODE_VOTE = 0,  /* vote histogram, Lap(s/eps) per class */
  PRICURE_MODE_SCORE = 1, /* clipped score sum, Lap(C/eps) per class */
  PRICURE_MODE_NONE = 2   /* noiseless vote, not private */
} pricure_mode;

typedef enum pricure_transport {
  PRICURE_TRANSPORT_LOOPBACK = 0, /* in-memory streams */
  PRICURE_TRANSPORT_TCP = 1       /* sockets on 127.0.0.1 */
} pricure_transport;

typedef enum pricure_role {
  PRICURE_ROLE_OWNER = 0,
  PRICURE_ROLE_WORKER_A = 1,
  PRICURE_ROLE_WORKER_B = 2,
  PRICURE_ROLE_DEALER = 3,
  PRICURE_ROLE_AGGREGATOR = 4,
  PRICURE_ROLE_CLIENT = 5
} pricure_role;

typedef struct pricure_manifest pricure_manifest;
typedef struct pricure_session pricure_session;
typedef struct pricure_report pricure_report;
typedef struct pricure_party_result pricure_party_result;

/* ---- General ---------------------------------------------------------- */

PRICURE_API const char* pricure_version(void);
/* Message of the last failure on this thread; "" if none. */
PRICURE_API const char* pricure_last_error(void);
/* Stable identifier such as "protocol" or "budget-exhausted". */
PRICURE_API const char* pricure_status_name(pricure_status status);
PRICURE_API pricure_status_class pricure_classify(pricure_status status);
/* "vote", "score" or "none". */
PRICURE_API pricure_status pricure_parse_mode(const char* name, pricure_mode* out);
/* "owner", "worker_a", "worker_b", "dealer", "aggregator" or "client". */
PRICURE_API pricure_status pricure_parse_role(const char* name, pricure_role* out);

/* ---- Fixtures --------------------------------------------------------- */

typedef struct pricure_fixture_options {
  const char* preset; /* mnist, fmnist, idc, mimic or blobs */
  uint32_t owners;
  uint64_t seed;
  uint32_t samples;
  const char* output_dir;
  pricure_mode mode;
  double epsilon;
} pricure_fixture_options;

/* Fills defaults: blobs, 10 owners, seed 1, 100 samples, vote, 0.05. */
PRICURE_API void pricure_fixture_options_init(pricure_fixture_options* options);

/*
 * Writes model_NNN.model files, dataset.csv and manifest.json. The manifest
 * path is copied into path_out (NUL-terminated); PRICURE_E_RANGE if it does
 * not fit in path_capacity bytes.
 */
PRICURE_API pricure_status pricure_write_fixtures(const pricure_fixture_options* options,
                                                  char* path_out, size_t path_capacity);

/* ---- Manifests -------------------------------------------------------- */

PRICURE_API pricure_status pricure_manifest_load(const char* path, pricure_manifest** out);
PRICURE_API pricure_status pricure_manifest_save(const pricure_manifest* manifest,
                                                 const char* path);
PRICURE_API void pricure_manifest_free(pricure_manifest* manifest);

/* Overrides applied before pricure_session_prepare. */
PRICURE_API pricure_status pricure_manifest_set_privacy(pricure_manifest* manifest,
                                                        pricure_mode mode, double epsilon);
PRICURE_API pricure_status pricure_manifest_set_clip(pricure_manifest* manifest, double clip);
/* A negative or infinite cap removes the limit. */
PRICURE_API pricure_status pricure_manifest_set_budget_cap(pricure_manifest* manifest,
                                                           double cap);
/* 0 queries every dataset row. */
PRICURE_API pricure_status pricure_manifest_set_rounds(pricure_manifest* manifest,
                                                       uint64_t rounds);
PRICURE_API pricure_status pricure_manifest_set_seed(pricure_manifest* manifest, uint64_t seed);
PRICURE_API pricure_status pricure_manifest_set_timeout_ms(pricure_manifest* manifest,
                                                           uint32_t timeout_ms);
/* Keys "worker_a", "worker_b", "aggregator"; values "host:port". */
PRICURE_API pricure_status pricure_manifest_set_endpoint(pricure_manifest* manifest,
                                                         const char* key, const char* address);
PRICURE_API pricure_status pricure_manifest_set_output_dir(pricure_manifest* manifest,
                                                           const char* dir);
/* Borrowed; valid until the manifest changes or is freed. */
PRICURE_API const char* pricure_manifest_output_dir(const pricure_manifest* manifest);
PRICURE_API pricure_mode pricure_manifest_mode(const pricure_manifest* manifest);
PRICURE_API double pricure_manifest_epsilon(const pricure_manifest* manifest);

/* ---- Sessions --------------------------------------------------------- */

/* Loads every model and the dataset and derives the session config. */
PRICURE_API pricure_status pricure_session_prepare(const pricure_manifest* manifest,
                                                   pricure_session** out);
PRICURE_API void pricure_session_free(pricure_session* session);

PRICURE_API uint32_t pricure_session_owners(const pricure_session* session);
PRICURE_API uint64_t pricure_session_rounds(const pricure_session* session);
PRICURE_API uint32_t pricure_session_classes(const pricure_session* session);
/* Network shape such as "784-128-64-10"; borrowed. */
PRICURE_API const char* pricure_session_spec(const pricure_session* session);
/* Canonical session JSON; borrowed. */
PRICURE_API const char* pricure_session_config_json(const pricure_session* session);

/* ---- Simulation ------------------------------------------------------- */

/* Runs every party in this process and checks against the plaintext
 * reference. */
PRICURE_API pricure_status pricure_simulate(const pricure_session* session,
                                            pricure_transport transport,
                                            pricure_report** out);
PRICURE_API void pricure_report_free(pricure_report* report);

PRICURE_API uint64_t pricure_report_rounds(const pricure_report* report);
/* label_out receives the released label; *answered is 0 when the budget
 * refused the round. */
PRICURE_API pricure_status pricure_report_label(const pricure_report* report, uint64_t round,
                                                uint32_t* label_out, int* answered);
PRICURE_API pricure_status pricure_report_reference_label(const pricure_report* report,
                                                          uint64_t round, uint32_t* out);
PRICURE_API pricure_status pricure_report_true_label(const pricure_report* report,
                                                     uint64_t round, uint32_t* out);

typedef struct pricure_report_summary {
  uint64_t rounds;
  uint64_t refused;
  double agreement;          /* released vs reference labels */
  double accuracy;           /* released vs true labels */
  double reference_accuracy; /* reference vs true labels */
  int64_t max_output_error_ulp;
  double budget_spent; /* +inf in noiseless mode */
} pricure_report_summary;

PRICURE_API pricure_status pricure_report_summary_get(const pricure_report* report,
                                                      pricure_report_summary* out);

typedef enum pricure_timing {
  PRICURE_TIMING_SHARE = 0,      /* per model, owner side */
  PRICURE_TIMING_WORKER = 1,     /* per round, slower worker */
  PRICURE_TIMING_AGGREGATOR = 2, /* per round */
  PRICURE_TIMING_CLIENT = 3      /* per query, end to end */
} pricure_timing;

typedef struct pricure_timing_stats {
  uint64_t count;
  double mean_ms;
  double p50_ms;
  double p95_ms;
  double max_ms;
} pricure_timing_stats;

PRICURE_API pricure_status pricure_report_timing(const pricure_report* report,
                                                 pricure_timing which,
                                                 pricure_timing_stats* out);
/* Writes labels.csv and report.json into dir (created if missing). */
PRICURE_API pricure_status pricure_report_write(const pricure_report* report, const char* dir);
/* "cpu model, N threads". Borrowed. */
PRICURE_API const char* pricure_hardware_description(void);

/* ---- Evaluation ------------------------------------------------------- */

/*
 * Accuracy over the epsilon x owner-count grid from a noiseless report,
 * re-releasing each recorded round `trials` times per cell. Writes the
 * versioned CSV to csv_path.
 */
PRICURE_API pricure_status pricure_evaluate(const pricure_report* noiseless,
                                            const double* epsilons, size_t n_epsilons,
                                            const uint32_t* owner_counts, size_t n_owner_counts,
                                            pricure_mode mode, uint32_t trials, uint64_t seed,
                                            const char* csv_path);

/* ---- One party per process ------------------------------------------- */

/* Runs one role over TCP against the manifest endpoints. index is the
 * owner number (1-based) for owners and ignored otherwise. */
PRICURE_API pricure_status pricure_run_party(const pricure_session* session,
                                             const pricure_manifest* manifest, pricure_role role,
                                             uint32_t index, pricure_party_result** out);
PRICURE_API void pricure_party_result_free(pricure_party_result* result);
/* Rounds with a label; 0 for roles other than client and aggregator. */
PRICURE_API uint64_t pricure_party_result_rounds(const pricure_party_result* result);
PRICURE_API pricure_status pricure_party_result_label(const pricure_party_result* result,
                                                      uint64_t round, uint32_t* label_out,
                                                      int* answered);

#ifdef __cplusplus
}
#endif

#endif /* PRICURE_PRICURE_H_ */
