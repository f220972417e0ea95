// Copyright 2026 The NeuroLens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * C interface to the neurolens toolkit.
 *
 * Every object is an opaque handle created by an nl_*_create / _load / _fit /
 * _build call and released with the matching nl_*_free. Every fallible call
 * returns an nl_status; on failure nl_last_error() describes the problem for
 * the calling thread until its next failing call. Strings returned through
 * `char**` out-parameters are owned by the caller and released with
 * nl_string_free.
 *
 * Handles are immutable after creation and may be shared between threads.
 */

#ifndef NEUROLENS_NEUROLENS_H_
#define NEUROLENS_NEUROLENS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(NEUROLENS_BUILDING_LIBRARY)
#define NL_API __declspec(dllexport)
#else
#define NL_API __declspec(dllimport)
#endif
#else
#define NL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nl_status {
  NL_OK = 0,
  NL_ERR_INVALID_ARGUMENT = 1,
  NL_ERR_IO = 2,
  NL_ERR_BAD_MAGIC = 3,
  NL_ERR_VERSION_MISMATCH = 4,
  NL_ERR_TRUNCATED = 5,
  NL_ERR_NON_FINITE = 6,
  NL_ERR_LABEL_OUT_OF_RANGE = 7,
  NL_ERR_VALIDATION = 8,
  NL_ERR_FORMAT = 9,
  NL_ERR_NUMERICAL = 10,
  NL_ERR_INTERNAL = 11
} nl_status;

typedef enum nl_method {
  NL_METHOD_APP = 0,
  NL_METHOD_AURA = 1,
  NL_METHOD_RANGE = 2,
  NL_METHOD_ADAPTIVE = 3,
  NL_METHOD_FULL = 4
} nl_method;

typedef enum nl_overlap_mode {
  NL_OVERLAP_TOP_K_SALIENT = 0,
  NL_OVERLAP_ALL_ACTIVE = 1
} nl_overlap_mode;

typedef struct nl_concept_stats {
  double mean;
  double std; /* population standard deviation */
  double firing_freq;
  uint64_t sample_count;
  double mean_abs;
} nl_concept_stats;

typedef struct nl_dataset nl_dataset;
typedef struct nl_density_bank nl_density_bank;
typedef struct nl_plan nl_plan;
typedef struct nl_readout nl_readout;

NL_API const char* nl_version(void);
NL_API const char* nl_last_error(void);
NL_API const char* nl_status_name(nl_status status);
NL_API void nl_string_free(char* s);

/* Datasets (ACTV files plus .manifest.json sidecar). */
NL_API nl_status nl_dataset_load(const char* path, nl_dataset** out);
NL_API nl_status nl_dataset_write(const nl_dataset* dataset, const char* path);
NL_API nl_status nl_dataset_create(uint64_t n_samples, uint64_t n_neurons, uint32_t n_concepts,
                                   const uint32_t* labels, const float* values,
                                   const char* manifest_json, nl_dataset** out);
NL_API void nl_dataset_free(nl_dataset* dataset);
NL_API nl_status nl_dataset_shape(const nl_dataset* dataset, uint64_t* n_samples,
                                  uint64_t* n_neurons, uint32_t* n_concepts);
/* Borrowed pointers, valid while the handle lives. */
NL_API const float* nl_dataset_values(const nl_dataset* dataset);
NL_API const uint32_t* nl_dataset_labels(const nl_dataset* dataset);
NL_API nl_status nl_dataset_manifest_json(const nl_dataset* dataset, char** out);
/* Shape, representation and per-concept sample counts. */
NL_API nl_status nl_dataset_summary_json(const nl_dataset* dataset, char** out);
NL_API nl_status nl_concept_stats_get(const nl_dataset* dataset, uint64_t neuron, uint32_t concept_id,
                                      nl_concept_stats* out);

/* Seeded synthetic datasets from a JSON configuration. */
NL_API nl_status nl_synth_generate(const char* config_json, nl_dataset** out);

/* Concept-conditioned densities (DENS cache files). `threads` of 0 means 1. */
NL_API nl_status nl_bank_fit(const nl_dataset* dataset, uint32_t n_bins, uint32_t threads,
                             nl_density_bank** out);
NL_API nl_status nl_bank_load(const char* path, nl_density_bank** out);
NL_API nl_status nl_bank_write(const nl_density_bank* bank, const char* path);
NL_API void nl_bank_free(nl_density_bank* bank);
/* NL_ERR_INVALID_ARGUMENT when the (neuron, concept) density is absent. */
NL_API nl_status nl_bank_evaluate(const nl_density_bank* bank, uint64_t neuron, uint32_t concept_id,
                                  double x, double* out);
NL_API nl_status nl_posterior(const nl_density_bank* bank, uint64_t neuron, uint32_t target,
                              double x, double* out);

/* Separability and overlap reports as JSON. */
NL_API nl_status nl_separability_json(const nl_density_bank* bank, uint32_t threads, char** out);
NL_API nl_status nl_overlap_json(const nl_dataset* dataset, nl_overlap_mode mode, uint32_t top_k,
                                 char** out);

/* Intervention plans. `p` is NaN when not supplied; `bank` may be NULL for
 * methods other than APP. */
NL_API nl_status nl_plan_build(const nl_dataset* fit, const nl_density_bank* bank,
                               nl_method method, uint32_t target, double p, double tau,
                               nl_plan** out);
NL_API nl_status nl_plan_to_json(const nl_plan* plan, const char* density_ref, char** out);
NL_API nl_status nl_plan_from_json(const char* json, const nl_density_bank* bank, nl_plan** out);
/* Writes the plan's density-cache reference ("" when none). */
NL_API nl_status nl_plan_density_ref(const char* json, char** out);
NL_API nl_status nl_plan_method(const nl_plan* plan, nl_method* out);
NL_API void nl_plan_free(nl_plan* plan);
NL_API nl_status nl_plan_apply(const nl_plan* plan, const float* in, float* out, uint64_t n);
NL_API nl_status nl_plan_apply_dataset(const nl_plan* plan, const nl_dataset* dataset,
                                       uint32_t threads, nl_dataset** out,
                                       uint64_t* posterior_fallbacks);

/* Evaluation. */
NL_API nl_status nl_readout_train(const nl_dataset* dataset, nl_readout** out);
NL_API void nl_readout_free(nl_readout* readout);
/* Erasure report for `plan` on `eval`. Perplexities are NaN when absent. */
NL_API nl_status nl_erasure_report_json(const nl_readout* readout, const nl_dataset* eval,
                                        const nl_plan* plan, uint32_t threads, double ppl_base,
                                        double ppl_post, char** out);
NL_API nl_status nl_dppl(double ppl_base, double ppl_post, double* out);
NL_API nl_status nl_pearson(const double* xs, const double* ys, size_t n, double* r,
                            double* p_value);
NL_API nl_status nl_correlate_csv(const char* csv_text, char** out);

#ifdef __cplusplus
}
#endif

#endif /* NEUROLENS_NEUROLENS_H_ */
