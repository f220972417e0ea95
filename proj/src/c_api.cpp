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

#include "neurolens/neurolens.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "json.hpp"
#include "neurolens/activation_store.hpp"
#include "neurolens/density.hpp"
#include "neurolens/error.hpp"
#include "neurolens/evaluation.hpp"
#include "neurolens/intervention.hpp"
#include "neurolens/separability.hpp"
#include "neurolens/synthetic.hpp"

struct nl_dataset {
  neurolens::ActivationDataset value;
};
struct nl_density_bank {
  std::shared_ptr<const neurolens::DensityBank> value;
};
struct nl_plan {
  neurolens::InterventionPlan value;
};
struct nl_readout {
  neurolens::ReadoutModel value;
};

namespace {

thread_local std::string g_last_error;

nl_status to_status(neurolens::ErrorCode code) {
  using neurolens::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return NL_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return NL_ERR_IO;
    case ErrorCode::kBadMagic: return NL_ERR_BAD_MAGIC;
    case ErrorCode::kVersionMismatch: return NL_ERR_VERSION_MISMATCH;
    case ErrorCode::kTruncated: return NL_ERR_TRUNCATED;
    case ErrorCode::kNonFinite: return NL_ERR_NON_FINITE;
    case ErrorCode::kLabelOutOfRange: return NL_ERR_LABEL_OUT_OF_RANGE;
    case ErrorCode::kValidation: return NL_ERR_VALIDATION;
    case ErrorCode::kFormat: return NL_ERR_FORMAT;
    case ErrorCode::kNumerical: return NL_ERR_NUMERICAL;
  }
  return NL_ERR_INTERNAL;
}

nl_status set_error(nl_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
nl_status guarded(Fn&& fn) {
  try {
    fn();
    return NL_OK;
  } catch (const neurolens::Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(NL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(NL_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(NL_ERR_INTERNAL, "unknown error");
  }
}

void check_not_null(const void* p, const char* name) {
  neurolens::require(p != nullptr, neurolens::ErrorCode::kInvalidArgument,
                     std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

unsigned worker_count(std::uint32_t threads) { return threads == 0 ? 1u : threads; }

neurolens::Method to_method(nl_method m) {
  switch (m) {
    case NL_METHOD_APP: return neurolens::Method::kApp;
    case NL_METHOD_AURA: return neurolens::Method::kAura;
    case NL_METHOD_RANGE: return neurolens::Method::kRange;
    case NL_METHOD_ADAPTIVE: return neurolens::Method::kAdaptive;
    case NL_METHOD_FULL: return neurolens::Method::kFull;
  }
  neurolens::fail(neurolens::ErrorCode::kInvalidArgument, "unknown method id");
}

}  // namespace

extern "C" {

const char* nl_version(void) { return NEUROLENS_VERSION; }

const char* nl_last_error(void) { return g_last_error.c_str(); }

const char* nl_status_name(nl_status status) {
  switch (status) {
    case NL_OK: return "ok";
    case NL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NL_ERR_IO: return "i/o error";
    case NL_ERR_BAD_MAGIC: return "bad magic";
    case NL_ERR_VERSION_MISMATCH: return "version mismatch";
    case NL_ERR_TRUNCATED: return "truncated payload";
    case NL_ERR_NON_FINITE: return "non-finite value";
    case NL_ERR_LABEL_OUT_OF_RANGE: return "label out of range";
    case NL_ERR_VALIDATION: return "validation error";
    case NL_ERR_FORMAT: return "format error";
    case NL_ERR_NUMERICAL: return "numerical failure";
    case NL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void nl_string_free(char* s) { std::free(s); }

nl_status nl_dataset_load(const char* path, nl_dataset** out) {
  return guarded([&] {
    check_not_null(path, "path");
    check_not_null(out, "out");
    *out = new nl_dataset{neurolens::load_dataset(path)};
  });
}

nl_status nl_dataset_write(const nl_dataset* dataset, const char* path) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(path, "path");
    neurolens::write_dataset(dataset->value, path);
  });
}

nl_status nl_dataset_create(uint64_t n_samples, uint64_t n_neurons, uint32_t n_concepts,
                            const uint32_t* labels, const float* values,
                            const char* manifest_json, nl_dataset** out) {
  return guarded([&] {
    check_not_null(out, "out");
    check_not_null(manifest_json, "manifest_json");
    if (n_samples > 0) check_not_null(labels, "labels");
    if (n_samples * n_neurons > 0) check_not_null(values, "values");
    neurolens::ActivationDataset d;
    d.n_samples = n_samples;
    d.n_neurons = n_neurons;
    d.n_concepts = n_concepts;
    d.labels.assign(labels, labels + n_samples);
    d.values.assign(values, values + n_samples * n_neurons);
    d.manifest = neurolens::manifest_from_json(manifest_json);
    neurolens::validate(d);
    *out = new nl_dataset{std::move(d)};
  });
}

void nl_dataset_free(nl_dataset* dataset) { delete dataset; }

nl_status nl_dataset_shape(const nl_dataset* dataset, uint64_t* n_samples, uint64_t* n_neurons,
                           uint32_t* n_concepts) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    if (n_samples) *n_samples = dataset->value.n_samples;
    if (n_neurons) *n_neurons = dataset->value.n_neurons;
    if (n_concepts) *n_concepts = dataset->value.n_concepts;
  });
}

const float* nl_dataset_values(const nl_dataset* dataset) {
  return dataset ? dataset->value.values.data() : nullptr;
}

const uint32_t* nl_dataset_labels(const nl_dataset* dataset) {
  return dataset ? dataset->value.labels.data() : nullptr;
}

nl_status nl_dataset_manifest_json(const nl_dataset* dataset, char** out) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    *out = dup_string(neurolens::manifest_to_json(dataset->value.manifest));
  });
}

nl_status nl_dataset_summary_json(const nl_dataset* dataset, char** out) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    const auto& d = dataset->value;
    const auto parts = neurolens::partition_by_concept(d);
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& p : parts) counts.push_back(p.size());
    nlohmann::json j = {
        {"n_samples", d.n_samples},
        {"n_neurons", d.n_neurons},
        {"n_concepts", d.n_concepts},
        {"representation", neurolens::to_string(d.manifest.representation)},
        {"model", d.manifest.model},
        {"layer", d.manifest.layer},
        {"hook_point", d.manifest.hook_point},
        {"concept_names", d.manifest.concept_names},
        {"samples_per_concept", counts},
    };
    *out = dup_string(j.dump());
  });
}

nl_status nl_concept_stats_get(const nl_dataset* dataset, uint64_t neuron, uint32_t concept_id,
                               nl_concept_stats* out) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    const auto st = neurolens::concept_stats(dataset->value, neuron, concept_id);
    *out = {st.mean, st.std, st.firing_freq, st.sample_count, st.mean_abs};
  });
}

nl_status nl_synth_generate(const char* config_json, nl_dataset** out) {
  return guarded([&] {
    check_not_null(config_json, "config_json");
    check_not_null(out, "out");
    *out = new nl_dataset{neurolens::generate(neurolens::synth_config_from_json(config_json))};
  });
}

nl_status nl_bank_fit(const nl_dataset* dataset, uint32_t n_bins, uint32_t threads,
                      nl_density_bank** out) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    auto bank = std::make_shared<const neurolens::DensityBank>(
        neurolens::fit_density_bank(dataset->value, n_bins, worker_count(threads)));
    *out = new nl_density_bank{std::move(bank)};
  });
}

nl_status nl_bank_load(const char* path, nl_density_bank** out) {
  return guarded([&] {
    check_not_null(path, "path");
    check_not_null(out, "out");
    *out = new nl_density_bank{
        std::make_shared<const neurolens::DensityBank>(neurolens::load_density_bank(path))};
  });
}

nl_status nl_bank_write(const nl_density_bank* bank, const char* path) {
  return guarded([&] {
    check_not_null(bank, "bank");
    check_not_null(path, "path");
    neurolens::write_density_bank(*bank->value, path);
  });
}

void nl_bank_free(nl_density_bank* bank) { delete bank; }

nl_status nl_bank_evaluate(const nl_density_bank* bank, uint64_t neuron, uint32_t concept_id,
                           double x, double* out) {
  return guarded([&] {
    check_not_null(bank, "bank");
    check_not_null(out, "out");
    const auto& b = *bank->value;
    neurolens::require(neuron < b.n_neurons && concept_id < b.n_concepts,
                       neurolens::ErrorCode::kInvalidArgument, "index out of range");
    const auto& d = b.at(neuron, concept_id);
    neurolens::require(d.has_value(), neurolens::ErrorCode::kInvalidArgument,
                       "no density for this (neuron, concept)");
    *out = d->evaluate(x);
  });
}

nl_status nl_posterior(const nl_density_bank* bank, uint64_t neuron, uint32_t target, double x,
                       double* out) {
  return guarded([&] {
    check_not_null(bank, "bank");
    check_not_null(out, "out");
    *out = neurolens::posterior(*bank->value, neuron, target, x);
  });
}

nl_status nl_separability_json(const nl_density_bank* bank, uint32_t threads, char** out) {
  return guarded([&] {
    check_not_null(bank, "bank");
    check_not_null(out, "out");
    *out = dup_string(
        neurolens::to_json(neurolens::layer_separability(*bank->value, worker_count(threads))));
  });
}

nl_status nl_overlap_json(const nl_dataset* dataset, nl_overlap_mode mode, uint32_t top_k,
                          char** out) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    const auto rep = mode == NL_OVERLAP_ALL_ACTIVE
                         ? neurolens::active_neuron_overlap(dataset->value)
                         : neurolens::topk_salient_overlap(dataset->value, top_k);
    *out = dup_string(neurolens::to_json(rep));
  });
}

nl_status nl_plan_build(const nl_dataset* fit, const nl_density_bank* bank, nl_method method,
                        uint32_t target, double p, double tau, nl_plan** out) {
  return guarded([&] {
    check_not_null(fit, "fit");
    check_not_null(out, "out");
    std::optional<double> p_opt;
    if (!std::isnan(p)) p_opt = p;
    *out = new nl_plan{neurolens::build_plan(fit->value, bank ? bank->value : nullptr,
                                             to_method(method), target, p_opt, tau)};
  });
}

nl_status nl_plan_to_json(const nl_plan* plan, const char* density_ref, char** out) {
  return guarded([&] {
    check_not_null(plan, "plan");
    check_not_null(out, "out");
    *out = dup_string(neurolens::to_json(plan->value, density_ref ? density_ref : ""));
  });
}

nl_status nl_plan_from_json(const char* json, const nl_density_bank* bank, nl_plan** out) {
  return guarded([&] {
    check_not_null(json, "json");
    check_not_null(out, "out");
    *out = new nl_plan{neurolens::plan_from_json(json, bank ? bank->value : nullptr)};
  });
}

nl_status nl_plan_density_ref(const char* json, char** out) {
  return guarded([&] {
    check_not_null(json, "json");
    check_not_null(out, "out");
    *out = dup_string(neurolens::plan_density_ref(json));
  });
}

nl_status nl_plan_method(const nl_plan* plan, nl_method* out) {
  return guarded([&] {
    check_not_null(plan, "plan");
    check_not_null(out, "out");
    *out = static_cast<nl_method>(static_cast<int>(plan->value.method));
  });
}

void nl_plan_free(nl_plan* plan) { delete plan; }

nl_status nl_plan_apply(const nl_plan* plan, const float* in, float* out, uint64_t n) {
  return guarded([&] {
    check_not_null(plan, "plan");
    check_not_null(in, "in");
    check_not_null(out, "out");
    if (in != out) std::memmove(out, in, n * sizeof(float));
    neurolens::apply_plan_inplace(plan->value, {out, n});
  });
}

nl_status nl_plan_apply_dataset(const nl_plan* plan, const nl_dataset* dataset, uint32_t threads,
                                nl_dataset** out, uint64_t* posterior_fallbacks) {
  return guarded([&] {
    check_not_null(plan, "plan");
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    neurolens::TransformStats stats;
    auto result =
        neurolens::apply_plan(plan->value, dataset->value, worker_count(threads), &stats);
    if (posterior_fallbacks) *posterior_fallbacks = stats.posterior_fallbacks.load();
    *out = new nl_dataset{std::move(result)};
  });
}

nl_status nl_readout_train(const nl_dataset* dataset, nl_readout** out) {
  return guarded([&] {
    check_not_null(dataset, "dataset");
    check_not_null(out, "out");
    *out = new nl_readout{neurolens::train_readout(dataset->value)};
  });
}

void nl_readout_free(nl_readout* readout) { delete readout; }

nl_status nl_erasure_report_json(const nl_readout* readout, const nl_dataset* eval,
                                 const nl_plan* plan, uint32_t threads, double ppl_base,
                                 double ppl_post, char** out) {
  return guarded([&] {
    check_not_null(readout, "readout");
    check_not_null(eval, "eval");
    check_not_null(plan, "plan");
    check_not_null(out, "out");
    const unsigned workers = worker_count(threads);
    const auto before = neurolens::evaluate_readout(readout->value, eval->value, nullptr, workers);
    const auto after =
        neurolens::evaluate_readout(readout->value, eval->value, &plan->value, workers);
    auto report = neurolens::erasure_metrics(before, after, plan->value.target);
    report.distortion = neurolens::offtarget_distortion(eval->value, plan->value, workers);
    if (!std::isnan(ppl_base) || !std::isnan(ppl_post)) {
      report.dppl = neurolens::dppl(ppl_base, ppl_post);
    }
    *out = dup_string(neurolens::to_json(report));
  });
}

nl_status nl_dppl(double ppl_base, double ppl_post, double* out) {
  return guarded([&] {
    check_not_null(out, "out");
    *out = neurolens::dppl(ppl_base, ppl_post);
  });
}

nl_status nl_pearson(const double* xs, const double* ys, size_t n, double* r, double* p_value) {
  return guarded([&] {
    check_not_null(xs, "xs");
    check_not_null(ys, "ys");
    const auto res = neurolens::pearson({xs, n}, {ys, n});
    if (r) *r = res.r;
    if (p_value) *p_value = res.p_value;
  });
}

nl_status nl_correlate_csv(const char* csv_text, char** out) {
  return guarded([&] {
    check_not_null(csv_text, "csv_text");
    check_not_null(out, "out");
    const auto rows = neurolens::correlate_csv(csv_text);
    *out = dup_string(neurolens::to_json(rows));
  });
}

}  // extern "C"
