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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurolens/activation_store.hpp"
#include "neurolens/intervention.hpp"

namespace neurolens {

/// Gaussian naive-Bayes readout over activation vectors with a uniform class
/// prior. Stands in for the language-model head when measuring erasure.
class ReadoutModel {
 public:
  ReadoutModel() = default;
  ReadoutModel(std::uint64_t n_neurons, std::uint32_t n_concepts, std::vector<double> means,
               std::vector<double> variances);

  std::uint64_t n_neurons() const { return n_neurons_; }
  std::uint32_t n_concepts() const { return n_concepts_; }
  double mean(std::uint64_t neuron, std::uint32_t concept_id) const {
    return means_[concept_id * n_neurons_ + neuron];
  }
  double variance(std::uint64_t neuron, std::uint32_t concept_id) const {
    return variances_[concept_id * n_neurons_ + neuron];
  }

  /// sum_j log N(x_j; mu_{j,c}, sigma_{j,c}^2)
  double score(std::span<const float> x, std::uint32_t concept_id) const;
  /// Softmax of the class scores.
  std::vector<double> confidences(std::span<const float> x) const;
  /// Highest score; ties go to the lower concept index.
  std::uint32_t predict(std::span<const float> x) const;

 private:
  std::uint64_t n_neurons_ = 0;
  std::uint32_t n_concepts_ = 0;
  std::vector<double> means_;      // concept-major
  std::vector<double> variances_;  // concept-major, smoothed
};

/// Variances are per-class population variances plus 1e-9 times the largest
/// per-neuron variance of the whole dataset.
ReadoutModel train_readout(const ActivationDataset& dataset);

struct ConceptResult {
  double accuracy = 0.0;
  double confidence = 0.0;  // mean probability assigned to the true concept
  std::uint64_t n = 0;
};

std::vector<ConceptResult> evaluate_readout(const ReadoutModel& model,
                                            const ActivationDataset& dataset,
                                            const InterventionPlan* plan = nullptr,
                                            unsigned threads = 1);

struct ErasureReport {
  std::uint32_t target = 0;
  double d_acc = 0.0;
  double d_acc_aux = 0.0;
  double d_conf = 0.0;
  double d_conf_aux = 0.0;
  double delta_acc = 0.0;
  double delta_conf = 0.0;
  std::optional<double> dppl;
  double distortion = 0.0;
  std::vector<ConceptResult> before;
  std::vector<ConceptResult> after;
};

/// D is the target's drop, D' the unweighted mean drop of the other concepts.
ErasureReport erasure_metrics(std::span<const ConceptResult> before,
                              std::span<const ConceptResult> after, std::uint32_t target);

/// ppl_post - ppl_base.
double dppl(double ppl_base, double ppl_post);

/// Mean over non-target samples of ||x' - x|| / max(||x||, eps).
double offtarget_distortion(const ActivationDataset& dataset, const InterventionPlan& plan,
                            unsigned threads = 1);

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, t distribution with n - 2 dof
  std::size_t n = 0;
};

PearsonResult pearson(std::span<const double> xs, std::span<const double> ys);

struct CorrelationRow {
  std::string method;
  PearsonResult result;
};

/// Reads `separability_score,delta_acc,method,run_id` rows (header required;
/// `score` is accepted for the first column) and correlates score against
/// delta_acc per method. Methods are reported in sorted order.
std::vector<CorrelationRow> correlate_csv(const std::string& csv_text);

std::string to_json(const ErasureReport& report);
std::string to_json(std::span<const CorrelationRow> rows);

}  // namespace neurolens
