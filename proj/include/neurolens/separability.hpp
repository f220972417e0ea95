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
#include "neurolens/density.hpp"

namespace neurolens {

/// A probability mass function over the B bins of a neuron's shared grid.
using Distribution = std::vector<double>;

/// Base-2 Shannon entropy with 0 log 0 = 0.
double entropy_bits(std::span<const double> p);

/// Generalized Jensen-Shannon divergence H(M) - mean_i H(p_i) in bits, with M
/// the uniform mixture. Requires k >= 2 distributions of equal length, each
/// summing to 1 within 1e-9.
double jsd(std::span<const Distribution> distributions);

/// Normalized distance sqrt(JSD) / sqrt(log2 k') over the k' concepts that
/// have a distribution. Exactly 1 when only one concept does; nullopt when
/// none does.
std::optional<double> js_distance(std::span<const std::optional<Distribution>> per_concept);

/// Probability mass at each bin center, proportional to the density there.
Distribution discretize_density(const HistogramDensity& density);

struct SeparabilityReport {
  std::vector<std::optional<double>> per_neuron;  // nullopt for skipped neurons
  double layer_score = 0.0;            // mean over scored neurons
  double layer_score_all_neurons = 0.0;  // skipped neurons counted as 0 over all d
  std::vector<std::uint64_t> skipped;
  std::uint32_t k = 0;
};

SeparabilityReport layer_separability(const DensityBank& bank, unsigned threads = 1);

std::string to_json(const SeparabilityReport& report);

enum class OverlapMode { kTopKSalient, kAllActive };

struct OverlapReport {
  OverlapMode mode = OverlapMode::kTopKSalient;
  std::optional<std::uint32_t> K;
  std::uint32_t k = 0;
  struct Pair {
    std::uint32_t a;
    std::uint32_t b;
    double pct;
  };
  std::vector<Pair> pairwise;
  double all_k_pct = 0.0;
  /// Entry s-2 holds the mean IoU over all concept subsets of size s. Empty
  /// when k is too large to enumerate subsets.
  std::vector<double> by_subset_size;
  /// Concepts with an empty neuron set; any subset containing one scores 0.
  std::vector<std::uint32_t> flagged;
};

inline constexpr std::uint32_t kDefaultTopK = 80;

/// Intersection-over-union, in percent, of the given neuron sets. An empty
/// union scores 0.
double iou_percent(std::span<const std::vector<std::uint64_t>> sets);

/// Per concept, the K neurons with the highest mean activation on that
/// concept's samples (ties to the lower index), ascending.
std::vector<std::vector<std::uint64_t>> topk_salient_sets(const ActivationDataset& dataset,
                                                          std::uint32_t K);
/// Per concept, the neurons with any activation > 0 on that concept.
std::vector<std::vector<std::uint64_t>> active_sets(const ActivationDataset& dataset);

OverlapReport topk_salient_overlap(const ActivationDataset& dataset,
                                   std::uint32_t K = kDefaultTopK);
OverlapReport active_neuron_overlap(const ActivationDataset& dataset);

std::string to_json(const OverlapReport& report);

}  // namespace neurolens
