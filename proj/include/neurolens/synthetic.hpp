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
#include <string>
#include <utility>
#include <vector>

#include "neurolens/activation_store.hpp"

namespace neurolens {

/// One (neuron, concept) cell of a synthetic dataset: the activation is 0 with
/// probability 1 - fire_prob, otherwise mean + std * z.
struct SynthComponent {
  double mean = 0.0;
  double std = 1.0;
  double fire_prob = 1.0;
};

struct SynthConfig {
  std::uint64_t n_samples_per_concept = 0;
  std::uint64_t n_neurons = 0;
  std::uint32_t k = 0;
  std::vector<SynthComponent> components;  // neuron-major, n_neurons * k
  Representation representation = Representation::kBase;
  std::uint64_t seed = 0;
  std::string model = "synthetic";
  std::int64_t layer = 0;
  std::string hook_point = "synthetic";
  std::vector<std::string> concept_names;  // defaults to c0..c{k-1}

  SynthComponent& at(std::uint64_t neuron, std::uint32_t concept_id) {
    return components[neuron * k + concept_id];
  }
  const SynthComponent& at(std::uint64_t neuron, std::uint32_t concept_id) const {
    return components[neuron * k + concept_id];
  }

  /// Uniform component for every cell.
  static SynthConfig uniform(std::uint64_t n_samples_per_concept, std::uint64_t n_neurons,
                             std::uint32_t k, SynthComponent component, std::uint64_t seed);
};

void validate(const SynthConfig& config);

/// Rows come in concept-major blocks (all of concept 0, then 1, ...). Every
/// cell consumes three draws at counter 3 * (row * n_neurons + neuron): the
/// firing draw, then the two Box-Muller uniforms. SAE outputs clamp negatives
/// to 0.
ActivationDataset generate(const SynthConfig& config);

/// For each gap g, a copy of the config whose concept i has, on every neuron j,
/// mean = mean(j, 0) + i * g * std(j, 0) and the std / fire_prob of (j, 0).
std::vector<std::pair<double, ActivationDataset>> separability_sweep(
    const SynthConfig& base_config, const std::vector<double>& gaps, std::uint64_t seed);

SynthConfig synth_config_from_json(const std::string& text);
std::string to_json(const SynthConfig& config);

}  // namespace neurolens
