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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace neurolens {

enum class Representation { kBase, kSae };

const char* to_string(Representation r) noexcept;
Representation representation_from_string(const std::string& s);

/// Where the activations came from. Written next to the ACTV file as
/// `<path>.manifest.json`.
struct Manifest {
  std::string model;
  std::int64_t layer = 0;
  std::string hook_point;
  Representation representation = Representation::kBase;
  std::vector<std::string> concept_names;

  bool operator==(const Manifest&) const = default;
};

/// Samples x neurons activation matrix for one layer, with a concept label
/// per sample. Values are row-major.
struct ActivationDataset {
  std::uint64_t n_samples = 0;
  std::uint64_t n_neurons = 0;
  std::uint32_t n_concepts = 0;
  std::vector<std::uint32_t> labels;
  std::vector<float> values;
  Manifest manifest;

  std::span<const float> row(std::uint64_t sample) const {
    return {values.data() + sample * n_neurons, n_neurons};
  }
  float at(std::uint64_t sample, std::uint64_t neuron) const {
    return values[sample * n_neurons + neuron];
  }
  bool is_sae() const { return manifest.representation == Representation::kSae; }

  /// Bitwise equality of the payload plus manifest equality.
  friend bool operator==(const ActivationDataset& a, const ActivationDataset& b);
};

/// Throws Error{kValidation | kLabelOutOfRange | kNonFinite} naming the first
/// violated invariant.
void validate(const ActivationDataset& dataset);

/// Size in bytes of the ACTV body for the given geometry.
std::uint64_t actv_size_bytes(std::uint64_t n_samples, std::uint64_t n_neurons);

void write_dataset(const ActivationDataset& dataset, const std::filesystem::path& path);
ActivationDataset load_dataset(const std::filesystem::path& path);

/// ACTV body only (no sidecar). Exposed so tests and tools can work on
/// in-memory buffers.
std::vector<std::uint8_t> encode_actv(const ActivationDataset& dataset);
ActivationDataset decode_actv(std::span<const std::uint8_t> bytes);

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);

struct NeuronConceptStats {
  double mean = 0.0;
  double std = 0.0;  // population (1/n)
  double firing_freq = 0.0;
  std::uint64_t sample_count = 0;
  double mean_abs = 0.0;
};

NeuronConceptStats concept_stats(const ActivationDataset& dataset, std::uint64_t neuron,
                                 std::uint32_t concept_id);

/// Sample indices per concept, in dataset order.
std::vector<std::vector<std::uint64_t>> partition_by_concept(const ActivationDataset& dataset);

/// Stats for every (neuron, concept), neuron-major.
class StatsTable {
 public:
  StatsTable() = default;
  StatsTable(std::uint64_t n_neurons, std::uint32_t n_concepts)
      : n_neurons_(n_neurons), n_concepts_(n_concepts), cells_(n_neurons * n_concepts) {}

  const NeuronConceptStats& at(std::uint64_t neuron, std::uint32_t concept_id) const {
    return cells_[neuron * n_concepts_ + concept_id];
  }
  NeuronConceptStats& at(std::uint64_t neuron, std::uint32_t concept_id) {
    return cells_[neuron * n_concepts_ + concept_id];
  }
  std::uint64_t n_neurons() const { return n_neurons_; }
  std::uint32_t n_concepts() const { return n_concepts_; }
  bool empty() const { return cells_.empty(); }

 private:
  std::uint64_t n_neurons_ = 0;
  std::uint32_t n_concepts_ = 0;
  std::vector<NeuronConceptStats> cells_;
};

/// Two-pass computation of concept_stats for the whole matrix.
StatsTable compute_stats_table(const ActivationDataset& dataset);

}  // namespace neurolens
