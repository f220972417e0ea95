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

#include "neurolens/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "neurolens/error.hpp"
#include "neurolens/rng.hpp"

namespace neurolens {

namespace {

constexpr std::uint64_t kDrawsPerCell = 3;

// A field is either one number for every cell or an n_neurons x k matrix.
void read_field(const nlohmann::json& j, const char* name, SynthConfig& cfg,
                double SynthComponent::*member) {
  if (!j.contains(name)) return;
  const auto& field = j.at(name);
  if (field.is_number()) {
    const double v = field.get<double>();
    for (auto& c : cfg.components) c.*member = v;
    return;
  }
  require(field.is_array() && field.size() == cfg.n_neurons, ErrorCode::kFormat,
          std::string("synth config: \"") + name + "\" must be a number or an n_neurons x k matrix");
  for (std::uint64_t n = 0; n < cfg.n_neurons; ++n) {
    const auto& row = field.at(n);
    require(row.is_array() && row.size() == cfg.k, ErrorCode::kFormat,
            std::string("synth config: row ") + std::to_string(n) + " of \"" + name +
                "\" must hold k values");
    for (std::uint32_t c = 0; c < cfg.k; ++c) cfg.at(n, c).*member = row.at(c).get<double>();
  }
}

}  // namespace

SynthConfig SynthConfig::uniform(std::uint64_t n_samples_per_concept, std::uint64_t n_neurons,
                                 std::uint32_t k, SynthComponent component, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_samples_per_concept = n_samples_per_concept;
  cfg.n_neurons = n_neurons;
  cfg.k = k;
  cfg.components.assign(n_neurons * k, component);
  cfg.seed = seed;
  return cfg;
}

void validate(const SynthConfig& cfg) {
  require(cfg.k >= 1, ErrorCode::kInvalidArgument, "synth config: k must be at least 1");
  require(cfg.n_samples_per_concept >= 1, ErrorCode::kInvalidArgument,
          "synth config: n_samples_per_concept must be at least 1");
  require(cfg.components.size() == cfg.n_neurons * cfg.k, ErrorCode::kInvalidArgument,
          "synth config: components must cover n_neurons x k cells");
  require(cfg.concept_names.empty() || cfg.concept_names.size() == cfg.k,
          ErrorCode::kInvalidArgument, "synth config: concept_names must have k entries");
  for (const auto& c : cfg.components) {
    require(std::isfinite(c.mean), ErrorCode::kInvalidArgument, "synth config: mean must be finite");
    require(std::isfinite(c.std) && c.std >= 0.0, ErrorCode::kInvalidArgument,
            "synth config: std must be finite and >= 0");
    require(c.fire_prob >= 0.0 && c.fire_prob <= 1.0, ErrorCode::kInvalidArgument,
            "synth config: fire_prob must lie in [0, 1]");
  }
}

ActivationDataset generate(const SynthConfig& cfg) {
  validate(cfg);
  const CounterRng rng(cfg.seed);
  ActivationDataset d;
  d.n_concepts = cfg.k;
  d.n_neurons = cfg.n_neurons;
  d.n_samples = cfg.n_samples_per_concept * cfg.k;
  d.labels.resize(d.n_samples);
  d.values.resize(d.n_samples * d.n_neurons);
  d.manifest.model = cfg.model;
  d.manifest.layer = cfg.layer;
  d.manifest.hook_point = cfg.hook_point;
  d.manifest.representation = cfg.representation;
  d.manifest.concept_names = cfg.concept_names;
  if (d.manifest.concept_names.empty()) {
    for (std::uint32_t c = 0; c < cfg.k; ++c) d.manifest.concept_names.push_back("c" + std::to_string(c));
  }
  const bool sae = cfg.representation == Representation::kSae;
  for (std::uint64_t row = 0; row < d.n_samples; ++row) {
    const auto concept_id = static_cast<std::uint32_t>(row / cfg.n_samples_per_concept);
    d.labels[row] = concept_id;
    for (std::uint64_t j = 0; j < d.n_neurons; ++j) {
      const auto& comp = cfg.at(j, concept_id);
      const std::uint64_t counter = kDrawsPerCell * (row * d.n_neurons + j);
      double v = 0.0;
      if (rng.uniform(counter) < comp.fire_prob) {
        v = comp.mean + comp.std * rng.normal(counter + 1);
        if (sae) v = std::max(v, 0.0);
      }
      d.values[row * d.n_neurons + j] = static_cast<float>(v);
    }
  }
  return d;
}

std::vector<std::pair<double, ActivationDataset>> separability_sweep(
    const SynthConfig& base_config, const std::vector<double>& gaps, std::uint64_t seed) {
  require(std::is_sorted(gaps.begin(), gaps.end()), ErrorCode::kInvalidArgument,
          "sweep gaps must be sorted ascending");
  std::vector<std::pair<double, ActivationDataset>> out;
  out.reserve(gaps.size());
  for (double gap : gaps) {
    SynthConfig cfg = base_config;
    cfg.seed = seed;
    for (std::uint64_t j = 0; j < cfg.n_neurons; ++j) {
      const auto anchor = base_config.at(j, 0);
      for (std::uint32_t c = 0; c < cfg.k; ++c) {
        auto& comp = cfg.at(j, c);
        comp = anchor;
        comp.mean = anchor.mean + c * gap * anchor.std;
      }
    }
    out.emplace_back(gap, generate(cfg));
  }
  return out;
}

SynthConfig synth_config_from_json(const std::string& text) {
  SynthConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    cfg.n_samples_per_concept = j.at("n_samples_per_concept").get<std::uint64_t>();
    cfg.n_neurons = j.at("n_neurons").get<std::uint64_t>();
    cfg.k = j.at("k").get<std::uint32_t>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.representation = representation_from_string(j.value("representation", std::string("base")));
    cfg.model = j.value("model", cfg.model);
    cfg.layer = j.value("layer", cfg.layer);
    cfg.hook_point = j.value("hook_point", cfg.hook_point);
    cfg.concept_names = j.value("concept_names", std::vector<std::string>{});
    cfg.components.assign(cfg.n_neurons * cfg.k, SynthComponent{});
    read_field(j, "mean", cfg, &SynthComponent::mean);
    read_field(j, "std", cfg, &SynthComponent::std);
    read_field(j, "fire_prob", cfg, &SynthComponent::fire_prob);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("synth config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

std::string to_json(const SynthConfig& cfg) {
  using nlohmann::json;
  json mean = json::array(), std_dev = json::array(), fire = json::array();
  for (std::uint64_t n = 0; n < cfg.n_neurons; ++n) {
    json m = json::array(), s = json::array(), f = json::array();
    for (std::uint32_t c = 0; c < cfg.k; ++c) {
      m.push_back(cfg.at(n, c).mean);
      s.push_back(cfg.at(n, c).std);
      f.push_back(cfg.at(n, c).fire_prob);
    }
    mean.push_back(m);
    std_dev.push_back(s);
    fire.push_back(f);
  }
  json j = {
      {"n_samples_per_concept", cfg.n_samples_per_concept},
      {"n_neurons", cfg.n_neurons},
      {"k", cfg.k},
      {"representation", to_string(cfg.representation)},
      {"seed", cfg.seed},
      {"model", cfg.model},
      {"layer", cfg.layer},
      {"hook_point", cfg.hook_point},
      {"mean", mean},
      {"std", std_dev},
      {"fire_prob", fire},
  };
  if (!cfg.concept_names.empty()) j["concept_names"] = cfg.concept_names;
  return j.dump(2) + "\n";
}

}  // namespace neurolens
