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

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurolens/activation_store.hpp"
#include "neurolens/density.hpp"

namespace neurolens {

enum class Method { kApp, kAura, kRange, kAdaptive, kFull };

const char* to_string(Method m) noexcept;
Method method_from_string(const std::string& s);

inline constexpr double kWindowMultiplier = 2.5;
inline constexpr double kDefaultTau = 0.1;
inline constexpr double kPosteriorUnderflow = 1e-300;
inline constexpr double kSigmaFloor = 1e-9;

/// Target-concept mean and standard deviation of one neuron.
struct Window {
  double mean = 0.0;
  double std = 0.0;

  bool contains(double x, double mult = kWindowMultiplier) const {
    return std::abs(x - mean) <= mult * std;
  }
};

struct InterventionPlan {
  Method method = Method::kFull;
  std::uint32_t target = 0;
  std::uint64_t n_neurons = 0;
  std::uint32_t n_concepts = 0;
  std::vector<std::uint64_t> neurons;  // eligible, ascending
  std::vector<Window> windows;         // parallel to neurons
  std::vector<double> aurocs;          // parallel to neurons, AURA only
  std::vector<double> alphas;          // parallel to neurons, AURA only
  std::optional<double> p;
  double tau = kDefaultTau;
  double window_mult = kWindowMultiplier;
  std::shared_ptr<const DensityBank> bank;  // APP only
};

/// Counters collected while applying a plan.
struct TransformStats {
  std::atomic<std::uint64_t> posterior_fallbacks{0};
};

struct Posterior {
  double value = 0.0;
  bool fallback = false;  // denominator underflowed; value is 1/k'
};

/// pi = f_target(x) / sum_m f_m(x) over the concepts with a density for this
/// neuron (flat prior). A target without a density gets 0.
Posterior posterior_detail(const DensityBank& bank, std::uint64_t neuron, std::uint32_t target,
                           double x);
double posterior(const DensityBank& bank, std::uint64_t neuron, std::uint32_t target, double x);

// Per-coordinate rules. Arithmetic is in double; the result is rounded to f32.
float app_value(float x, double pi, const Window& w, double mult = kWindowMultiplier);
float aura_value(float x, double alpha);
float range_value(float x, const Window& w, double mult = kWindowMultiplier);
float adaptive_value(float x, const Window& w, double mult = kWindowMultiplier);

/// AURA damping factor 2 * (1 - auroc), for auroc > 0.5.
double aura_alpha(double auroc);

/// P(target > other) with ties counted 1/2, i.e. U / (n1 * n2).
double auroc(std::span<const double> target_values, std::span<const double> other_values);

std::vector<std::uint64_t> select_salient(const ActivationDataset& dataset, std::uint32_t concept_id,
                                          double p);
/// Neurons whose firing frequency on the concept is >= tau. Every neuron for
/// base representations.
std::vector<std::uint64_t> firing_filter(const ActivationDataset& dataset, std::uint32_t concept_id,
                                         double tau);

InterventionPlan build_plan(const ActivationDataset& dataset,
                            std::shared_ptr<const DensityBank> bank, Method method,
                            std::uint32_t target, std::optional<double> p,
                            double tau = kDefaultTau);

/// Rewrites one activation vector. Coordinates outside the plan are copied
/// bit-for-bit.
std::vector<float> apply_plan(const InterventionPlan& plan, std::span<const float> x,
                              TransformStats* stats = nullptr);
void apply_plan_inplace(const InterventionPlan& plan, std::span<float> x,
                        TransformStats* stats = nullptr);

std::vector<float> app_transform(std::span<const float> x, const InterventionPlan& plan);
std::vector<float> aura_transform(std::span<const float> x, const InterventionPlan& plan);
std::vector<float> range_transform(std::span<const float> x, const InterventionPlan& plan);
std::vector<float> adaptive_transform(std::span<const float> x, const InterventionPlan& plan);
std::vector<float> full_transform(std::span<const float> x, const InterventionPlan& plan);

/// Applies the plan to every row.
ActivationDataset apply_plan(const InterventionPlan& plan, const ActivationDataset& dataset,
                             unsigned threads = 1, TransformStats* stats = nullptr);

/// `density_ref` names the DENS cache an APP plan refers to.
std::string to_json(const InterventionPlan& plan, const std::string& density_ref = "");
/// APP plans need the bank the plan was built from.
InterventionPlan plan_from_json(const std::string& text,
                                std::shared_ptr<const DensityBank> bank = nullptr);
/// The "density_cache" entry of a serialized plan, empty if none.
std::string plan_density_ref(const std::string& text);

}  // namespace neurolens
