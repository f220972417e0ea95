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

// Shared fixtures and reference computations for the test binaries.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "neurolens/activation_store.hpp"
#include "neurolens/synthetic.hpp"

namespace nltest {

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "nl") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> default_names(std::uint32_t k) {
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
  return names;
}

/// Builds a dataset from explicit rows; manifest fields get neutral values.
inline neurolens::ActivationDataset make_dataset(
    std::uint64_t n_neurons, std::uint32_t k, std::vector<std::uint32_t> labels,
    std::vector<float> values,
    neurolens::Representation rep = neurolens::Representation::kBase) {
  neurolens::ActivationDataset d;
  d.n_samples = labels.size();
  d.n_neurons = n_neurons;
  d.n_concepts = k;
  d.labels = std::move(labels);
  d.values = std::move(values);
  d.manifest.model = "test";
  d.manifest.layer = 0;
  d.manifest.hook_point = "resid_post";
  d.manifest.representation = rep;
  d.manifest.concept_names = default_names(k);
  return d;
}

/// Random valid dataset: every concept appears, labels shuffled. SAE datasets
/// are sparse and nonnegative.
inline neurolens::ActivationDataset random_dataset(std::mt19937_64& gen, std::uint64_t max_samples,
                                                   std::uint64_t max_neurons,
                                                   std::uint32_t max_concepts,
                                                   neurolens::Representation rep) {
  std::uniform_int_distribution<std::uint32_t> kd(1, max_concepts);
  const std::uint32_t k = kd(gen);
  std::uniform_int_distribution<std::uint64_t> sd(k, std::max<std::uint64_t>(k, max_samples));
  std::uniform_int_distribution<std::uint64_t> nd(1, max_neurons);
  const std::uint64_t n = sd(gen);
  const std::uint64_t d = nd(gen);
  std::vector<std::uint32_t> labels(n);
  for (std::uint64_t s = 0; s < n; ++s) labels[s] = static_cast<std::uint32_t>(s % k);
  std::shuffle(labels.begin(), labels.end(), gen);
  std::normal_distribution<float> normal(0.0f, 2.0f);
  std::bernoulli_distribution fire(0.3);
  std::vector<float> values(n * d);
  for (auto& v : values) {
    if (rep == neurolens::Representation::kSae) {
      v = fire(gen) ? std::abs(normal(gen)) : 0.0f;
    } else {
      v = normal(gen);
    }
  }
  auto out = make_dataset(d, k, std::move(labels), std::move(values), rep);
  out.manifest.model = "model-" + std::to_string(gen() % 1000);
  out.manifest.layer = static_cast<std::int64_t>(gen() % 40) - 1;
  return out;
}

inline double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

/// Normalized JS distance between equal-variance Gaussians N(mean_i, sd^2),
/// from composite Simpson quadrature of (1/k) sum_i KL(f_i || M) on the exact
/// densities.
inline double gaussian_js_distance(const std::vector<double>& means, double sd) {
  const auto k = means.size();
  double lo = means[0], hi = means[0];
  for (double m : means) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  lo -= 12.0 * sd;
  hi += 12.0 * sd;
  const int steps = 200000;
  const double step = (hi - lo) / steps;
  auto integrand = [&](double x) {
    std::vector<double> f(k);
    double mix = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      f[i] = normal_pdf(x, means[i], sd);
      mix += f[i];
    }
    mix /= static_cast<double>(k);
    double acc = 0.0;
    for (double fi : f) {
      if (fi > 0.0) acc += fi * std::log2(fi / mix);
    }
    return acc / static_cast<double>(k);
  };
  double sum = integrand(lo) + integrand(hi);
  for (int i = 1; i < steps; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(lo + i * step);
  const double divergence = std::max(0.0, sum * step / 3.0);
  return std::sqrt(divergence / std::log2(static_cast<double>(k)));
}

/// Trapezoid rule over [a, b] with `points` samples.
template <class F>
double trapezoid(F&& f, double a, double b, std::size_t points) {
  const double step = (b - a) / static_cast<double>(points - 1);
  double sum = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i + 1 < points; ++i) sum += f(a + step * static_cast<double>(i));
  return sum * step;
}

}  // namespace nltest
