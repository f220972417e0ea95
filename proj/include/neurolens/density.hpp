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
#include <optional>
#include <span>
#include <vector>

#include "neurolens/activation_store.hpp"

namespace neurolens {

inline constexpr std::uint32_t kDefaultBins = 2048;

/// Gaussian KDE approximated on B uniform bins: the N fitted samples are
/// tallied into bins and each bin contributes one kernel at its center,
/// weighted by its count.
class HistogramDensity {
 public:
  HistogramDensity() = default;

  /// Rebuilds a density from stored parts (cache load). Validates them.
  HistogramDensity(double lo, double hi, double bandwidth, std::vector<std::uint64_t> counts);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::uint32_t n_bins() const { return static_cast<std::uint32_t>(counts_.size()); }
  double bandwidth() const { return bandwidth_; }
  std::uint64_t n() const { return n_; }
  double normalizer() const { return 1.0 / static_cast<double>(n_); }
  double bin_width() const { return (hi_ - lo_) / static_cast<double>(counts_.size()); }
  double center(std::uint32_t bin) const { return lo_ + (bin + 0.5) * bin_width(); }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  /// Indices of bins with a nonzero count, ascending.
  const std::vector<std::uint32_t>& occupied() const { return occupied_; }

  /// (1/N) * sum_b counts_b * K_h(x - center_b)
  double evaluate(double x) const;
  double peak_kernel() const;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  double bandwidth_ = 1.0;
  std::uint64_t n_ = 0;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint32_t> occupied_;
};

/// Gaussian kernel K_h(u) = exp(-u^2 / (2 h^2)) / (h sqrt(2 pi)).
double gaussian_kernel(double u, double h);

/// Silverman's rule 0.9 * min(sd, IQR/1.34) * N^(-1/5). When that spread is
/// zero the nonzero one of sd / IQR is used; the result is floored at
/// 1e-6 * max(1, hi - lo).
double silverman_bandwidth(std::span<const double> values, double lo, double hi);
double bandwidth_floor(double lo, double hi);

HistogramDensity fit_histogram_density(std::span<const double> values, double lo, double hi,
                                       std::uint32_t n_bins);

/// Exact per-sample Gaussian KDE. Reference only; pipelines use the binned form.
double kde_exact(std::span<const double> values, double bandwidth, double x);

double evaluate_density(const HistogramDensity& density, double x);

/// Per-(neuron, concept) densities sharing one [lo, hi] per neuron.
///
/// Base representations fit every sample of the concept. SAE representations
/// fit only active (> 0) activations, so a concept on which the neuron never
/// fires has no density.
struct DensityBank {
  std::uint64_t n_neurons = 0;
  std::uint32_t n_concepts = 0;
  std::uint32_t n_bins = 0;
  std::vector<std::optional<HistogramDensity>> densities;  // neuron-major
  StatsTable stats;  // empty when the bank came from a cache file

  const std::optional<HistogramDensity>& at(std::uint64_t neuron, std::uint32_t concept_id) const {
    return densities[neuron * n_concepts + concept_id];
  }
  std::uint32_t present_count(std::uint64_t neuron) const;
};

DensityBank fit_density_bank(const ActivationDataset& dataset, std::uint32_t n_bins = kDefaultBins,
                             unsigned threads = 1);

std::vector<std::uint8_t> encode_dens(const DensityBank& bank);
DensityBank decode_dens(std::span<const std::uint8_t> bytes);
void write_density_bank(const DensityBank& bank, const std::filesystem::path& path);
DensityBank load_density_bank(const std::filesystem::path& path);

}  // namespace neurolens
