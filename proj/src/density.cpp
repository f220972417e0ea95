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

#include "neurolens/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "neurolens/error.hpp"
#include "parallel.hpp"

namespace neurolens {

namespace {

// exp(-x) is exactly 0.0 in double precision for x above this.
constexpr double kUnderflowExponent = 746.0;

constexpr char kDensMagic[4] = {'D', 'E', 'N', 'S'};
constexpr std::uint32_t kDensVersion = 1;

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const auto above = std::min(below + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(below);
  return sorted[below] + frac * (sorted[above] - sorted[below]);
}

}  // namespace

double gaussian_kernel(double u, double h) {
  const double z = u / h;
  return std::exp(-0.5 * z * z) / (h * std::sqrt(2.0 * std::numbers::pi));
}

double bandwidth_floor(double lo, double hi) { return 1e-6 * std::max(1.0, std::abs(hi - lo)); }

double silverman_bandwidth(std::span<const double> values, double lo, double hi) {
  const double floor = bandwidth_floor(lo, hi);
  const auto n = values.size();
  if (n < 2) return floor;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr_scaled = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.34;

  double spread = std::min(sd, iqr_scaled);
  if (!(spread > 0.0)) spread = std::max(sd, iqr_scaled);
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return std::max(h, floor);
}

HistogramDensity::HistogramDensity(double lo, double hi, double bandwidth,
                                   std::vector<std::uint64_t> counts)
    : lo_(lo), hi_(hi), bandwidth_(bandwidth), counts_(std::move(counts)) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ErrorCode::kValidation,
          "density range must satisfy lo < hi");
  require(std::isfinite(bandwidth) && bandwidth > 0.0, ErrorCode::kValidation,
          "density bandwidth must be positive");
  require(counts_.size() >= 2, ErrorCode::kValidation, "density needs at least 2 bins");
  n_ = 0;
  for (std::uint32_t b = 0; b < counts_.size(); ++b) {
    n_ += counts_[b];
    if (counts_[b] != 0) occupied_.push_back(b);
  }
  require(n_ >= 1, ErrorCode::kValidation, "density must hold at least one sample");
}

double HistogramDensity::evaluate(double x) const {
  const double w = bin_width();
  const double inv_two_h2 = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  double acc = 0.0;
  for (auto b : occupied_) {
    const double u = x - (lo_ + (b + 0.5) * w);
    const double e = u * u * inv_two_h2;
    if (e > kUnderflowExponent) continue;
    acc += static_cast<double>(counts_[b]) * std::exp(-e);
  }
  return acc * peak_kernel() / static_cast<double>(n_);
}

double HistogramDensity::peak_kernel() const {
  return 1.0 / (bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
}

double evaluate_density(const HistogramDensity& density, double x) { return density.evaluate(x); }

HistogramDensity fit_histogram_density(std::span<const double> values, double lo, double hi,
                                       std::uint32_t n_bins) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "cannot fit a density to no values");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ErrorCode::kInvalidArgument,
          "density range must satisfy lo < hi");
  require(n_bins >= 2, ErrorCode::kInvalidArgument, "n_bins must be at least 2");
  std::vector<std::uint64_t> counts(n_bins, 0);
  const double scale = static_cast<double>(n_bins) / (hi - lo);
  for (double v : values) {
    require(std::isfinite(v), ErrorCode::kNonFinite, "non-finite value in density fit");
    const double t = std::floor((v - lo) * scale);
    const auto bin = static_cast<std::uint32_t>(std::clamp(t, 0.0, static_cast<double>(n_bins - 1)));
    ++counts[bin];
  }
  return HistogramDensity(lo, hi, silverman_bandwidth(values, lo, hi), std::move(counts));
}

double kde_exact(std::span<const double> values, double bandwidth, double x) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "kde_exact needs at least one value");
  require(bandwidth > 0.0, ErrorCode::kInvalidArgument, "bandwidth must be positive");
  double acc = 0.0;
  for (double v : values) acc += gaussian_kernel(x - v, bandwidth);
  return acc / static_cast<double>(values.size());
}

std::uint32_t DensityBank::present_count(std::uint64_t neuron) const {
  std::uint32_t n = 0;
  for (std::uint32_t c = 0; c < n_concepts; ++c) n += at(neuron, c).has_value() ? 1 : 0;
  return n;
}

DensityBank fit_density_bank(const ActivationDataset& dataset, std::uint32_t n_bins,
                             unsigned threads) {
  require(n_bins >= 2, ErrorCode::kInvalidArgument, "n_bins must be at least 2");
  validate(dataset);
  DensityBank bank;
  bank.n_neurons = dataset.n_neurons;
  bank.n_concepts = dataset.n_concepts;
  bank.n_bins = n_bins;
  bank.densities.resize(dataset.n_neurons * dataset.n_concepts);
  bank.stats = compute_stats_table(dataset);

  const auto parts = partition_by_concept(dataset);
  const bool active_only = dataset.is_sae();

  detail::parallel_for(dataset.n_neurons, threads, [&](std::uint64_t j) {
    std::vector<std::vector<double>> slices(dataset.n_concepts);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::uint32_t c = 0; c < dataset.n_concepts; ++c) {
      auto& slice = slices[c];
      slice.reserve(parts[c].size());
      for (auto s : parts[c]) {
        const double v = dataset.at(s, j);
        if (active_only && !(v > 0.0)) continue;
        slice.push_back(v);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (lo > hi) return;  // nothing to fit for this neuron
    if (lo == hi) {
      const double pad = 0.5 * std::max(1.0, std::abs(lo));
      lo -= pad;
      hi += pad;
    }
    for (std::uint32_t c = 0; c < dataset.n_concepts; ++c) {
      if (slices[c].empty()) continue;
      bank.densities[j * dataset.n_concepts + c] = fit_histogram_density(slices[c], lo, hi, n_bins);
    }
  });
  return bank;
}

std::vector<std::uint8_t> encode_dens(const DensityBank& bank) {
  detail::ByteWriter w;
  w.bytes(kDensMagic, 4);
  w.put(kDensVersion);
  w.put(bank.n_neurons);
  w.put(bank.n_concepts);
  w.put(bank.n_bins);
  for (const auto& d : bank.densities) {
    w.put(static_cast<std::uint8_t>(d.has_value() ? 1 : 0));
    if (!d) continue;
    require(d->n_bins() == bank.n_bins, ErrorCode::kValidation, "density bin count mismatch");
    w.put(d->lo());
    w.put(d->hi());
    w.put(d->bandwidth());
    w.put(d->n());
    for (auto c : d->counts()) w.put(c);
  }
  return std::move(w.buffer());
}

DensityBank decode_dens(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kDensMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "not a DENS file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kDensVersion) {
    fail(ErrorCode::kVersionMismatch,
         "unsupported DENS version " + std::to_string(version) + " (expected 1)");
  }
  DensityBank bank;
  bank.n_neurons = r.get<std::uint64_t>("n_neurons");
  bank.n_concepts = r.get<std::uint32_t>("n_concepts");
  bank.n_bins = r.get<std::uint32_t>("B");
  require(bank.n_bins >= 2, ErrorCode::kFormat, "DENS bin count must be at least 2");
  // Every record takes at least one byte.
  if (bank.n_concepts != 0 && bank.n_neurons > r.remaining() / bank.n_concepts) {
    fail(ErrorCode::kTruncated, "truncated payload in density records");
  }
  bank.densities.resize(bank.n_neurons * bank.n_concepts);
  for (auto& slot : bank.densities) {
    const auto present = r.get<std::uint8_t>("present flag");
    if (present == 0) continue;
    require(present == 1, ErrorCode::kFormat, "DENS present flag must be 0 or 1");
    const double lo = r.get<double>("lo");
    const double hi = r.get<double>("hi");
    const double bandwidth = r.get<double>("bandwidth");
    const auto n = r.get<std::uint64_t>("n");
    r.need(8ull * bank.n_bins, "counts");
    std::vector<std::uint64_t> counts(bank.n_bins);
    for (auto& c : counts) c = r.get<std::uint64_t>("counts");
    slot.emplace(lo, hi, bandwidth, std::move(counts));
    require(slot->n() == n, ErrorCode::kValidation, "DENS record counts do not sum to n");
  }
  if (r.remaining() != 0) {
    fail(ErrorCode::kFormat, std::to_string(r.remaining()) + " trailing bytes in DENS file");
  }
  for (std::uint64_t j = 0; j < bank.n_neurons; ++j) {
    const HistogramDensity* first = nullptr;
    for (std::uint32_t c = 0; c < bank.n_concepts; ++c) {
      const auto& d = bank.at(j, c);
      if (!d) continue;
      if (first == nullptr) {
        first = &*d;
      } else {
        require(d->lo() == first->lo() && d->hi() == first->hi(), ErrorCode::kValidation,
                "densities of neuron " + std::to_string(j) + " do not share one range");
      }
    }
  }
  return bank;
}

void write_density_bank(const DensityBank& bank, const std::filesystem::path& path) {
  detail::write_file(path, encode_dens(bank));
}

DensityBank load_density_bank(const std::filesystem::path& path) {
  return decode_dens(detail::read_file(path));
}

}  // namespace neurolens
