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

#include "neurolens/separability.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "neurolens/error.hpp"
#include "parallel.hpp"

namespace neurolens {

namespace {

constexpr double kUnderflowExponent = 746.0;
constexpr double kNormTolerance = 1e-9;
constexpr std::uint32_t kMaxSubsetConcepts = 20;

using Bits = std::vector<std::uint64_t>;

Bits to_bits(const std::vector<std::uint64_t>& set, std::uint64_t n) {
  Bits bits((n + 63) / 64, 0);
  for (auto j : set) bits[j / 64] |= std::uint64_t{1} << (j % 64);
  return bits;
}

double iou_of_mask(const std::vector<Bits>& bits, std::uint64_t mask) {
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  const auto words = bits.front().size();
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t a = ~std::uint64_t{0};
    std::uint64_t o = 0;
    for (std::size_t c = 0; c < bits.size(); ++c) {
      if ((mask >> c) & 1) {
        a &= bits[c][w];
        o |= bits[c][w];
      }
    }
    inter += static_cast<std::uint64_t>(std::popcount(a));
    uni += static_cast<std::uint64_t>(std::popcount(o));
  }
  return uni == 0 ? 0.0 : 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

OverlapReport build_overlap(const std::vector<std::vector<std::uint64_t>>& sets,
                            std::uint64_t n_neurons, OverlapMode mode,
                            std::optional<std::uint32_t> K) {
  OverlapReport rep;
  rep.mode = mode;
  rep.K = K;
  rep.k = static_cast<std::uint32_t>(sets.size());
  for (std::uint32_t c = 0; c < rep.k; ++c) {
    if (sets[c].empty()) rep.flagged.push_back(c);
  }
  for (std::uint32_t a = 0; a < rep.k; ++a) {
    for (std::uint32_t b = a + 1; b < rep.k; ++b) {
      const std::vector<std::uint64_t> pair[] = {sets[a], sets[b]};
      rep.pairwise.push_back({a, b, iou_percent(pair)});
    }
  }
  rep.all_k_pct = iou_percent(sets);
  if (rep.k >= 2 && rep.k <= kMaxSubsetConcepts) {
    std::vector<Bits> bits;
    bits.reserve(rep.k);
    for (const auto& s : sets) bits.push_back(to_bits(s, n_neurons));
    std::vector<double> sum(rep.k + 1, 0.0);
    std::vector<std::uint64_t> count(rep.k + 1, 0);
    const std::uint64_t full = (std::uint64_t{1} << rep.k);
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      const auto size = static_cast<std::uint32_t>(std::popcount(mask));
      if (size < 2) continue;
      sum[size] += iou_of_mask(bits, mask);
      ++count[size];
    }
    for (std::uint32_t s = 2; s <= rep.k; ++s) {
      rep.by_subset_size.push_back(sum[s] / static_cast<double>(count[s]));
    }
  }
  return rep;
}

}  // namespace

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

double jsd(std::span<const Distribution> dists) {
  require(dists.size() >= 2, ErrorCode::kInvalidArgument, "jsd needs at least two distributions");
  const auto bins = dists.front().size();
  require(bins > 0, ErrorCode::kInvalidArgument, "jsd distributions must be non-empty");
  const double k = static_cast<double>(dists.size());
  Distribution mixture(bins, 0.0);
  double mean_entropy = 0.0;
  for (const auto& p : dists) {
    require(p.size() == bins, ErrorCode::kInvalidArgument,
            "jsd distributions must share one grid");
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      require(p[b] >= 0.0, ErrorCode::kInvalidArgument, "negative probability mass");
      total += p[b];
      mixture[b] += p[b] / k;
    }
    require(std::abs(total - 1.0) <= kNormTolerance, ErrorCode::kInvalidArgument,
            "jsd input does not sum to 1");
    mean_entropy += entropy_bits(p) / k;
  }
  // Rounding can push the difference a hair outside [0, log2 k].
  return std::clamp(entropy_bits(mixture) - mean_entropy, 0.0, std::log2(k));
}

std::optional<double> js_distance(std::span<const std::optional<Distribution>> per_concept) {
  std::vector<Distribution> present;
  for (const auto& d : per_concept) {
    if (d) present.push_back(*d);
  }
  if (present.empty()) return std::nullopt;
  if (present.size() == 1) return 1.0;
  const double value = std::sqrt(jsd(present) / std::log2(static_cast<double>(present.size())));
  return std::min(value, 1.0);
}

Distribution discretize_density(const HistogramDensity& density) {
  const auto bins = density.n_bins();
  const double w = density.bin_width();
  const double h = density.bandwidth();
  // Centers sit on a uniform grid, so the kernel between two centers depends
  // only on their bin offset.
  std::vector<double> kernel(bins, 0.0);
  for (std::uint32_t d = 0; d < bins; ++d) {
    const double z = static_cast<double>(d) * w / h;
    const double e = 0.5 * z * z;
    if (e > kUnderflowExponent) break;
    kernel[d] = std::exp(-e);
  }
  Distribution p(bins, 0.0);
  const auto& counts = density.counts();
  for (auto src : density.occupied()) {
    const double c = static_cast<double>(counts[src]);
    for (std::uint32_t b = 0; b < bins; ++b) {
      const auto offset = b > src ? b - src : src - b;
      p[b] += c * kernel[offset];
    }
  }
  double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) {
    for (std::uint32_t b = 0; b < bins; ++b) p[b] = static_cast<double>(counts[b]);
    total = static_cast<double>(density.n());
  }
  for (auto& v : p) v /= total;
  return p;
}

SeparabilityReport layer_separability(const DensityBank& bank, unsigned threads) {
  require(bank.n_neurons > 0 && bank.n_concepts > 0, ErrorCode::kInvalidArgument,
          "density bank is empty");
  SeparabilityReport rep;
  rep.k = bank.n_concepts;
  rep.per_neuron.resize(bank.n_neurons);
  detail::parallel_for(bank.n_neurons, threads, [&](std::uint64_t j) {
    std::vector<std::optional<Distribution>> per_concept(bank.n_concepts);
    const bool single = bank.present_count(j) == 1;
    for (std::uint32_t c = 0; c < bank.n_concepts; ++c) {
      const auto& d = bank.at(j, c);
      if (!d) continue;
      // A lone concept scores 1 regardless of its shape.
      per_concept[c] = single ? Distribution{1.0} : discretize_density(*d);
    }
    rep.per_neuron[j] = js_distance(per_concept);
  });
  double sum = 0.0;
  std::uint64_t scored = 0;
  for (std::uint64_t j = 0; j < bank.n_neurons; ++j) {
    if (rep.per_neuron[j]) {
      sum += *rep.per_neuron[j];
      ++scored;
    } else {
      rep.skipped.push_back(j);
    }
  }
  if (scored == 0) {
    fail(ErrorCode::kNumerical, "no neuron has any recorded activation; separability undefined");
  }
  rep.layer_score = sum / static_cast<double>(scored);
  rep.layer_score_all_neurons = sum / static_cast<double>(bank.n_neurons);
  return rep;
}

std::string to_json(const SeparabilityReport& rep) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : rep.per_neuron) {
    if (v) {
      per.push_back(*v);
    } else {
      per.push_back(nullptr);
    }
  }
  nlohmann::json j = {
      {"layer_score", rep.layer_score},
      {"layer_score_all_neurons", rep.layer_score_all_neurons},
      {"per_neuron", per},
      {"skipped", rep.skipped},
      {"k", rep.k},
      {"n_neurons", rep.per_neuron.size()},
      {"n_scored", rep.per_neuron.size() - rep.skipped.size()},
  };
  return j.dump();
}

double iou_percent(std::span<const std::vector<std::uint64_t>> sets) {
  if (sets.empty()) return 0.0;
  std::vector<std::uint64_t> inter(sets.front().begin(), sets.front().end());
  std::sort(inter.begin(), inter.end());
  std::vector<std::uint64_t> uni = inter;
  for (std::size_t i = 1; i < sets.size(); ++i) {
    std::vector<std::uint64_t> s(sets[i].begin(), sets[i].end());
    std::sort(s.begin(), s.end());
    std::vector<std::uint64_t> next_inter, next_uni;
    std::set_intersection(inter.begin(), inter.end(), s.begin(), s.end(),
                          std::back_inserter(next_inter));
    std::set_union(uni.begin(), uni.end(), s.begin(), s.end(), std::back_inserter(next_uni));
    inter = std::move(next_inter);
    uni = std::move(next_uni);
  }
  if (uni.empty()) return 0.0;
  return 100.0 * static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

std::vector<std::vector<std::uint64_t>> topk_salient_sets(const ActivationDataset& dataset,
                                                          std::uint32_t K) {
  require(K >= 1 && K <= dataset.n_neurons, ErrorCode::kInvalidArgument,
          "K must lie in [1, n_neurons]");
  const auto stats = compute_stats_table(dataset);
  std::vector<std::vector<std::uint64_t>> sets(dataset.n_concepts);
  std::vector<std::uint64_t> order(dataset.n_neurons);
  for (std::uint32_t c = 0; c < dataset.n_concepts; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + K, order.end(),
                      [&](std::uint64_t a, std::uint64_t b) {
                        const double ma = stats.at(a, c).mean;
                        const double mb = stats.at(b, c).mean;
                        return ma != mb ? ma > mb : a < b;
                      });
    sets[c].assign(order.begin(), order.begin() + K);
    std::sort(sets[c].begin(), sets[c].end());
  }
  return sets;
}

std::vector<std::vector<std::uint64_t>> active_sets(const ActivationDataset& dataset) {
  std::vector<std::vector<bool>> active(dataset.n_concepts,
                                        std::vector<bool>(dataset.n_neurons, false));
  for (std::uint64_t s = 0; s < dataset.n_samples; ++s) {
    auto row = dataset.row(s);
    auto& flags = active[dataset.labels[s]];
    for (std::uint64_t j = 0; j < dataset.n_neurons; ++j) {
      if (row[j] > 0.0f) flags[j] = true;
    }
  }
  std::vector<std::vector<std::uint64_t>> sets(dataset.n_concepts);
  for (std::uint32_t c = 0; c < dataset.n_concepts; ++c) {
    for (std::uint64_t j = 0; j < dataset.n_neurons; ++j) {
      if (active[c][j]) sets[c].push_back(j);
    }
  }
  return sets;
}

OverlapReport topk_salient_overlap(const ActivationDataset& dataset, std::uint32_t K) {
  return build_overlap(topk_salient_sets(dataset, K), dataset.n_neurons, OverlapMode::kTopKSalient,
                       K);
}

OverlapReport active_neuron_overlap(const ActivationDataset& dataset) {
  return build_overlap(active_sets(dataset), dataset.n_neurons, OverlapMode::kAllActive,
                       std::nullopt);
}

std::string to_json(const OverlapReport& rep) {
  nlohmann::json pairwise = nlohmann::json::array();
  for (const auto& p : rep.pairwise) pairwise.push_back({p.a, p.b, p.pct});
  nlohmann::json by_size = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.by_subset_size.size(); ++i) {
    by_size.push_back({i + 2, rep.by_subset_size[i]});
  }
  nlohmann::json j = {
      {"mode", rep.mode == OverlapMode::kTopKSalient ? "top_k_salient" : "all_active"},
      {"K", rep.K ? nlohmann::json(*rep.K) : nlohmann::json(nullptr)},
      {"k", rep.k},
      {"pairwise", pairwise},
      {"all_k_pct", rep.all_k_pct},
      {"by_subset_size", by_size},
      {"flagged", rep.flagged},
  };
  return j.dump();
}

}  // namespace neurolens
