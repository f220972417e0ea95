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

#include <cmath>
#include <cstdint>
#include <numbers>

namespace neurolens {

/// Counter-based SplitMix64: draw number `counter` of stream `seed` is
/// mix(seed + (counter + 1) * 0x9E3779B97F4A7C15), where mix is
///
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
///
/// Any draw can be computed directly from (seed, counter), so streams are
/// reproducible independent of evaluation order and platform.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kMul1 = 0xBF58476D1CE4E5B9ull;
  static constexpr std::uint64_t kMul2 = 0x94D049BB133111EBull;

  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t z = seed_ + (counter + 1) * kGamma;
    z = (z ^ (z >> 30)) * kMul1;
    z = (z ^ (z >> 27)) * kMul2;
    return z ^ (z >> 31);
  }

  /// Top 53 bits scaled to [0, 1).
  constexpr double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Top 53 bits scaled to (0, 1].
  constexpr double uniform_open0(std::uint64_t counter) const {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  /// Box-Muller, cosine branch only: consumes draws `counter` (u1, in (0, 1])
  /// and `counter + 1` (u2, in [0, 1)); returns sqrt(-2 ln u1) cos(2 pi u2).
  double normal(std::uint64_t counter) const {
    const double u1 = uniform_open0(counter);
    const double u2 = uniform(counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace neurolens
