// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace lldx {

/// Seeded pseudorandom stream: mt19937_64 engine with hand-written
/// distributions so that sequences are identical across standard libraries.
/// Child streams are derived from (seed, name) with SplitMix64 mixing, so
/// independent consumers never perturb each other.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64";

  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  RngStream split(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);
  /// k distinct indices from [0, n), in sampling order. k is clamped to n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);
  /// Index drawn proportionally to non-negative weights.
  std::size_t weighted(std::span<const double> weights);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lldx
