// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness with platform-independent output. The engine is
// std::mt19937_64 (its sequence is fixed by the standard); the
// distributions are implemented here because the standard library ones
// are implementation-defined.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dsresnet {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `text`.
std::uint64_t hash64(std::string_view text) noexcept;

/// Seed for a named sub-stream ("init", "batch", "augment", ...) so that
/// components draw from independent sequences under one global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dsresnet
