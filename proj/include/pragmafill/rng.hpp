// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness with platform-independent draws. The standard engine is
// portable; the standard distributions are not, so the few draws we need are
// written out here.

#ifndef PRAGMAFILL_RNG_HPP_
#define PRAGMAFILL_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

namespace pragmafill {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection-sampled so it has no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct values from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k);

 private:
  std::mt19937_64 engine_;
};

inline std::vector<std::uint64_t> Rng::sample_without_replacement(std::uint64_t n, std::uint64_t k) {
  std::vector<std::uint64_t> out;
  if (k > n) k = n;
  out.reserve(k);
  if (n <= 4 * k + 64) {
    std::vector<std::uint64_t> pool(n);
    for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
    for (std::uint64_t i = 0; i < k; ++i) {
      std::uint64_t j = i + below(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }
  // Sparse draw for large n: rejection against the values already taken.
  std::vector<std::uint64_t> taken;
  while (out.size() < k) {
    std::uint64_t x = below(n);
    bool dup = false;
    for (auto t : taken) dup |= t == x;
    if (!dup) {
      taken.push_back(x);
      out.push_back(x);
    }
  }
  return out;
}

}  // namespace pragmafill

#endif  // PRAGMAFILL_RNG_HPP_
