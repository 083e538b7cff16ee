// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Latency labels -> per-example training weights, and weight-driven
// resampling of a training set.

#ifndef PRAGMAFILL_WEIGHTING_HPP_
#define PRAGMAFILL_WEIGHTING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pragmafill {

struct WeightParams {
  double eps0 = 1e-8;
  double power_p = 0.5;
  double eps = 0.01;
  double w_max = 1.0;

  void check() const;
};

struct ResampleParams {
  double tau = 0.5;
  std::int64_t lambda_rep = 3;
  double gamma_frac = 0.5;
  std::uint64_t seed = 0;

  void check() const;
};

/// Inverse min-max of (log(1 + max(l, eps0)))^p over valid points. Invalid
/// points (flag false or perf == 0) get exactly `eps` and do not enter the
/// min/max. The fastest valid point gets exactly `w_max`, the slowest
/// exactly `eps`; if all valid scores tie they all get `w_max`.
std::vector<double> latency_to_weights(std::span<const double> perfs, std::span<const bool> valid,
                                       const WeightParams& params = {});

/// High-weight indices (w >= tau) repeated lambda times in index order,
/// followed by floor(gamma * |low|) low-weight indices drawn uniformly
/// without replacement and listed in ascending order.
std::vector<std::size_t> resample(std::span<const double> weights, const ResampleParams& params);

}  // namespace pragmafill

#endif  // PRAGMAFILL_WEIGHTING_HPP_
