// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pragmafill/rng.hpp"

namespace pragmafill {

void WeightParams::check() const {
  if (!(eps0 > 0)) throw std::invalid_argument("weight.eps0 must be > 0");
  if (!(power_p > 0 && power_p <= 1)) throw std::invalid_argument("weight.power_p must be in (0, 1]");
  if (!(eps > 0 && eps < w_max)) throw std::invalid_argument("weight.eps must satisfy 0 < eps < w_max");
}

void ResampleParams::check() const {
  if (lambda_rep < 1) throw std::invalid_argument("resample.lambda must be >= 1");
  if (!(gamma_frac > 0 && gamma_frac < 1)) throw std::invalid_argument("resample.gamma must be in (0, 1)");
}

std::vector<double> latency_to_weights(std::span<const double> perfs, std::span<const bool> valid,
                                       const WeightParams& params) {
  params.check();
  if (perfs.empty()) throw std::invalid_argument("latency_to_weights: empty input");
  if (perfs.size() != valid.size()) throw std::invalid_argument("latency_to_weights: length mismatch");

  const std::size_t n = perfs.size();
  std::vector<double> z(n, 0.0);
  std::vector<bool> usable(n, false);
  double z_min = INFINITY;
  double z_max = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    if (perfs[i] < 0 || !std::isfinite(perfs[i])) {
      throw std::invalid_argument("latency_to_weights: perf must be finite and non-negative");
    }
    usable[i] = valid[i] && perfs[i] > 0;
    if (!usable[i]) continue;
    double stabilized = std::log1p(std::max(perfs[i], params.eps0));
    z[i] = std::pow(stabilized, params.power_p);
    z_min = std::min(z_min, z[i]);
    z_max = std::max(z_max, z[i]);
  }

  std::vector<double> w(n, params.eps);
  const double span = z_max - z_min;
  for (std::size_t i = 0; i < n; ++i) {
    if (!usable[i]) continue;
    if (!(span > 0) || z[i] == z_min) {
      w[i] = params.w_max;
    } else if (z[i] == z_max) {
      w[i] = params.eps;
    } else {
      double wi = params.eps + ((z_max - z[i]) / span) * (params.w_max - params.eps);
      w[i] = std::clamp(wi, params.eps, params.w_max);
    }
  }
  return w;
}

std::vector<std::size_t> resample(std::span<const double> weights, const ResampleParams& params) {
  params.check();
  std::vector<std::size_t> high;
  std::vector<std::size_t> low;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    (weights[i] >= params.tau ? high : low).push_back(i);
  }
  std::vector<std::size_t> out;
  const auto keep = static_cast<std::size_t>(std::floor(params.gamma_frac * static_cast<double>(low.size())));
  out.reserve(static_cast<std::size_t>(params.lambda_rep) * high.size() + keep);
  for (std::int64_t r = 0; r < params.lambda_rep; ++r) out.insert(out.end(), high.begin(), high.end());

  Rng rng(params.seed);
  auto picks = rng.sample_without_replacement(low.size(), keep);
  std::sort(picks.begin(), picks.end());
  for (auto p : picks) out.push_back(low[p]);
  return out;
}

}  // namespace pragmafill
