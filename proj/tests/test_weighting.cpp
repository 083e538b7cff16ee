// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <map>

#include "pragmafill/rng.hpp"
#include "pragmafill/weighting.hpp"

using namespace pragmafill;
using Catch::Matchers::WithinAbs;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

// Independent high-precision evaluation of log -> power -> inverse min-max
// for all-valid inputs.
std::vector<double> reference_weights(const std::vector<double>& perfs, double p, double eps, double w_max) {
  std::vector<Big> z;
  for (double l : perfs) z.push_back(boost::multiprecision::pow(boost::multiprecision::log1p(Big(l)), Big(p)));
  Big lo = *std::min_element(z.begin(), z.end());
  Big hi = *std::max_element(z.begin(), z.end());
  std::vector<double> w;
  for (const auto& zi : z) w.push_back(static_cast<double>(Big(eps) + (hi - zi) / (hi - lo) * (Big(w_max) - Big(eps))));
  return w;
}

}  // namespace

TEST_CASE("endpoint weights are exact") {
  std::vector<double> perfs{100, 3.38e7};
  bool valid[] = {true, true};
  auto w = latency_to_weights(perfs, valid);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 0.01);
}

TEST_CASE("invalid and zero-perf points get eps and leave the statistics") {
  std::vector<double> perfs{0, 100, 3.38e7};
  bool valid[] = {false, true, true};
  auto w = latency_to_weights(perfs, valid);
  CHECK(w == std::vector<double>{0.01, 1.0, 0.01});

  // perf = 0 with a true flag is still invalid.
  bool flagged[] = {true, true, true};
  CHECK(latency_to_weights(perfs, flagged) == std::vector<double>{0.01, 1.0, 0.01});

  // A slow invalid point does not move the valid endpoints.
  std::vector<double> perfs2{5e9, 100, 3.38e7};
  bool valid2[] = {false, true, true};
  CHECK(latency_to_weights(perfs2, valid2) == std::vector<double>{0.01, 1.0, 0.01});
}

TEST_CASE("middle weight matches a 50-digit evaluation") {
  std::vector<double> perfs{100, 1000, 3.38e7};
  bool valid[] = {true, true, true};
  auto w = latency_to_weights(perfs, valid);
  // Frozen from an independent mpmath evaluation at 50 digits.
  CHECK_THAT(w[1], WithinAbs(0.76412906108854403704912097676458610557567759465572, 1e-12));
  auto ref = reference_weights(perfs, 0.5, 0.01, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(w[i], WithinAbs(ref[i], 1e-12));
}

TEST_CASE("random valid sets: monotone, in range, match reference") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.below(30);
    std::vector<double> perfs(n);
    for (auto& p : perfs) p = std::floor(std::exp(rng.uniform(0.0, 17.0)));
    std::unique_ptr<bool[]> valid(new bool[n]);
    std::fill(valid.get(), valid.get() + n, true);
    double pw = rng.uniform(0.05, 1.0);
    WeightParams params;
    params.power_p = pw;
    auto w = latency_to_weights(perfs, std::span<const bool>(valid.get(), n), params);
    bool all_equal = std::all_of(perfs.begin(), perfs.end(), [&](double p) { return p == perfs[0]; });
    auto ref = all_equal ? std::vector<double>(n, 1.0) : reference_weights(perfs, pw, 0.01, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(w[i] >= 0.01);
      CHECK(w[i] <= 1.0);
      CHECK_THAT(w[i], WithinAbs(ref[i], 1e-12));
      for (std::size_t j = 0; j < n; ++j) {
        if (perfs[i] <= perfs[j]) CHECK(w[i] >= w[j]);
      }
    }
  }
}

TEST_CASE("all-equal valid latencies get w_max") {
  std::vector<double> perfs{50, 50, 0};
  bool valid[] = {true, true, false};
  CHECK(latency_to_weights(perfs, valid) == std::vector<double>{1.0, 1.0, 0.01});
}

TEST_CASE("weight errors") {
  std::vector<double> none;
  CHECK_THROWS_AS(latency_to_weights(none, std::span<const bool>{}), std::invalid_argument);
  std::vector<double> one{1};
  bool v[] = {true};
  WeightParams bad;
  bad.power_p = 1.5;
  CHECK_THROWS_AS(latency_to_weights(one, v, bad), std::invalid_argument);
}

TEST_CASE("resample cardinality on the worked example") {
  std::vector<double> w{0.9, 0.8, 0.6, 0.55, 0.4, 0.3, 0.2, 0.1, 0.05, 0.02};
  ResampleParams p{0.5, 3, 0.5, 42};
  auto out = resample(w, p);
  CHECK(out.size() == 15);
  std::map<std::size_t, int> counts;
  for (auto i : out) ++counts[i];
  for (std::size_t i = 0; i < 4; ++i) CHECK(counts[i] == 3);
  for (std::size_t i = 4; i < 10; ++i) CHECK(counts[i] <= 1);
  CHECK(resample(w, p) == out);

  p.gamma_frac = 0.1;
  CHECK(resample(w, p).size() == 12);
}

TEST_CASE("all-high weights with lambda 1 copy the indices in order") {
  std::vector<double> w{0.7, 0.5, 1.0};
  auto out = resample(w, ResampleParams{0.5, 1, 0.5, 1});
  CHECK(out == std::vector<std::size_t>{0, 1, 2});
}
