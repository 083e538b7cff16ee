// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of analytic parameter gradients.

#ifndef PRAGMAFILL_GRADCHECK_HPP_
#define PRAGMAFILL_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <string>

#include "pragmafill/math.hpp"

namespace pragmafill {

struct GradcheckReport {
  double max_rel_error = 0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// `loss(accumulate)` returns the scalar loss and, when `accumulate` is set,
/// adds its gradient into `params`. Relative error per entry is
/// |a - n| / max(|a|, |n|, floor).
template <typename LossFn>
GradcheckReport gradcheck(ParameterList<double>& params, LossFn&& loss, double step = 1e-5, double floor = 1e-4) {
  params.zero_grad();
  loss(true);
  std::vector<Mat<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad);

  GradcheckReport r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k].value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double orig = v.data()[i];
      v.data()[i] = orig + step;
      double lp = loss(false);
      v.data()[i] = orig - step;
      double lm = loss(false);
      v.data()[i] = orig;
      double num = (lp - lm) / (2 * step);
      double a = analytic[k].data()[i];
      double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_parameter = params[k].name + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
  }
  params.zero_grad();
  return r;
}

}  // namespace pragmafill

#endif  // PRAGMAFILL_GRADCHECK_HPP_
