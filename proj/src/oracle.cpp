// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/oracle.hpp"

#include <algorithm>

namespace pragmafill {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

class Estimator {
 public:
  Estimator(const KernelAst& ast, const PragmaConfig& config)
      : ast_(ast), pragmas_(resolve_pragmas(ast, config)) {}

  std::int64_t cycles() const { return items_cycles(ast_.body); }

  std::int64_t units() const {
    std::int64_t u = static_cast<std::int64_t>(ast_.statement_count());
    for (const auto& p : pragmas_) u *= p.parallel;
    return u;
  }

 private:
  // Loop after tiling: `outer_trips` wraps an inner loop of `inner_trips`
  // that carries the pipeline and parallel pragmas.
  struct Shape {
    std::int64_t outer_trips = 1;
    std::int64_t inner_effective = 1;
  };

  Shape shape(std::size_t loop) const {
    const LoopPragmas& p = pragmas_[loop];
    std::int64_t n = ast_.loops[loop].trip_count;
    Shape s;
    std::int64_t inner = n;
    if (p.tile > 1) {
      s.outer_trips = ceil_div(n, p.tile);
      inner = p.tile;
    }
    s.inner_effective = ceil_div(inner, p.parallel);
    return s;
  }

  std::int64_t items_cycles(const std::vector<BodyItem>& items) const {
    std::int64_t c = 0;
    for (const auto& item : items) {
      if (std::holds_alternative<Statement>(item)) {
        c += 1;
      } else {
        c += loop_cycles(std::get<LoopRef>(item).index);
      }
    }
    return c;
  }

  std::int64_t loop_cycles(std::size_t loop) const {
    const LoopPragmas& p = pragmas_[loop];
    Shape s = shape(loop);
    std::int64_t inner = 0;
    switch (p.pipeline) {
      case PipelineMode::Off:
        inner = s.inner_effective * items_cycles(ast_.loops[loop].body);
        break;
      case PipelineMode::Cg: {
        std::int64_t body = items_cycles(ast_.loops[loop].body);
        std::int64_t ii = ast_.has_child_loops(loop) ? body : 1;
        inner = body + (s.inner_effective - 1) * ii;
        break;
      }
      case PipelineMode::Flatten: {
        auto [trips, depth] = flattened(loop);
        trips /= s.outer_trips;
        inner = depth + (trips - 1);
        break;
      }
    }
    return s.outer_trips * inner;
  }

  // Collapsed iteration count and innermost body latency of a subtree. The
  // count multiplies effective trips down every path and sums siblings; the
  // latency is the loop's own statements plus the deepest child latency.
  // Pipeline pragmas below are ignored.
  std::pair<std::int64_t, std::int64_t> flattened(std::size_t loop) const {
    Shape s = shape(loop);
    std::int64_t child_trips = 0;
    std::int64_t own = 0;
    std::int64_t child_depth = 0;
    for (const auto& item : ast_.loops[loop].body) {
      if (std::holds_alternative<Statement>(item)) {
        ++own;
      } else {
        auto [t, d] = flattened(std::get<LoopRef>(item).index);
        child_trips += t;
        child_depth = std::max(child_depth, d);
      }
    }
    std::int64_t per_iter = child_trips > 0 ? child_trips : 1;
    return {s.outer_trips * s.inner_effective * per_iter, own + child_depth};
  }

  const KernelAst& ast_;
  std::vector<LoopPragmas> pragmas_;
};

}  // namespace

OracleReport estimate(const KernelAst& ast, const PragmaConfig& config, const ResourceBudget& budget) {
  Estimator e(ast, config);
  OracleReport r;
  r.cycles = e.cycles();
  r.units = e.units();
  r.valid = r.units <= budget.max_units;
  return r;
}

}  // namespace pragmafill
