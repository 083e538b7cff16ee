// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic latency/resource model standing in for an HLS toolchain run.

#ifndef PRAGMAFILL_ORACLE_HPP_
#define PRAGMAFILL_ORACLE_HPP_

#include <cstdint>

#include "pragmafill/kernel.hpp"

namespace pragmafill {

struct ResourceBudget {
  std::int64_t max_units = 512;
};

struct OracleReport {
  std::int64_t cycles = 0;
  std::int64_t units = 0;
  bool valid = false;
  bool operator==(const OracleReport&) const = default;
};

/// Cycle and unit estimate computed bottom-up over the loop tree:
///  - every statement costs one cycle;
///  - TILE t (t > 1) splits a loop into ceil(N/t) outer trips over t inner
///    trips, and PIPELINE/PARALLEL then apply to the inner loop;
///  - PARALLEL p runs ceil(trips/p) iterations;
///  - PIPELINE cg: body + (trips - 1) * II, II = 1 for innermost loops,
///    otherwise II = body;
///  - PIPELINE flatten collapses the subtree into one loop with II = 1.
/// units = statements * product of all parallel factors; valid iff
/// units <= budget. Precondition: validate_config(ast, config) is empty.
OracleReport estimate(const KernelAst& ast, const PragmaConfig& config,
                      const ResourceBudget& budget = {});

}  // namespace pragmafill

#endif  // PRAGMAFILL_ORACLE_HPP_
