// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical program graph lowered straight from the kernel AST.
//
// Lowering, in order:
//  - an entry node with a Call edge into the first item of the function;
//  - per loop a header phi -> cmp -> branch; the branch enters the body, the
//    end of the body jumps back to the phi, and the branch exits to the next
//    item. TILE t > 1 emits an outer header (trip ceil(N/t)) around an inner
//    header (trip t);
//  - per statement: loads (the LHS first for compound assignments), one
//    arithmetic node per operator, then the store, chained by Control edges
//    and fed by Data edges. Each access gets a Data edge from the phi of
//    every loop variable in its indices;
//  - per applied pragma one node with a PragmaAttach edge to its loop's
//    branch (TILE to the outer branch, PIPELINE/PARALLEL to the inner one).
//    PIPELINE off adds nothing;
//  - a pseudo node per loop with Hierarchy edges to the loop's header,
//    pragma and direct statement nodes, and a function pseudo node linked to
//    all loop pseudo nodes, the entry node and top-level statements.
//
// Node order: entry, instructions in lowering order, loop pseudo nodes in
// loop order, the function pseudo node, then pragma nodes. Edges are sorted.

#ifndef PRAGMAFILL_GRAPH_HPP_
#define PRAGMAFILL_GRAPH_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pragmafill/kernel.hpp"

namespace pragmafill {

enum class NodeKind {
  Load,
  Store,
  Add,
  Mul,
  Cmp,
  Phi,
  Branch,
  Entry,
  PragmaPipeline,
  PragmaParallel,
  PragmaTile,
  Pseudo,
};
inline constexpr int kNodeKindCount = 12;
std::string_view to_string(NodeKind k);

enum class EdgeKind { Control, Data, Call, PragmaAttach, Hierarchy };
inline constexpr int kEdgeKindCount = 5;
std::string_view to_string(EdgeKind k);

/// Feature columns.
namespace feature {
inline constexpr int kPipelineCg = kNodeKindCount;
inline constexpr int kPipelineFlatten = kNodeKindCount + 1;
inline constexpr int kFactor = kNodeKindCount + 2;  // log2(factor) / log2(1024)
inline constexpr int kDepth = kNodeKindCount + 3;   // nesting depth / 4
inline constexpr int kTrip = kNodeKindCount + 4;    // cmp nodes: log2(trips) / log2(1024)
inline constexpr int kDim = kNodeKindCount + 5;
}  // namespace feature

struct Edge {
  int src = 0;
  int dst = 0;
  EdgeKind kind = EdgeKind::Control;
  auto operator<=>(const Edge&) const = default;
};

struct ProgramGraph {
  std::vector<NodeKind> kinds;
  Eigen::MatrixXd features;  // one row per node, feature::kDim columns
  std::vector<Edge> edges;

  int num_nodes() const { return static_cast<int>(kinds.size()); }
  bool operator==(const ProgramGraph& o) const;
};

/// Precondition: validate_config(ast, config) is empty.
ProgramGraph build_graph(const KernelAst& ast, const PragmaConfig& config);

/// Text dump: `nodes N`, then `id kind f0 f1 ...` per node, `edges M`, then
/// `src dst kind` per edge.
void write_graph(std::ostream& out, const ProgramGraph& g);
std::string graph_to_string(const ProgramGraph& g);

/// Node i of `g` becomes node perm[i] of the result.
ProgramGraph permute_nodes(const ProgramGraph& g, const std::vector<int>& perm);

}  // namespace pragmafill

#endif  // PRAGMAFILL_GRAPH_HPP_
