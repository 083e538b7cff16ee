// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/graph.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace pragmafill {

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Load: return "load";
    case NodeKind::Store: return "store";
    case NodeKind::Add: return "add";
    case NodeKind::Mul: return "mul";
    case NodeKind::Cmp: return "cmp";
    case NodeKind::Phi: return "phi";
    case NodeKind::Branch: return "branch";
    case NodeKind::Entry: return "entry";
    case NodeKind::PragmaPipeline: return "pragma_pipeline";
    case NodeKind::PragmaParallel: return "pragma_parallel";
    case NodeKind::PragmaTile: return "pragma_tile";
    case NodeKind::Pseudo: return "pseudo";
  }
  return "?";
}

std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Control: return "control";
    case EdgeKind::Data: return "data";
    case EdgeKind::Call: return "call";
    case EdgeKind::PragmaAttach: return "pragma_attach";
    case EdgeKind::Hierarchy: return "hierarchy";
  }
  return "?";
}

bool ProgramGraph::operator==(const ProgramGraph& o) const {
  return kinds == o.kinds && features.rows() == o.features.rows() && features.cols() == o.features.cols() &&
         features == o.features && edges == o.edges;
}

namespace {

constexpr double kLog2Norm = 10.0;  // log2(1024)
constexpr double kDepthNorm = 4.0;

double log2_norm(std::int64_t v) { return std::log2(static_cast<double>(v)) / kLog2Norm; }

class Builder {
 public:
  Builder(const KernelAst& ast, const PragmaConfig& config)
      : ast_(ast), pragmas_(resolve_pragmas(ast, config)), loop_members_(ast.loops.size()) {}

  ProgramGraph build() {
    int entry = add_node(NodeKind::Entry, 0);
    function_members_.push_back(entry);
    auto [first, last] = lower_items(ast_.body, 0, function_members_);
    (void)last;
    edge(entry, first, EdgeKind::Call);

    std::vector<int> loop_pseudo;
    for (std::size_t i = 0; i < ast_.loops.size(); ++i) {
      loop_pseudo.push_back(add_node(NodeKind::Pseudo, ast_.loops[i].depth));
    }
    int fn_pseudo = add_node(NodeKind::Pseudo, 0);
    for (int p : loop_pseudo) edge(fn_pseudo, p, EdgeKind::Hierarchy);
    for (int m : function_members_) edge(fn_pseudo, m, EdgeKind::Hierarchy);

    for (std::size_t i = 0; i < ast_.loops.size(); ++i) {
      add_pragma_nodes(i);
      for (int m : loop_members_[i]) edge(loop_pseudo[i], m, EdgeKind::Hierarchy);
    }

    ProgramGraph g;
    g.kinds = kinds_;
    g.features.resize(static_cast<Eigen::Index>(rows_.size()), feature::kDim);
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      for (int c = 0; c < feature::kDim; ++c) g.features(static_cast<Eigen::Index>(r), c) = rows_[r][c];
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    g.edges = std::move(edges_);
    return g;
  }

 private:
  using Span = std::pair<int, int>;  // first and last node of a lowered region

  int add_node(NodeKind k, int depth) {
    std::array<double, feature::kDim> row{};
    row[static_cast<int>(k)] = 1.0;
    row[feature::kDepth] = depth / kDepthNorm;
    rows_.push_back(row);
    kinds_.push_back(k);
    return static_cast<int>(kinds_.size()) - 1;
  }

  void edge(int src, int dst, EdgeKind k) { edges_.push_back({src, dst, k}); }

  Span lower_items(const std::vector<BodyItem>& items, int depth, std::vector<int>& members) {
    Span out{-1, -1};
    for (const auto& item : items) {
      Span s = std::holds_alternative<Statement>(item) ? lower_statement(std::get<Statement>(item), depth, members)
                                                        : lower_loop(std::get<LoopRef>(item).index);
      if (out.first < 0) {
        out.first = s.first;
      } else {
        edge(out.second, s.first, EdgeKind::Control);
      }
      out.second = s.second;
    }
    return out;
  }

  struct Header {
    int phi, cmp, branch;
  };

  Header header(int depth, std::int64_t trips, std::vector<int>& members) {
    Header h{add_node(NodeKind::Phi, depth), add_node(NodeKind::Cmp, depth), add_node(NodeKind::Branch, depth)};
    rows_[static_cast<std::size_t>(h.cmp)][feature::kTrip] = log2_norm(trips);
    edge(h.phi, h.cmp, EdgeKind::Control);
    edge(h.phi, h.cmp, EdgeKind::Data);
    edge(h.cmp, h.branch, EdgeKind::Control);
    edge(h.cmp, h.branch, EdgeKind::Data);
    members.insert(members.end(), {h.phi, h.cmp, h.branch});
    return h;
  }

  Span lower_loop(std::size_t index) {
    const Loop& loop = ast_.loops[index];
    const LoopPragmas& p = pragmas_[index];
    std::vector<int>& members = loop_members_[index];
    bool tiled = p.tile > 1;

    std::vector<int> phis;
    std::optional<Header> outer;
    if (tiled) {
      outer = header(loop.depth, (loop.trip_count + p.tile - 1) / p.tile, members);
      phis.push_back(outer->phi);
    }
    Header inner = header(loop.depth, tiled ? p.tile : loop.trip_count, members);
    phis.push_back(inner.phi);
    if (outer) edge(outer->branch, inner.phi, EdgeKind::Control);

    auto saved = var_phis_.find(loop.var) != var_phis_.end() ? std::optional(var_phis_[loop.var]) : std::nullopt;
    var_phis_[loop.var] = phis;
    Span body = lower_items(loop.body, loop.depth, members);
    if (saved) {
      var_phis_[loop.var] = *saved;
    } else {
      var_phis_.erase(loop.var);
    }

    edge(inner.branch, body.first, EdgeKind::Control);
    edge(body.second, inner.phi, EdgeKind::Control);
    attach_inner_[index] = inner.branch;
    attach_outer_[index] = outer ? outer->branch : inner.branch;
    if (outer) {
      edge(inner.branch, outer->phi, EdgeKind::Control);
      return {outer->phi, outer->branch};
    }
    return {inner.phi, inner.branch};
  }

  int access_node(const ArrayAccess& a, NodeKind k, int depth) {
    int id = add_node(k, depth);
    std::set<std::string> vars;
    for (const auto& idx : a.indices) {
      for (const auto& t : idx.terms) vars.insert(t.var);
    }
    for (const auto& v : vars) {
      auto it = var_phis_.find(v);
      if (it == var_phis_.end()) continue;
      for (int phi : it->second) edge(phi, id, EdgeKind::Data);
    }
    return id;
  }

  std::optional<int> lower_expr(const Expr& e, int depth) {
    switch (e.kind) {
      case Expr::Kind::Number:
      case Expr::Kind::Scalar:
        return std::nullopt;
      case Expr::Kind::Access:
        return access_node(e.access, NodeKind::Load, depth);
      case Expr::Kind::Neg: {
        auto v = lower_expr(e.operands[0], depth);
        int id = add_node(NodeKind::Mul, depth);
        if (v) edge(*v, id, EdgeKind::Data);
        return id;
      }
      case Expr::Kind::Binary: {
        auto a = lower_expr(e.operands[0], depth);
        auto b = lower_expr(e.operands[1], depth);
        int id = add_node(e.op == '+' || e.op == '-' ? NodeKind::Add : NodeKind::Mul, depth);
        if (a) edge(*a, id, EdgeKind::Data);
        if (b) edge(*b, id, EdgeKind::Data);
        return id;
      }
    }
    return std::nullopt;
  }

  Span lower_statement(const Statement& s, int depth, std::vector<int>& members) {
    int first = static_cast<int>(kinds_.size());
    std::optional<int> lhs_load;
    if (s.op != AssignOp::Assign) lhs_load = access_node(s.lhs, NodeKind::Load, depth);
    std::optional<int> value = lower_expr(s.rhs, depth);
    if (lhs_load) {
      int op = add_node(s.op == AssignOp::MulAssign ? NodeKind::Mul : NodeKind::Add, depth);
      edge(*lhs_load, op, EdgeKind::Data);
      if (value) edge(*value, op, EdgeKind::Data);
      value = op;
    }
    int store = access_node(s.lhs, NodeKind::Store, depth);
    if (value) edge(*value, store, EdgeKind::Data);
    for (int n = first; n <= store; ++n) {
      members.push_back(n);
      if (n > first) edge(n - 1, n, EdgeKind::Control);
    }
    return {first, store};
  }

  void add_pragma_nodes(std::size_t index) {
    const Loop& loop = ast_.loops[index];
    const LoopPragmas& p = pragmas_[index];
    for (const auto& lp : loop.pragmas) {
      int id = -1;
      switch (lp.kind) {
        case PragmaKind::Pipeline:
          if (!p.has_pipeline) continue;
          id = add_node(NodeKind::PragmaPipeline, loop.depth);
          rows_[static_cast<std::size_t>(id)][p.pipeline == PipelineMode::Cg ? feature::kPipelineCg
                                                                             : feature::kPipelineFlatten] = 1.0;
          edge(id, attach_inner_.at(index), EdgeKind::PragmaAttach);
          break;
        case PragmaKind::Parallel:
          id = add_node(NodeKind::PragmaParallel, loop.depth);
          rows_[static_cast<std::size_t>(id)][feature::kFactor] = log2_norm(p.parallel);
          edge(id, attach_inner_.at(index), EdgeKind::PragmaAttach);
          break;
        case PragmaKind::Tile:
          id = add_node(NodeKind::PragmaTile, loop.depth);
          rows_[static_cast<std::size_t>(id)][feature::kFactor] = log2_norm(p.tile);
          edge(id, attach_outer_.at(index), EdgeKind::PragmaAttach);
          break;
      }
      loop_members_[index].push_back(id);
    }
  }

  const KernelAst& ast_;
  std::vector<LoopPragmas> pragmas_;
  std::vector<NodeKind> kinds_;
  std::vector<std::array<double, feature::kDim>> rows_;
  std::vector<Edge> edges_;
  std::map<std::string, std::vector<int>> var_phis_;
  std::vector<std::vector<int>> loop_members_;
  std::vector<int> function_members_;
  std::map<std::size_t, int> attach_inner_;
  std::map<std::size_t, int> attach_outer_;
};

}  // namespace

ProgramGraph build_graph(const KernelAst& ast, const PragmaConfig& config) { return Builder(ast, config).build(); }

void write_graph(std::ostream& out, const ProgramGraph& g) {
  out << "nodes " << g.num_nodes() << '\n';
  char buf[32];
  for (int i = 0; i < g.num_nodes(); ++i) {
    out << i << ' ' << to_string(g.kinds[static_cast<std::size_t>(i)]);
    for (int c = 0; c < g.features.cols(); ++c) {
      auto r = std::to_chars(buf, buf + sizeof(buf), g.features(i, c));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
    }
    out << '\n';
  }
  out << "edges " << g.edges.size() << '\n';
  for (const auto& e : g.edges) out << e.src << ' ' << e.dst << ' ' << to_string(e.kind) << '\n';
}

std::string graph_to_string(const ProgramGraph& g) {
  std::ostringstream s;
  write_graph(s, g);
  return s.str();
}

ProgramGraph permute_nodes(const ProgramGraph& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.num_nodes()) throw std::invalid_argument("permutation size mismatch");
  ProgramGraph out;
  out.kinds.resize(g.kinds.size());
  out.features.resize(g.features.rows(), g.features.cols());
  for (int i = 0; i < g.num_nodes(); ++i) {
    out.kinds[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = g.kinds[static_cast<std::size_t>(i)];
    out.features.row(perm[static_cast<std::size_t>(i)]) = g.features.row(i);
  }
  for (const auto& e : g.edges) {
    out.edges.push_back({perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)], e.kind});
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

}  // namespace pragmafill
