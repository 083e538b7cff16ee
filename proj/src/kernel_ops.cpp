// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <limits>
#include <regex>

#include "pragmafill/kernel.hpp"

namespace pragmafill {

std::string_view to_string(PragmaKind kind) {
  switch (kind) {
    case PragmaKind::Pipeline: return "PIPELINE";
    case PragmaKind::Parallel: return "PARALLEL";
    case PragmaKind::Tile: return "TILE";
  }
  return "?";
}

std::string_view to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Off: return "off";
    case PipelineMode::Cg: return "cg";
    case PipelineMode::Flatten: return "flatten";
  }
  return "?";
}

std::optional<PipelineMode> parse_pipeline_mode(std::string_view text) {
  if (text == "off" || text.empty()) return PipelineMode::Off;
  if (text == "cg") return PipelineMode::Cg;
  if (text == "flatten") return PipelineMode::Flatten;
  return std::nullopt;
}

std::string_view slot_prefix(PragmaKind kind) {
  switch (kind) {
    case PragmaKind::Pipeline: return "__PIPE__";
    case PragmaKind::Parallel: return "__PARA__";
    case PragmaKind::Tile: return "__TILE__";
  }
  return "";
}

std::optional<PragmaKind> slot_kind_from_id(std::string_view id) {
  static const std::regex re(R"(__(PIPE|PARA|TILE)__L[0-9]+)");
  std::string s(id);
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  if (m[1] == "PIPE") return PragmaKind::Pipeline;
  if (m[1] == "PARA") return PragmaKind::Parallel;
  return PragmaKind::Tile;
}

std::string PragmaValue::to_string() const {
  if (is_pipeline()) return std::string(pragmafill::to_string(mode()));
  return std::to_string(factor());
}

const PragmaValue* PragmaConfig::find(const std::string& id) const {
  auto it = values_.find(id);
  return it == values_.end() ? nullptr : &it->second;
}

std::string_view to_string(ScalarType t) {
  switch (t) {
    case ScalarType::Int: return "int";
    case ScalarType::Float: return "float";
    case ScalarType::Double: return "double";
  }
  return "?";
}

std::string_view to_string(AssignOp op) {
  switch (op) {
    case AssignOp::Assign: return "=";
    case AssignOp::AddAssign: return "+=";
    case AssignOp::SubAssign: return "-=";
    case AssignOp::MulAssign: return "*=";
  }
  return "?";
}

const Loop* KernelAst::find_loop(std::string_view label) const {
  for (const auto& l : loops) {
    if (l.label == label) return &l;
  }
  return nullptr;
}

std::size_t KernelAst::statement_count() const {
  auto count = [](const std::vector<BodyItem>& items) {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const BodyItem& b) {
      return std::holds_alternative<Statement>(b);
    }));
  };
  std::size_t n = count(body);
  for (const auto& l : loops) n += count(l.body);
  return n;
}

bool KernelAst::has_child_loops(std::size_t loop) const {
  const auto& body_items = loops.at(loop).body;
  return std::any_of(body_items.begin(), body_items.end(),
                     [](const BodyItem& b) { return std::holds_alternative<LoopRef>(b); });
}

std::vector<PragmaSlot> extract_slots(const KernelAst& ast) {
  std::vector<PragmaSlot> out;
  for (const auto& loop : ast.loops) {
    for (const auto& p : loop.pragmas) {
      if (p.slot_id) out.push_back(PragmaSlot{*p.slot_id, p.kind, loop.label});
    }
  }
  return out;
}

std::string serialize_target(const std::vector<PragmaSlot>& slots, const PragmaConfig& config) {
  std::string out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const PragmaValue* v = config.find(slots[i].id);
    if (!v) throw std::invalid_argument("target misses slot '" + slots[i].id + "'");
    if (i) out += ',';
    out += slots[i].id;
    out += '=';
    out += v->to_string();
  }
  return out;
}

namespace {

std::optional<std::string> domain_error(const PragmaSlot& slot, const PragmaValue& v, std::int64_t trip) {
  if (slot.kind == PragmaKind::Pipeline) {
    if (!v.is_pipeline()) return "PIPELINE slot needs off, cg or flatten";
    return std::nullopt;
  }
  if (!v.is_factor()) return std::string(to_string(slot.kind)) + " slot needs an integer factor";
  if (v.factor() < 1) return "factor must be at least 1";
  if (v.factor() > trip) return "factor exceeds trip count";
  return std::nullopt;
}

}  // namespace

std::vector<Violation> validate_config(const KernelAst& ast, const PragmaConfig& config) {
  std::vector<Violation> out;
  auto slots = extract_slots(ast);
  for (const auto& slot : slots) {
    const PragmaValue* v = config.find(slot.id);
    if (!v) {
      out.push_back({slot.id, "missing value for slot " + slot.id});
      continue;
    }
    const Loop* loop = ast.find_loop(slot.loop_label);
    if (auto err = domain_error(slot, *v, loop->trip_count)) out.push_back({slot.id, *err});
  }
  for (const auto& [id, _] : config) {
    bool known = std::any_of(slots.begin(), slots.end(), [&](const PragmaSlot& s) { return s.id == id; });
    if (!known) out.push_back({id, "unknown slot " + id});
  }
  return out;
}

std::string substitute(std::string_view source, const PragmaConfig& config) {
  KernelAst ast = parse_kernel(source);
  for (const auto& slot : extract_slots(ast)) {
    const PragmaValue* v = config.find(slot.id);
    if (!v) throw SubstitutionError("missing assignment for slot " + slot.id);
    if (auto err = domain_error(slot, *v, ast.find_loop(slot.loop_label)->trip_count)) {
      throw SubstitutionError(slot.id + ": " + *err);
    }
  }

  static const std::regex placeholder(R"(auto\{([^}]*)\})");
  std::string out;
  out.reserve(source.size());
  std::size_t pos = 0;
  while (pos < source.size()) {
    std::size_t nl = source.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? source.size() : nl + 1;
    std::string line(source.substr(pos, end - pos));
    pos = end;
    std::size_t first = line.find_first_not_of(" \t");
    std::smatch m;
    if (first == std::string::npos || line[first] != '#' || !std::regex_search(line, m, placeholder) ||
        !config.contains(m[1].str())) {
      out += line;
      continue;
    }
    const PragmaValue& v = *config.find(m[1].str());
    if (v.is_pipeline() && v.mode() == PipelineMode::Off) continue;
    out += m.prefix().str();
    out += v.to_string();
    out += m.suffix().str();
  }
  return out;
}

std::vector<LoopPragmas> resolve_pragmas(const KernelAst& ast, const PragmaConfig& config) {
  std::vector<LoopPragmas> out(ast.loops.size());
  for (std::size_t i = 0; i < ast.loops.size(); ++i) {
    for (const auto& p : ast.loops[i].pragmas) {
      std::optional<PragmaValue> v = p.fixed;
      if (p.slot_id) {
        const PragmaValue* found = config.find(*p.slot_id);
        if (!found) throw std::invalid_argument("missing value for slot " + *p.slot_id);
        v = *found;
      }
      LoopPragmas& r = out[i];
      switch (p.kind) {
        case PragmaKind::Pipeline:
          r.pipeline = v->mode();
          r.has_pipeline = r.pipeline != PipelineMode::Off;
          break;
        case PragmaKind::Parallel:
          r.parallel = v->factor();
          r.has_parallel = true;
          break;
        case PragmaKind::Tile:
          r.tile = v->factor();
          r.has_tile = true;
          break;
      }
    }
  }
  return out;
}

std::vector<std::int64_t> factor_grid(std::int64_t trip_count, std::int64_t max_factor) {
  std::vector<std::int64_t> out;
  std::int64_t cap = std::min(trip_count, max_factor);
  for (std::int64_t f = 1; f <= cap; f *= 2) {
    if (trip_count % f == 0) out.push_back(f);
  }
  if (out.empty() || out.back() != trip_count) out.push_back(trip_count);
  return out;
}

std::vector<PragmaValue> slot_domain(const KernelAst& ast, const PragmaSlot& slot, const SpaceCaps& caps) {
  std::vector<PragmaValue> out;
  if (slot.kind == PragmaKind::Pipeline) {
    for (auto m : {PipelineMode::Off, PipelineMode::Cg, PipelineMode::Flatten}) {
      out.push_back(PragmaValue::pipeline(m));
    }
    return out;
  }
  for (auto f : factor_grid(ast.find_loop(slot.loop_label)->trip_count, caps.max_factor)) {
    out.push_back(PragmaValue::factor(f));
  }
  return out;
}

ConfigSpace::ConfigSpace(const KernelAst& ast, const SpaceCaps& caps) : slots_(extract_slots(ast)) {
  for (const auto& slot : slots_) {
    domains_.push_back(slot_domain(ast, slot, caps));
    std::uint64_t d = domains_.back().size();
    if (size_ > std::numeric_limits<std::uint64_t>::max() / d || size_ * d > caps.max_space) {
      throw SpaceTooLargeError("design space of '" + ast.name + "' exceeds " +
                               std::to_string(caps.max_space) + " configurations");
    }
    size_ *= d;
  }
}

PragmaConfig ConfigSpace::at(std::uint64_t index) const {
  if (index >= size_) throw std::out_of_range("config index out of range");
  PragmaConfig cfg;
  for (std::size_t k = slots_.size(); k-- > 0;) {
    std::uint64_t d = domains_[k].size();
    cfg.set(slots_[k].id, domains_[k][index % d]);
    index /= d;
  }
  return cfg;
}

ConfigSpace enumerate_space(const KernelAst& ast, const SpaceCaps& caps) { return ConfigSpace(ast, caps); }

PragmaConfig default_config(const KernelAst& ast) {
  PragmaConfig cfg;
  for (const auto& slot : extract_slots(ast)) {
    cfg.set(slot.id, slot.kind == PragmaKind::Pipeline ? PragmaValue::pipeline(PipelineMode::Off)
                                                       : PragmaValue::factor(1));
  }
  return cfg;
}

}  // namespace pragmafill
