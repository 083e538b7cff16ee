// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Constrained C kernel model: AST, pragma slots and configurations, plus the
// text-level operations (parse, serialize, substitute) and design-space
// enumeration over the slots of a kernel.

#ifndef PRAGMAFILL_KERNEL_HPP_
#define PRAGMAFILL_KERNEL_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pragmafill {

enum class PragmaKind { Pipeline, Parallel, Tile };

enum class PipelineMode { Off, Cg, Flatten };

std::string_view to_string(PragmaKind kind);
std::string_view to_string(PipelineMode mode);
std::optional<PipelineMode> parse_pipeline_mode(std::string_view text);

/// Slot id prefix for a kind: `__PIPE__`, `__PARA__` or `__TILE__`.
std::string_view slot_prefix(PragmaKind kind);

/// Kind encoded by a slot id, or nullopt if the id does not match
/// `__(PIPE|PARA|TILE)__L[0-9]+`.
std::optional<PragmaKind> slot_kind_from_id(std::string_view id);

/// A pipeline mode or a positive integer factor.
class PragmaValue {
 public:
  PragmaValue() = default;
  static PragmaValue pipeline(PipelineMode mode) { return PragmaValue(mode); }
  static PragmaValue factor(std::int64_t f) { return PragmaValue(f); }

  bool is_pipeline() const { return std::holds_alternative<PipelineMode>(value_); }
  bool is_factor() const { return std::holds_alternative<std::int64_t>(value_); }
  PipelineMode mode() const { return std::get<PipelineMode>(value_); }
  std::int64_t factor() const { return std::get<std::int64_t>(value_); }

  /// `off`/`cg`/`flatten` or the decimal factor.
  std::string to_string() const;

  auto operator<=>(const PragmaValue&) const = default;

 private:
  explicit PragmaValue(PipelineMode m) : value_(m) {}
  explicit PragmaValue(std::int64_t f) : value_(f) {}
  std::variant<PipelineMode, std::int64_t> value_{PipelineMode::Off};
};

struct PragmaSlot {
  std::string id;
  PragmaKind kind = PragmaKind::Parallel;
  std::string loop_label;
  bool operator==(const PragmaSlot&) const = default;
};

/// Slot id -> value. Exactly one value per slot by construction.
class PragmaConfig {
 public:
  using Map = std::map<std::string, PragmaValue>;

  PragmaConfig() = default;
  explicit PragmaConfig(Map values) : values_(std::move(values)) {}

  void set(const std::string& id, PragmaValue v) { values_[id] = v; }
  const PragmaValue* find(const std::string& id) const;
  bool contains(const std::string& id) const { return values_.count(id) != 0; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const Map& values() const { return values_; }
  Map::const_iterator begin() const { return values_.begin(); }
  Map::const_iterator end() const { return values_.end(); }

  bool operator==(const PragmaConfig&) const = default;
  auto operator<=>(const PragmaConfig&) const = default;

 private:
  Map values_;
};

// ---------------------------------------------------------------------------
// AST

enum class ScalarType { Int, Float, Double };
std::string_view to_string(ScalarType t);

struct Param {
  ScalarType type = ScalarType::Double;
  std::string name;
  std::vector<std::int64_t> dims;  // empty for scalars
  bool operator==(const Param&) const = default;
};

/// Σ coeff·var + constant, terms in first-appearance order with merged
/// coefficients and no zero terms.
struct AffineExpr {
  struct Term {
    std::string var;
    std::int64_t coeff = 1;
    bool operator==(const Term&) const = default;
  };
  std::vector<Term> terms;
  std::int64_t constant = 0;
  bool operator==(const AffineExpr&) const = default;
};

struct ArrayAccess {
  std::string array;
  std::vector<AffineExpr> indices;
  bool operator==(const ArrayAccess&) const = default;
};

struct Expr {
  enum class Kind { Number, Scalar, Access, Neg, Binary };
  Kind kind = Kind::Number;
  std::string text;      // literal text (Number) or name (Scalar)
  ArrayAccess access;    // Access
  char op = 0;           // Binary: one of + - * /
  std::vector<Expr> operands;  // Neg: 1, Binary: 2
  bool operator==(const Expr&) const = default;
};

enum class AssignOp { Assign, AddAssign, SubAssign, MulAssign };
std::string_view to_string(AssignOp op);

struct Statement {
  ArrayAccess lhs;
  AssignOp op = AssignOp::Assign;
  Expr rhs;
  bool operator==(const Statement&) const = default;
};

struct LoopRef {
  std::size_t index = 0;
  bool operator==(const LoopRef&) const = default;
};

using BodyItem = std::variant<Statement, LoopRef>;

/// One pragma line attached to a loop: either an `auto{}` slot or a
/// concrete value (as found in substituted sources).
struct LoopPragma {
  PragmaKind kind = PragmaKind::Parallel;
  std::optional<std::string> slot_id;
  std::optional<PragmaValue> fixed;
  bool operator==(const LoopPragma&) const = default;
};

struct Loop {
  std::string label;
  bool explicit_label = false;  // label was written in the source
  std::string var;
  std::int64_t trip_count = 1;
  std::vector<LoopPragma> pragmas;  // source order
  std::vector<BodyItem> body;
  std::optional<std::size_t> parent;
  int depth = 1;  // outermost loops have depth 1
  bool operator==(const Loop&) const = default;
};

/// Loops are stored in preorder; `LoopRef::index` indexes `loops`.
struct KernelAst {
  bool kernel_pragma = false;  // `#pragma ACCEL kernel` before the function
  std::string name;
  std::vector<Param> params;
  std::vector<BodyItem> body;
  std::vector<Loop> loops;
  bool operator==(const KernelAst&) const = default;

  const Loop* find_loop(std::string_view label) const;
  std::size_t statement_count() const;
  bool has_child_loops(std::size_t loop) const;
};

// ---------------------------------------------------------------------------
// Errors

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class SubstitutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpaceTooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Operations

KernelAst parse_kernel(std::string_view source);

/// Canonical text form; `parse_kernel(serialize(ast)) == ast`.
std::string serialize(const KernelAst& ast);

/// Slots in source order.
std::vector<PragmaSlot> extract_slots(const KernelAst& ast);

/// Replaces every `auto{ID}` placeholder with its configured value. A
/// PIPELINE `off` removes the whole pragma line; all other bytes are kept.
std::string substitute(std::string_view source, const PragmaConfig& config);

struct Violation {
  std::string slot_id;
  std::string message;
  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_config(const KernelAst& ast, const PragmaConfig& config);

/// `id=value` pairs in slot order, comma separated, no spaces.
std::string serialize_target(const std::vector<PragmaSlot>& slots, const PragmaConfig& config);

/// Effective pragmas of one loop after combining configured slots and
/// concrete pragma lines. Missing pragmas default to off / factor 1.
struct LoopPragmas {
  PipelineMode pipeline = PipelineMode::Off;
  std::int64_t parallel = 1;
  std::int64_t tile = 1;
  bool has_pipeline = false;  // a pipeline pragma (other than off) is applied
  bool has_parallel = false;
  bool has_tile = false;
};

/// Indexed like `ast.loops`. Precondition: validate_config passes.
std::vector<LoopPragmas> resolve_pragmas(const KernelAst& ast, const PragmaConfig& config);

struct SpaceCaps {
  std::int64_t max_factor = 32;
  std::uint64_t max_space = 100000;
};

/// Legal factors for a loop: powers of two dividing the trip count, up to
/// min(trip_count, max_factor), plus the trip count itself. Ascending.
std::vector<std::int64_t> factor_grid(std::int64_t trip_count, std::int64_t max_factor);

/// Candidate values of one slot in enumeration order.
std::vector<PragmaValue> slot_domain(const KernelAst& ast, const PragmaSlot& slot,
                                     const SpaceCaps& caps);

/// Lazily indexed design space: mixed-radix over slot domains in source
/// order, last slot varying fastest.
class ConfigSpace {
 public:
  ConfigSpace(const KernelAst& ast, const SpaceCaps& caps);

  std::uint64_t size() const { return size_; }
  PragmaConfig at(std::uint64_t index) const;
  const std::vector<PragmaSlot>& slots() const { return slots_; }
  const std::vector<std::vector<PragmaValue>>& domains() const { return domains_; }

  class iterator {
   public:
    using value_type = PragmaConfig;
    using difference_type = std::ptrdiff_t;
    iterator() = default;
    iterator(const ConfigSpace* space, std::uint64_t i) : space_(space), i_(i) {}
    PragmaConfig operator*() const { return space_->at(i_); }
    iterator& operator++() { ++i_; return *this; }
    iterator operator++(int) { auto t = *this; ++i_; return t; }
    bool operator==(const iterator& o) const { return i_ == o.i_; }

   private:
    const ConfigSpace* space_ = nullptr;
    std::uint64_t i_ = 0;
  };
  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, size_}; }

 private:
  std::vector<PragmaSlot> slots_;
  std::vector<std::vector<PragmaValue>> domains_;
  std::uint64_t size_ = 1;
};

ConfigSpace enumerate_space(const KernelAst& ast, const SpaceCaps& caps = {});

/// All-default configuration: pipeline off, every factor 1.
PragmaConfig default_config(const KernelAst& ast);

}  // namespace pragmafill

#endif  // PRAGMAFILL_KERNEL_HPP_
