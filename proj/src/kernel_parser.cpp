// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <charconv>
#include <regex>
#include <set>
#include <sstream>

#include "pragmafill/kernel.hpp"

namespace pragmafill {

namespace {

constexpr int kMaxLoopDepth = 4;

struct Token {
  enum class Kind { Ident, Number, Punct, Pragma, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1;
  int column = 1;
};

// Splits source into tokens. `#` starts a pragma line token spanning to the
// end of the line; `//` and `/* */` comments are skipped.
class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        t.kind = Token::Kind::End;
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (c == '#') {
        std::size_t end = src_.find('\n', pos_);
        if (end == std::string_view::npos) end = src_.size();
        t.kind = Token::Kind::Pragma;
        t.text = std::string(src_.substr(pos_, end - pos_));
        while (!t.text.empty() && (t.text.back() == '\r' || t.text.back() == ' ' ||
                                   t.text.back() == '\t')) {
          t.text.pop_back();
        }
        advance(end - pos_);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t n = 0;
        while (pos_ + n < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_ + n])) || src_[pos_ + n] == '_')) {
          ++n;
        }
        t.kind = Token::Kind::Ident;
        t.text = std::string(src_.substr(pos_, n));
        advance(n);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t n = 0;
        auto digits = [&] {
          while (pos_ + n < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + n]))) ++n;
        };
        digits();
        if (pos_ + n < src_.size() && src_[pos_ + n] == '.') {
          ++n;
          digits();
        }
        t.kind = Token::Kind::Number;
        t.text = std::string(src_.substr(pos_, n));
        advance(n);
      } else {
        static const char* kTwoChar[] = {"+=", "-=", "*=", "/=", "++", "--", "<=", ">=", "==", "!="};
        t.kind = Token::Kind::Punct;
        std::string_view rest = src_.substr(pos_);
        for (const char* op : kTwoChar) {
          if (rest.substr(0, 2) == op) {
            t.text = op;
            break;
          }
        }
        if (t.text.empty()) t.text = std::string(1, c);
        advance(t.text.size());
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i, ++pos_) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance(1);
      } else if (src_.substr(pos_, 2) == "//") {
        std::size_t end = src_.find('\n', pos_);
        advance((end == std::string_view::npos ? src_.size() : end) - pos_);
      } else if (src_.substr(pos_, 2) == "/*") {
        std::size_t end = src_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) throw ParseError(line_, col_, "unterminated comment");
        advance(end + 2 - pos_);
      } else {
        return;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool parse_int(std::string_view s, std::int64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// Linear form used while parsing index expressions.
struct Linear {
  AffineExpr expr;
  bool is_constant() const { return expr.terms.empty(); }
};

void add_term(AffineExpr& e, const std::string& var, std::int64_t coeff) {
  for (auto it = e.terms.begin(); it != e.terms.end(); ++it) {
    if (it->var == var) {
      it->coeff += coeff;
      if (it->coeff == 0) e.terms.erase(it);
      return;
    }
  }
  if (coeff != 0) e.terms.push_back({var, coeff});
}

Linear add(Linear a, const Linear& b, std::int64_t sign) {
  for (const auto& t : b.expr.terms) add_term(a.expr, t.var, sign * t.coeff);
  a.expr.constant += sign * b.expr.constant;
  return a;
}

Linear scale(Linear a, std::int64_t k) {
  AffineExpr out;
  for (const auto& t : a.expr.terms) add_term(out, t.var, t.coeff * k);
  out.constant = a.expr.constant * k;
  return Linear{out};
}

class Parser {
 public:
  explicit Parser(std::string_view source) : tokens_(Lexer(source).run()) {}

  KernelAst run() {
    while (peek().kind == Token::Kind::Pragma) {
      const Token& t = next();
      if (!is_kernel_pragma(t.text)) {
        throw ParseError(t.line, t.column, "pragma not immediately preceding a for-loop");
      }
      ast_.kernel_pragma = true;
    }
    expect_ident("void");
    ast_.name = expect_kind(Token::Kind::Ident, "function name").text;
    expect_punct("(");
    if (!is_punct(")")) {
      while (true) {
        parse_param();
        if (is_punct(",")) {
          next();
          continue;
        }
        break;
      }
    }
    expect_punct(")");
    expect_punct("{");
    parse_items(ast_.body, std::nullopt, 0);
    expect_punct("}");
    if (peek().kind != Token::Kind::End) fail(peek(), "unexpected text after function body");
    if (ast_.loops.empty()) fail(peek(), "kernel contains no for-loop");
    assign_labels();
    return std::move(ast_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  [[noreturn]] static void fail(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.column, msg);
  }
  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::Punct && peek(ahead).text == p;
  }
  bool is_ident(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::Ident && peek(ahead).text == p;
  }
  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail(peek(), "expected '" + std::string(p) + "'");
    next();
  }
  void expect_ident(std::string_view p) {
    if (!is_ident(p)) fail(peek(), "expected '" + std::string(p) + "'");
    next();
  }
  const Token& expect_kind(Token::Kind k, const std::string& what) {
    if (peek().kind != k) fail(peek(), "expected " + what);
    return next();
  }
  std::int64_t expect_int(const std::string& what) {
    const Token& t = peek();
    std::int64_t v = 0;
    if (t.kind != Token::Kind::Number || !parse_int(t.text, v)) fail(t, "expected integer " + what);
    next();
    return v;
  }

  static bool is_kernel_pragma(const std::string& text) {
    static const std::regex re(R"(#\s*pragma\s+ACCEL\s+kernel)");
    return std::regex_match(text, re);
  }

  void parse_param() {
    const Token& t = expect_kind(Token::Kind::Ident, "parameter type");
    Param p;
    if (t.text == "int") {
      p.type = ScalarType::Int;
    } else if (t.text == "float") {
      p.type = ScalarType::Float;
    } else if (t.text == "double") {
      p.type = ScalarType::Double;
    } else {
      fail(t, "unsupported parameter type '" + t.text + "'");
    }
    const Token& name = expect_kind(Token::Kind::Ident, "parameter name");
    p.name = name.text;
    while (is_punct("[")) {
      next();
      if (peek().kind == Token::Kind::Ident) fail(peek(), "array dimension must be a constant");
      std::int64_t d = expect_int("array dimension");
      if (d < 1) fail(name, "array dimension must be positive");
      p.dims.push_back(d);
      expect_punct("]");
    }
    for (const auto& q : ast_.params) {
      if (q.name == p.name) fail(name, "duplicate parameter '" + p.name + "'");
    }
    ast_.params.push_back(std::move(p));
  }

  const Param* find_param(const std::string& name) const {
    for (const auto& p : ast_.params) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  bool is_loop_var(const std::string& name) const {
    for (const auto& v : loop_vars_) {
      if (v == name) return true;
    }
    return false;
  }

  LoopPragma parse_loop_pragma(const Token& t) {
    static const std::regex pipe_re(R"(#\s*pragma\s+ACCEL\s+PIPELINE\s+(?:auto\{([^}]*)\}|(\w+)))");
    static const std::regex factor_re(
        R"(#\s*pragma\s+ACCEL\s+(PARALLEL|TILE)\s+FACTOR\s*=\s*(?:auto\{([^}]*)\}|(\d+)))");
    std::smatch m;
    LoopPragma lp;
    if (std::regex_match(t.text, m, pipe_re)) {
      lp.kind = PragmaKind::Pipeline;
      if (m[1].matched) {
        lp.slot_id = m[1].str();
      } else {
        auto mode = parse_pipeline_mode(m[2].str());
        if (!mode) fail(t, "unknown PIPELINE value '" + m[2].str() + "'");
        lp.fixed = PragmaValue::pipeline(*mode);
      }
    } else if (std::regex_match(t.text, m, factor_re)) {
      lp.kind = m[1].str() == "PARALLEL" ? PragmaKind::Parallel : PragmaKind::Tile;
      if (m[2].matched) {
        lp.slot_id = m[2].str();
      } else {
        std::int64_t f = 0;
        if (!parse_int(m[3].str(), f) || f < 1) fail(t, "factor must be a positive integer");
        lp.fixed = PragmaValue::factor(f);
      }
    } else if (is_kernel_pragma(t.text)) {
      fail(t, "'#pragma ACCEL kernel' must precede the function");
    } else {
      fail(t, "malformed pragma line");
    }
    if (lp.slot_id) {
      auto kind = slot_kind_from_id(*lp.slot_id);
      if (!kind) fail(t, "malformed slot id '" + *lp.slot_id + "'");
      if (*kind != lp.kind) fail(t, "slot id '" + *lp.slot_id + "' does not match pragma kind");
      if (!slot_ids_.insert(*lp.slot_id).second) fail(t, "duplicate slot id '" + *lp.slot_id + "'");
    }
    return lp;
  }

  void parse_items(std::vector<BodyItem>& out, std::optional<std::size_t> parent, int depth) {
    std::vector<LoopPragma> pending;
    std::optional<Token> first_pending;
    while (!is_punct("}")) {
      if (peek().kind == Token::Kind::End) fail(peek(), "expected '}'");
      if (peek().kind == Token::Kind::Pragma) {
        const Token& t = next();
        LoopPragma lp = parse_loop_pragma(t);
        for (const auto& q : pending) {
          if (q.kind == lp.kind) {
            fail(t, "duplicate " + std::string(to_string(lp.kind)) + " pragma on one loop");
          }
        }
        if (!first_pending) first_pending = t;
        pending.push_back(std::move(lp));
        continue;
      }
      bool labelled = peek().kind == Token::Kind::Ident && is_punct(":", 1) && is_ident("for", 2);
      if (is_ident("for") || labelled) {
        out.push_back(parse_loop(std::move(pending), parent, depth + 1));
        pending.clear();
        first_pending.reset();
        continue;
      }
      if (first_pending) fail(*first_pending, "pragma not immediately preceding a for-loop");
      out.push_back(parse_statement());
    }
    if (first_pending) fail(*first_pending, "pragma not immediately preceding a for-loop");
  }

  LoopRef parse_loop(std::vector<LoopPragma> pragmas, std::optional<std::size_t> parent, int depth) {
    const Token& start = peek();
    if (depth > kMaxLoopDepth) fail(start, "loop nest deeper than 4");
    Loop loop;
    if (!is_ident("for")) {
      loop.label = next().text;
      loop.explicit_label = true;
      expect_punct(":");
    }
    expect_ident("for");
    expect_punct("(");
    if (is_ident("int")) next();
    const Token& var = expect_kind(Token::Kind::Ident, "loop variable");
    if (is_loop_var(var.text)) fail(var, "loop variable '" + var.text + "' shadows an enclosing loop");
    if (find_param(var.text)) fail(var, "loop variable '" + var.text + "' shadows a parameter");
    expect_punct("=");
    if (peek().kind == Token::Kind::Ident) fail(peek(), "non-constant loop bound");
    std::int64_t lower = expect_int("lower bound");
    if (lower != 0) fail(start, "loop lower bound must be 0");
    expect_punct(";");
    if (!is_ident(var.text)) fail(peek(), "loop condition must test the loop variable");
    next();
    bool inclusive = false;
    if (is_punct("<=")) {
      inclusive = true;
      next();
    } else {
      expect_punct("<");
    }
    if (peek().kind != Token::Kind::Number) fail(peek(), "non-constant loop bound");
    std::int64_t bound = expect_int("loop bound");
    loop.trip_count = inclusive ? bound + 1 : bound;
    if (loop.trip_count < 1) fail(start, "loop trip count must be at least 1");
    expect_punct(";");
    parse_increment(var.text);
    expect_punct(")");

    loop.var = var.text;
    loop.pragmas = std::move(pragmas);
    loop.parent = parent;
    loop.depth = depth;
    std::size_t index = ast_.loops.size();
    ast_.loops.push_back(loop);

    loop_vars_.push_back(var.text);
    std::vector<BodyItem> body;
    if (is_punct("{")) {
      const Token& open = next();
      parse_items(body, index, depth);
      expect_punct("}");
      if (body.empty()) fail(open, "empty loop body");
    } else {
      if (is_ident("for") || peek().kind == Token::Kind::Pragma) {
        // An unbraced nested loop, possibly with its pragmas.
        std::vector<LoopPragma> inner;
        while (peek().kind == Token::Kind::Pragma) inner.push_back(parse_loop_pragma(next()));
        if (!is_ident("for")) fail(peek(), "pragma not immediately preceding a for-loop");
        body.push_back(parse_loop(std::move(inner), index, depth + 1));
      } else {
        body.push_back(parse_statement());
      }
    }
    loop_vars_.pop_back();
    ast_.loops[index].body = std::move(body);
    return LoopRef{index};
  }

  void parse_increment(const std::string& var) {
    if (is_punct("++")) {
      next();
      if (!is_ident(var)) fail(peek(), "loop increment must update the loop variable");
      next();
      return;
    }
    if (!is_ident(var)) fail(peek(), "loop increment must update the loop variable");
    next();
    if (is_punct("++")) {
      next();
      return;
    }
    if (is_punct("+=")) {
      next();
      if (expect_int("stride") != 1) fail(peek(), "loop stride must be 1");
      return;
    }
    if (is_punct("=")) {
      next();
      if (!is_ident(var)) fail(peek(), "loop stride must be 1");
      next();
      expect_punct("+");
      if (expect_int("stride") != 1) fail(peek(), "loop stride must be 1");
      return;
    }
    fail(peek(), "loop stride must be 1");
  }

  ArrayAccess parse_access(const Token& name) {
    const Param* p = find_param(name.text);
    if (!p || p->dims.empty()) fail(name, "'" + name.text + "' is not an array parameter");
    ArrayAccess a;
    a.array = name.text;
    while (is_punct("[")) {
      next();
      a.indices.push_back(parse_affine().expr);
      expect_punct("]");
    }
    if (a.indices.size() != p->dims.size()) fail(name, "wrong number of indices for '" + name.text + "'");
    return a;
  }

  Statement parse_statement() {
    const Token& name = expect_kind(Token::Kind::Ident, "statement");
    if (name.text == "if" || name.text == "while" || name.text == "return") {
      fail(name, "unsupported statement '" + name.text + "'");
    }
    Statement s;
    s.lhs = parse_access(name);
    const Token& op = peek();
    if (is_punct("=")) {
      s.op = AssignOp::Assign;
    } else if (is_punct("+=")) {
      s.op = AssignOp::AddAssign;
    } else if (is_punct("-=")) {
      s.op = AssignOp::SubAssign;
    } else if (is_punct("*=")) {
      s.op = AssignOp::MulAssign;
    } else {
      fail(op, "expected assignment operator");
    }
    next();
    s.rhs = parse_expr();
    expect_punct(";");
    return s;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    while (is_punct("+") || is_punct("-")) {
      char op = next().text[0];
      Expr rhs = parse_term();
      Expr b;
      b.kind = Expr::Kind::Binary;
      b.op = op;
      b.operands = {std::move(lhs), std::move(rhs)};
      lhs = std::move(b);
    }
    return lhs;
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    while (is_punct("*") || is_punct("/")) {
      char op = next().text[0];
      Expr rhs = parse_factor();
      Expr b;
      b.kind = Expr::Kind::Binary;
      b.op = op;
      b.operands = {std::move(lhs), std::move(rhs)};
      lhs = std::move(b);
    }
    return lhs;
  }

  Expr parse_factor() {
    const Token& t = peek();
    Expr e;
    if (t.kind == Token::Kind::Number) {
      e.kind = Expr::Kind::Number;
      e.text = next().text;
      return e;
    }
    if (is_punct("(")) {
      next();
      e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (is_punct("-")) {
      next();
      e.kind = Expr::Kind::Neg;
      e.operands.push_back(parse_factor());
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      const Token& name = next();
      if (is_punct("(")) fail(name, "function calls are not supported");
      if (is_punct("[")) {
        e.kind = Expr::Kind::Access;
        e.access = parse_access(name);
        return e;
      }
      const Param* p = find_param(name.text);
      if (!(p && p->dims.empty()) && !is_loop_var(name.text)) {
        fail(name, "unknown scalar '" + name.text + "'");
      }
      e.kind = Expr::Kind::Scalar;
      e.text = name.text;
      return e;
    }
    fail(t, "expected expression");
  }

  Linear parse_affine() {
    Linear acc = parse_affine_term();
    while (is_punct("+") || is_punct("-")) {
      std::int64_t sign = next().text == "+" ? 1 : -1;
      acc = add(std::move(acc), parse_affine_term(), sign);
    }
    return acc;
  }

  Linear parse_affine_term() {
    const Token& start = peek();
    Linear acc = parse_affine_factor();
    while (is_punct("*")) {
      next();
      Linear rhs = parse_affine_factor();
      if (acc.is_constant()) {
        acc = scale(std::move(rhs), acc.expr.constant);
      } else if (rhs.is_constant()) {
        acc = scale(std::move(acc), rhs.expr.constant);
      } else {
        fail(start, "array index is not affine");
      }
    }
    return acc;
  }

  Linear parse_affine_factor() {
    const Token& t = peek();
    Linear l;
    if (t.kind == Token::Kind::Number) {
      if (!parse_int(t.text, l.expr.constant)) fail(t, "array index must be integral");
      next();
      return l;
    }
    if (is_punct("(")) {
      next();
      l = parse_affine();
      expect_punct(")");
      return l;
    }
    if (is_punct("-")) {
      next();
      return scale(parse_affine_factor(), -1);
    }
    if (t.kind == Token::Kind::Ident) {
      if (!is_loop_var(t.text)) fail(t, "array index uses non-loop variable '" + t.text + "'");
      add_term(l.expr, next().text, 1);
      return l;
    }
    fail(t, "expected index expression");
  }

  void assign_labels() {
    std::set<std::string> used;
    for (const auto& l : ast_.loops) {
      if (l.explicit_label && !used.insert(l.label).second) {
        throw ParseError(1, 1, "duplicate loop label '" + l.label + "'");
      }
    }
    for (std::size_t i = 0; i < ast_.loops.size(); ++i) {
      auto& l = ast_.loops[i];
      if (l.explicit_label) continue;
      l.label = "L" + std::to_string(i);
      if (!used.insert(l.label).second) {
        throw ParseError(1, 1, "loop label '" + l.label + "' collides with an explicit label");
      }
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  KernelAst ast_;
  std::vector<std::string> loop_vars_;
  std::set<std::string> slot_ids_;
};

// ---------------------------------------------------------------------------
// Serialization

int precedence(const Expr& e) {
  if (e.kind != Expr::Kind::Binary) return 3;
  return (e.op == '+' || e.op == '-') ? 1 : 2;
}

void write_affine(std::ostream& os, const AffineExpr& a) {
  bool first = true;
  for (const auto& t : a.terms) {
    std::int64_t c = t.coeff;
    if (first) {
      if (c < 0) os << '-';
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    std::int64_t m = c < 0 ? -c : c;
    if (m != 1) os << m << '*';
    os << t.var;
    first = false;
  }
  if (first) {
    os << a.constant;
  } else if (a.constant != 0) {
    os << (a.constant < 0 ? " - " : " + ") << (a.constant < 0 ? -a.constant : a.constant);
  }
}

void write_access(std::ostream& os, const ArrayAccess& a) {
  os << a.array;
  for (const auto& idx : a.indices) {
    os << '[';
    write_affine(os, idx);
    os << ']';
  }
}

void write_expr(std::ostream& os, const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Number:
    case Expr::Kind::Scalar:
      os << e.text;
      return;
    case Expr::Kind::Access:
      write_access(os, e.access);
      return;
    case Expr::Kind::Neg: {
      const Expr& inner = e.operands[0];
      bool paren = inner.kind == Expr::Kind::Binary || inner.kind == Expr::Kind::Neg;
      os << '-';
      if (paren) os << '(';
      write_expr(os, inner);
      if (paren) os << ')';
      return;
    }
    case Expr::Kind::Binary: {
      int p = precedence(e);
      const Expr& l = e.operands[0];
      const Expr& r = e.operands[1];
      bool lp = precedence(l) < p;
      bool rp = precedence(r) <= p;
      if (lp) os << '(';
      write_expr(os, l);
      if (lp) os << ')';
      os << ' ' << e.op << ' ';
      if (rp) os << '(';
      write_expr(os, r);
      if (rp) os << ')';
      return;
    }
  }
}

void write_items(std::ostream& os, const KernelAst& ast, const std::vector<BodyItem>& items, int indent);

void write_loop(std::ostream& os, const KernelAst& ast, const Loop& loop, int indent) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& p : loop.pragmas) {
    os << pad << "#pragma ACCEL " << to_string(p.kind);
    std::string value = p.slot_id ? "auto{" + *p.slot_id + "}" : p.fixed->to_string();
    if (p.kind == PragmaKind::Pipeline) {
      os << ' ' << value << '\n';
    } else {
      os << " FACTOR=" << value << '\n';
    }
  }
  os << pad;
  if (loop.explicit_label) os << loop.label << ": ";
  os << "for (int " << loop.var << " = 0; " << loop.var << " < " << loop.trip_count << "; "
     << loop.var << "++) {\n";
  write_items(os, ast, loop.body, indent + 2);
  os << pad << "}\n";
}

void write_items(std::ostream& os, const KernelAst& ast, const std::vector<BodyItem>& items, int indent) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& item : items) {
    if (const auto* s = std::get_if<Statement>(&item)) {
      os << pad;
      write_access(os, s->lhs);
      os << ' ' << to_string(s->op) << ' ';
      write_expr(os, s->rhs);
      os << ";\n";
    } else {
      write_loop(os, ast, ast.loops[std::get<LoopRef>(item).index], indent);
    }
  }
}

}  // namespace

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

KernelAst parse_kernel(std::string_view source) { return Parser(source).run(); }

std::string serialize(const KernelAst& ast) {
  std::ostringstream os;
  if (ast.kernel_pragma) os << "#pragma ACCEL kernel\n\n";
  os << "void " << ast.name << "(";
  for (std::size_t i = 0; i < ast.params.size(); ++i) {
    const auto& p = ast.params[i];
    if (i) os << ", ";
    os << to_string(p.type) << ' ' << p.name;
    for (auto d : p.dims) os << '[' << d << ']';
  }
  os << ")\n{\n";
  write_items(os, ast, ast.body, 2);
  os << "}\n";
  return os.str();
}

}  // namespace pragmafill
