#pragma once

// Small expression language for closed-form decision rules, e.g.
//
//   0 < x1 < 2 && 4*x1 >= x2 + x3
//
// Grammar (lowest precedence first):
//   or   := and ('||' and)*
//   and  := not ('&&' not)*
//   not  := '!' not | cmp
//   cmp  := sum (relop sum)*         chained: a < b < c  ==  a < b && b < c
//   sum  := prod (('+' | '-') prod)*
//   prod := unary (('*' | '/') unary)*
//   unary:= '-' unary | primary
//   primary := number | 'x' index | '(' or ')'
//
// Feature references are 1-based. Comparisons are exact (no tolerance).

#include <cctype>
#include <cstddef>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dxp/core.hpp"

namespace dxp {

class Expr {
public:
  enum class Op {
    Const, Feature,
    Neg, Add, Sub, Mul, Div,
    Lt, Le, Gt, Ge, Eq, Ne,
    Not, And, Or,
  };

  static Expr parse(const std::string& text);

  bool is_boolean() const { return root_ && boolean(*root_); }

  // Evaluates a boolean expression at x (1-based feature references).
  bool holds(const Point& x) const { return eval(*root_, x) != 0.0; }

  // Largest feature index referenced (0 if none).
  std::size_t max_feature() const { return root_ ? max_feature(*root_) : 0; }

  // Canonical fully-parenthesised text. parse(to_string()) reproduces the tree.
  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    if (root_)
      print(os, *root_);
    return os.str();
  }

  bool operator==(const Expr& other) const { return to_string() == other.to_string(); }

private:
  struct Node {
    Op op;
    double value = 0.0;       // Const
    std::size_t feature = 0;  // Feature
    std::vector<std::shared_ptr<const Node>> args;
  };
  using NodePtr = std::shared_ptr<const Node>;

  explicit Expr(NodePtr root) : root_(std::move(root)) {}

  static bool boolean(const Node& n) {
    switch (n.op) {
    case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: case Op::Eq: case Op::Ne:
    case Op::Not: case Op::And: case Op::Or:
      return true;
    default:
      return false;
    }
  }

  static double eval(const Node& n, const Point& x) {
    auto a = [&](std::size_t k) { return eval(*n.args[k], x); };
    switch (n.op) {
    case Op::Const: return n.value;
    case Op::Feature: return x.at(n.feature - 1);
    case Op::Neg: return -a(0);
    case Op::Add: return a(0) + a(1);
    case Op::Sub: return a(0) - a(1);
    case Op::Mul: return a(0) * a(1);
    case Op::Div: return a(0) / a(1);
    case Op::Lt: return a(0) < a(1);
    case Op::Le: return a(0) <= a(1);
    case Op::Gt: return a(0) > a(1);
    case Op::Ge: return a(0) >= a(1);
    case Op::Eq: return a(0) == a(1);
    case Op::Ne: return a(0) != a(1);
    case Op::Not: return a(0) == 0.0;
    case Op::And: return a(0) != 0.0 && a(1) != 0.0;
    case Op::Or: return a(0) != 0.0 || a(1) != 0.0;
    }
    return 0.0;
  }

  static std::size_t max_feature(const Node& n) {
    std::size_t m = n.op == Op::Feature ? n.feature : 0;
    for (const auto& c : n.args)
      m = std::max(m, max_feature(*c));
    return m;
  }

  static const char* symbol(Op op) {
    switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::And: return "&&";
    case Op::Or: return "||";
    default: return "?";
    }
  }

  static void print(std::ostream& os, const Node& n) {
    switch (n.op) {
    case Op::Const:
      if (n.value < 0)
        os << "(-" << -n.value << ')';
      else
        os << n.value;
      return;
    case Op::Feature: os << 'x' << n.feature; return;
    case Op::Neg: os << "(-"; print(os, *n.args[0]); os << ')'; return;
    case Op::Not: os << "(!"; print(os, *n.args[0]); os << ')'; return;
    default:
      os << '(';
      print(os, *n.args[0]);
      os << ' ' << symbol(n.op) << ' ';
      print(os, *n.args[1]);
      os << ')';
    }
  }

  class Parser;

  NodePtr root_;
};

class Expr::Parser {
public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr parse_all() {
    auto n = parse_or();
    skip_ws();
    if (pos_ != s_.size())
      fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression: " + what + " at column " + std::to_string(pos_ + 1) + " in \"" + s_ + "\"");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  bool accept(const char* tok) {
    skip_ws();
    const std::string t(tok);
    if (s_.compare(pos_, t.size(), t) == 0) {
      pos_ += t.size();
      return true;
    }
    return false;
  }

  static NodePtr make(Op op, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    return n;
  }

  void expect_bool(const NodePtr& n, const char* ctx) const {
    if (!boolean(*n))
      fail(std::string("operand of '") + ctx + "' must be a condition");
  }

  void expect_num(const NodePtr& n, const char* ctx) const {
    if (boolean(*n))
      fail(std::string("operand of '") + ctx + "' must be numeric");
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (accept("||")) {
      auto rhs = parse_and();
      expect_bool(lhs, "||");
      expect_bool(rhs, "||");
      lhs = make(Op::Or, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr parse_and() {
    auto lhs = parse_not();
    while (accept("&&")) {
      auto rhs = parse_not();
      expect_bool(lhs, "&&");
      expect_bool(rhs, "&&");
      lhs = make(Op::And, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr parse_not() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '!' && (pos_ + 1 >= s_.size() || s_[pos_ + 1] != '=')) {
      ++pos_;
      auto a = parse_not();
      expect_bool(a, "!");
      return make(Op::Not, {a});
    }
    return parse_cmp();
  }

  bool relop(Op& op) {
    // two-character operators first
    if (accept("<=")) { op = Op::Le; return true; }
    if (accept(">=")) { op = Op::Ge; return true; }
    if (accept("==")) { op = Op::Eq; return true; }
    if (accept("!=")) { op = Op::Ne; return true; }
    if (accept("<")) { op = Op::Lt; return true; }
    if (accept(">")) { op = Op::Gt; return true; }
    return false;
  }

  NodePtr parse_cmp() {
    auto lhs = parse_sum();
    NodePtr result;
    Op op;
    while (relop(op)) {
      auto rhs = parse_sum();
      expect_num(lhs, symbol(op));
      expect_num(rhs, symbol(op));
      auto c = make(op, {lhs, rhs});
      result = result ? make(Op::And, {result, c}) : c;
      lhs = rhs;
    }
    return result ? result : lhs;
  }

  NodePtr parse_sum() {
    auto lhs = parse_prod();
    for (;;) {
      skip_ws();
      Op op;
      if (accept("+")) op = Op::Add;
      else if (pos_ < s_.size() && s_[pos_] == '-') { ++pos_; op = Op::Sub; }
      else break;
      auto rhs = parse_prod();
      expect_num(lhs, symbol(op));
      expect_num(rhs, symbol(op));
      lhs = make(op, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr parse_prod() {
    auto lhs = parse_unary();
    for (;;) {
      Op op;
      if (accept("*")) op = Op::Mul;
      else if (accept("/")) op = Op::Div;
      else break;
      auto rhs = parse_unary();
      expect_num(lhs, symbol(op));
      expect_num(rhs, symbol(op));
      lhs = make(op, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr parse_unary() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '-') {
      ++pos_;
      auto a = parse_unary();
      expect_num(a, "-");
      return make(Op::Neg, {a});
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size())
      fail("unexpected end of input");
    const char ch = s_[pos_];
    if (ch == '(') {
      ++pos_;
      auto n = parse_or();
      if (!accept(")"))
        fail("missing ')'");
      return n;
    }
    if (ch == 'x') {
      ++pos_;
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
        ++pos_;
      if (start == pos_)
        fail("feature reference needs an index, e.g. x1");
      auto n = std::make_shared<Node>();
      n->op = Op::Feature;
      n->feature = std::stoul(s_.substr(start, pos_ - start));
      if (n->feature == 0)
        fail("feature indices start at 1");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      auto n = std::make_shared<Node>();
      n->op = Op::Const;
      n->value = value;
      return n;
    }
    fail("unexpected '" + std::string(1, ch) + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

inline Expr Expr::parse(const std::string& text) {
  Parser p(text);
  return Expr(p.parse_all());
}

}  // namespace dxp
