#pragma once

#include <cctype>
#include <memory>
#include <string>
#include <string_view>

#include "jetprol/errors.hpp"
#include "jetprol/jet.hpp"
#include "jetprol/rational.hpp"

namespace jetprol {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Rational-function expression tree over variables x1..xn.
struct Expr {
  enum class Kind { literal, variable, negate, add, subtract, multiply, divide, power };

  Kind kind;
  Rational value;          // literal
  int variable = 0;        // 1-based, variable
  unsigned exponent = 0;   // power
  ExprPtr lhs, rhs;        // operands; unary nodes use lhs

  static ExprPtr literal(Rational v) { return std::make_shared<const Expr>(Expr{Kind::literal, std::move(v), 0, 0, nullptr, nullptr}); }
  static ExprPtr var(int i) { return std::make_shared<const Expr>(Expr{Kind::variable, 0, i, 0, nullptr, nullptr}); }
  static ExprPtr unary(Kind k, ExprPtr a, unsigned e = 0) { return std::make_shared<const Expr>(Expr{k, 0, 0, e, std::move(a), nullptr}); }
  static ExprPtr binary(Kind k, ExprPtr a, ExprPtr b) { return std::make_shared<const Expr>(Expr{k, 0, 0, 0, std::move(a), std::move(b)}); }
};

/// Structural equality of expression trees.
inline bool same_tree(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::literal: return a.value == b.value;
    case Expr::Kind::variable: return a.variable == b.variable;
    case Expr::Kind::negate: return same_tree(*a.lhs, *b.lhs);
    case Expr::Kind::power: return a.exponent == b.exponent && same_tree(*a.lhs, *b.lhs);
    default: return same_tree(*a.lhs, *b.lhs) && same_tree(*a.rhs, *b.rhs);
  }
}

/// Fully parenthesized rendering that parses back to the same tree.
/// Literals are printed as "a/b"; division is always "(lhs)/(rhs)".
inline std::string to_string(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::literal:
      return sgn(e.value) < 0 ? "(-" + to_string(Rational(-e.value)) + ")" : to_string(e.value);
    case Expr::Kind::variable: return "x" + std::to_string(e.variable);
    case Expr::Kind::negate: return "-(" + to_string(*e.lhs) + ")";
    case Expr::Kind::power: return "(" + to_string(*e.lhs) + ")^" + std::to_string(e.exponent);
    case Expr::Kind::add: return "(" + to_string(*e.lhs) + ")+(" + to_string(*e.rhs) + ")";
    case Expr::Kind::subtract: return "(" + to_string(*e.lhs) + ")-(" + to_string(*e.rhs) + ")";
    case Expr::Kind::multiply: return "(" + to_string(*e.lhs) + ")*(" + to_string(*e.rhs) + ")";
    case Expr::Kind::divide: return "(" + to_string(*e.lhs) + ")/(" + to_string(*e.rhs) + ")";
  }
  return {};
}

namespace detail {

// Grammar (whitespace insignificant):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' uint)?
//   primary := rational | 'x' uint | '(' expr ')'
//   rational:= uint ('/' uint)?
// A literal "a/b" is read greedily when both sides are unsigned integers,
// so "2/3^2" is (2/3)^2. Write "(2)/(3^2)" for the other reading.
// '^' binds tighter than unary minus: "-x1^2" is -(x1^2).
class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  ExprPtr parse() {
    ExprPtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("parse", msg + " at position " + std::to_string(pos_) + " in \"" + std::string(s_) + "\"");
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool at_digit() {
    skip();
    return pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]));
  }

  std::string uint_text() {
    if (!at_digit()) fail("expected unsigned integer");
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  ExprPtr expr() {
    ExprPtr e = term();
    for (;;) {
      if (accept('+')) e = Expr::binary(Expr::Kind::add, e, term());
      else if (accept('-')) e = Expr::binary(Expr::Kind::subtract, e, term());
      else return e;
    }
  }

  ExprPtr term() {
    ExprPtr e = unary();
    for (;;) {
      if (accept('*')) e = Expr::binary(Expr::Kind::multiply, e, unary());
      else if (accept('/')) e = Expr::binary(Expr::Kind::divide, e, unary());
      else return e;
    }
  }

  ExprPtr unary() {
    if (accept('-')) return Expr::unary(Expr::Kind::negate, unary());
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (accept('^')) {
      std::string digits = uint_text();
      if (digits.size() > 9) fail("exponent too large");
      return Expr::unary(Expr::Kind::power, base, static_cast<unsigned>(std::stoul(digits)));
    }
    return base;
  }

  ExprPtr primary() {
    if (accept('(')) {
      ExprPtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (accept('x')) {
      std::string digits = uint_text();
      if (digits.size() > 6) fail("variable index too large");
      int i = std::stoi(digits);
      if (i < 1) fail("variables are numbered from x1");
      return Expr::var(i);
    }
    if (at_digit()) {
      Integer num(uint_text());
      std::size_t save = pos_;
      if (accept('/') && at_digit()) {
        Integer den(uint_text());
        if (den == 0) fail("zero denominator in literal");
        Rational r(num, den);
        r.canonicalize();
        return Expr::literal(r);
      }
      pos_ = save;
      return Expr::literal(Rational(num));
    }
    fail("expected number, variable or '('");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprPtr parse_expr(std::string_view text) { return detail::Parser(text).parse(); }

/// Taylor expansion of `e` at the space's base point, exact to `order`.
inline Jet compile(const Expr& e, const SpacePtr& space, int order) {
  switch (e.kind) {
    case Expr::Kind::literal: return Jet::constant(space, order, e.value);
    case Expr::Kind::variable:
      if (e.variable > space->n)
        throw InputError("compile", "variable x" + std::to_string(e.variable) + " out of range for n=" + std::to_string(space->n));
      return Jet::variable(space, order, e.variable - 1);
    case Expr::Kind::negate: return -compile(*e.lhs, space, order);
    case Expr::Kind::power: return compile(*e.lhs, space, order).pow(e.exponent);
    case Expr::Kind::add: return compile(*e.lhs, space, order) + compile(*e.rhs, space, order);
    case Expr::Kind::subtract: return compile(*e.lhs, space, order) - compile(*e.rhs, space, order);
    case Expr::Kind::multiply: return compile(*e.lhs, space, order) * compile(*e.rhs, space, order);
    case Expr::Kind::divide: {
      Jet den = compile(*e.rhs, space, order);
      if (sgn(den.constant_term()) == 0)
        throw DegeneracyError("compile", "pole at base point: denominator " + to_string(*e.rhs) + " vanishes");
      return compile(*e.lhs, space, order) * den.inverse();
    }
  }
  throw InputError("compile", "malformed expression");
}

inline Jet compile(const ExprPtr& e, const SpacePtr& space, int order) { return compile(*e, space, order); }

}  // namespace jetprol
