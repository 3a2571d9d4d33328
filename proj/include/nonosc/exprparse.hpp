#pragma once

// Arithmetic expressions over named variables, parsed into exact rational
// functions.
//
// Grammar (whitespace insignificant):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?        exponent: constant non-negative integer
//   primary := NUMBER | IDENT | '(' expr ')'

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nonosc/algebra.hpp"

namespace nonosc {

struct ExprAst {
  enum class Kind { constant, variable, add, sub, mul, div, neg, pow };

  Kind kind = Kind::constant;
  Rational value;            // constant
  std::size_t variable = 0;  // variable: index into the declared list
  unsigned exponent = 0;     // pow
  std::vector<ExprAst> children;

  static ExprAst make_constant(Rational v);
  static ExprAst make_variable(std::size_t index);
  static ExprAst make_unary(Kind kind, ExprAst child);
  static ExprAst make_binary(Kind kind, ExprAst lhs, ExprAst rhs);
  static ExprAst make_pow(ExprAst base, unsigned exponent);
};

ExprAst parse_expression(std::string_view text, const std::vector<std::string>& vars);

/// Throws ConfigError when a division has an identically zero denominator.
RationalFunction lower_to_rational(const ExprAst& ast, const std::vector<std::string>& vars);

/// Parse and lower in one step.
RationalFunction parse_rational(std::string_view text, const std::vector<std::string>& vars);

/// Direct tree evaluation in floating point (independent of the lowering).
double evaluate(const ExprAst& ast, std::span<const double> x);

/// Fully parenthesized rendering; parses back to an equivalent tree.
std::string to_string(const ExprAst& ast, const std::vector<std::string>& vars);

}  // namespace nonosc
