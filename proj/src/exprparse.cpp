#include "nonosc/exprparse.hpp"

#include <cctype>
#include <cmath>
#include <optional>

#include "nonosc/errors.hpp"

namespace nonosc {

namespace {

constexpr unsigned kMaxExponent = 4096;

enum class TokenKind { number, identifier, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
  TokenKind kind;
  std::size_t offset;
  std::string_view text;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) return {TokenKind::end, start, {}};
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(start);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      return {TokenKind::identifier, start, text_.substr(start, pos_ - start)};
    }
    ++pos_;
    switch (c) {
      case '+': return {TokenKind::plus, start, text_.substr(start, 1)};
      case '-': return {TokenKind::minus, start, text_.substr(start, 1)};
      case '*': return {TokenKind::star, start, text_.substr(start, 1)};
      case '/': return {TokenKind::slash, start, text_.substr(start, 1)};
      case '^': return {TokenKind::caret, start, text_.substr(start, 1)};
      case '(': return {TokenKind::lparen, start, text_.substr(start, 1)};
      case ')': return {TokenKind::rparen, start, text_.substr(start, 1)};
      default: throw ParseError(std::string("unexpected character '") + c + "'", start);
    }
  }

 private:
  Token number(std::size_t start) {
    auto digits = [&] {
      const std::size_t from = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      return pos_ - from;
    };
    std::size_t count = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) throw ParseError("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw ParseError("malformed exponent in number", mark);
    }
    return {TokenKind::number, start, text_.substr(start, pos_ - start)};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

/// Exact value of a decimal literal such as "0.25" or "1.5e-3".
Rational literal_value(std::string_view text) {
  std::string mantissa;
  long scale = 0;
  std::size_t i = 0;
  bool after_point = false;
  for (; i < text.size() && text[i] != 'e' && text[i] != 'E'; ++i) {
    if (text[i] == '.') {
      after_point = true;
      continue;
    }
    mantissa += text[i];
    if (after_point) --scale;
  }
  if (i < text.size()) {
    const std::string exp_text(text.substr(i + 1));
    if (exp_text.size() > 6) throw ConfigError("decimal exponent out of range in '" + std::string(text) + "'");
    scale += std::stol(exp_text);
  }
  Rational value(mpz_class(mantissa.empty() ? std::string("0") : mantissa, 10));
  mpz_class ten_power;
  mpz_ui_pow_ui(ten_power.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(scale)));
  if (scale >= 0) {
    value *= ten_power;
  } else {
    value /= ten_power;
  }
  value.canonicalize();
  return value;
}

/// Exact value of a variable-free subtree; nullopt when it has variables.
std::optional<Rational> constant_value(const ExprAst& ast) {
  using K = ExprAst::Kind;
  switch (ast.kind) {
    case K::constant: return ast.value;
    case K::variable: return std::nullopt;
    case K::neg: {
      auto v = constant_value(ast.children[0]);
      if (!v) return std::nullopt;
      return Rational(-*v);
    }
    case K::pow: {
      auto v = constant_value(ast.children[0]);
      if (!v) return std::nullopt;
      Rational r(1);
      for (unsigned k = 0; k < ast.exponent; ++k) r *= *v;
      return r;
    }
    default: break;
  }
  auto a = constant_value(ast.children[0]);
  auto b = constant_value(ast.children[1]);
  if (!a || !b) return std::nullopt;
  switch (ast.kind) {
    case K::add: return Rational(*a + *b);
    case K::sub: return Rational(*a - *b);
    case K::mul: return Rational(*a * *b);
    case K::div:
      if (*b == 0) return std::nullopt;
      return Rational(*a / *b);
    default: return std::nullopt;
  }
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars) : lexer_(text), vars_(vars) { advance(); }

  ExprAst parse() {
    ExprAst e = expr();
    if (current_.kind != TokenKind::end) unexpected();
    return e;
  }

 private:
  void advance() { current_ = lexer_.next(); }

  [[noreturn]] void unexpected() const {
    if (current_.kind == TokenKind::end) throw ParseError("syntax error: unexpected end of input", current_.offset);
    throw ParseError("syntax error: unexpected '" + std::string(current_.text) + "'", current_.offset);
  }

  ExprAst expr() {
    ExprAst lhs = term();
    while (current_.kind == TokenKind::plus || current_.kind == TokenKind::minus) {
      const auto kind = current_.kind == TokenKind::plus ? ExprAst::Kind::add : ExprAst::Kind::sub;
      advance();
      lhs = ExprAst::make_binary(kind, std::move(lhs), term());
    }
    return lhs;
  }

  ExprAst term() {
    ExprAst lhs = unary();
    while (current_.kind == TokenKind::star || current_.kind == TokenKind::slash) {
      const auto kind = current_.kind == TokenKind::star ? ExprAst::Kind::mul : ExprAst::Kind::div;
      advance();
      lhs = ExprAst::make_binary(kind, std::move(lhs), unary());
    }
    return lhs;
  }

  ExprAst unary() {
    if (current_.kind == TokenKind::minus) {
      advance();
      return ExprAst::make_unary(ExprAst::Kind::neg, unary());
    }
    if (current_.kind == TokenKind::plus) {
      advance();
      return unary();
    }
    return power();
  }

  ExprAst power() {
    ExprAst base = primary();
    if (current_.kind != TokenKind::caret) return base;
    advance();
    const std::size_t at = current_.offset;
    const ExprAst exponent = unary();
    const auto value = constant_value(exponent);
    if (!value) throw ParseError("exponent must be a constant non-negative integer", at);
    if (*value < 0) throw ParseError("negative exponent", at);
    if (value->get_den() != 1) throw ParseError("fractional exponent", at);
    if (*value > kMaxExponent) throw ParseError("exponent too large", at);
    return ExprAst::make_pow(std::move(base), static_cast<unsigned>(value->get_num().get_ui()));
  }

  ExprAst primary() {
    switch (current_.kind) {
      case TokenKind::number: {
        ExprAst e = ExprAst::make_constant(literal_value(current_.text));
        advance();
        return e;
      }
      case TokenKind::identifier: {
        for (std::size_t i = 0; i < vars_.size(); ++i) {
          if (vars_[i] == current_.text) {
            advance();
            return ExprAst::make_variable(i);
          }
        }
        throw ParseError("unknown identifier '" + std::string(current_.text) + "'", current_.offset);
      }
      case TokenKind::lparen: {
        advance();
        ExprAst e = expr();
        if (current_.kind != TokenKind::rparen) unexpected();
        advance();
        return e;
      }
      default: unexpected();
    }
  }

  Lexer lexer_;
  const std::vector<std::string>& vars_;
  Token current_{TokenKind::end, 0, {}};
};

}  // namespace

ExprAst ExprAst::make_constant(Rational v) {
  ExprAst e;
  e.kind = Kind::constant;
  e.value = std::move(v);
  return e;
}

ExprAst ExprAst::make_variable(std::size_t index) {
  ExprAst e;
  e.kind = Kind::variable;
  e.variable = index;
  return e;
}

ExprAst ExprAst::make_unary(Kind kind, ExprAst child) {
  ExprAst e;
  e.kind = kind;
  e.children.push_back(std::move(child));
  return e;
}

ExprAst ExprAst::make_binary(Kind kind, ExprAst lhs, ExprAst rhs) {
  ExprAst e;
  e.kind = kind;
  e.children.push_back(std::move(lhs));
  e.children.push_back(std::move(rhs));
  return e;
}

ExprAst ExprAst::make_pow(ExprAst base, unsigned exponent) {
  ExprAst e = make_unary(Kind::pow, std::move(base));
  e.exponent = exponent;
  return e;
}

ExprAst parse_expression(std::string_view text, const std::vector<std::string>& vars) {
  bool blank = true;
  for (char c : text) blank = blank && std::isspace(static_cast<unsigned char>(c));
  if (blank) throw ParseError("empty expression", 0);
  return Parser(text, vars).parse();
}

RationalFunction lower_to_rational(const ExprAst& ast, const std::vector<std::string>& vars) {
  const std::size_t n = vars.size();
  using K = ExprAst::Kind;
  switch (ast.kind) {
    case K::constant: return RationalFunction(Polynomial::constant(n, ast.value));
    case K::variable:
      if (ast.variable >= n) throw ConfigError("variable index outside the declared list");
      return RationalFunction(Polynomial::variable(n, ast.variable));
    case K::neg: return -lower_to_rational(ast.children[0], vars);
    case K::pow: return lower_to_rational(ast.children[0], vars).pow(ast.exponent);
    case K::add: return lower_to_rational(ast.children[0], vars) + lower_to_rational(ast.children[1], vars);
    case K::sub: return lower_to_rational(ast.children[0], vars) - lower_to_rational(ast.children[1], vars);
    case K::mul: return lower_to_rational(ast.children[0], vars) * lower_to_rational(ast.children[1], vars);
    case K::div: return lower_to_rational(ast.children[0], vars) / lower_to_rational(ast.children[1], vars);
  }
  throw ConfigError("corrupt expression tree");
}

RationalFunction parse_rational(std::string_view text, const std::vector<std::string>& vars) {
  return lower_to_rational(parse_expression(text, vars), vars);
}

double evaluate(const ExprAst& ast, std::span<const double> x) {
  using K = ExprAst::Kind;
  switch (ast.kind) {
    case K::constant: return ast.value.get_d();
    case K::variable: return x[ast.variable];
    case K::neg: return -evaluate(ast.children[0], x);
    case K::pow: return std::pow(evaluate(ast.children[0], x), static_cast<double>(ast.exponent));
    case K::add: return evaluate(ast.children[0], x) + evaluate(ast.children[1], x);
    case K::sub: return evaluate(ast.children[0], x) - evaluate(ast.children[1], x);
    case K::mul: return evaluate(ast.children[0], x) * evaluate(ast.children[1], x);
    case K::div: return evaluate(ast.children[0], x) / evaluate(ast.children[1], x);
  }
  return 0.0;
}

std::string to_string(const ExprAst& ast, const std::vector<std::string>& vars) {
  using K = ExprAst::Kind;
  auto binary = [&](const char* op) {
    return "(" + to_string(ast.children[0], vars) + " " + op + " " + to_string(ast.children[1], vars) + ")";
  };
  switch (ast.kind) {
    case K::constant: return ast.value < 0 ? "(" + ast.value.get_str() + ")" : ast.value.get_str();
    case K::variable: return ast.variable < vars.size() ? vars[ast.variable] : "x" + std::to_string(ast.variable + 1);
    case K::neg: return "(-" + to_string(ast.children[0], vars) + ")";
    case K::pow: return "(" + to_string(ast.children[0], vars) + "^" + std::to_string(ast.exponent) + ")";
    case K::add: return binary("+");
    case K::sub: return binary("-");
    case K::mul: return binary("*");
    case K::div: return binary("/");
  }
  return {};
}

}  // namespace nonosc
