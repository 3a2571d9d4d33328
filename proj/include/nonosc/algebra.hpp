#pragma once

// Exact sparse multivariate polynomials and rational functions over Q.

#include <gmpxx.h>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nonosc {

using Rational = mpq_class;
using Exponent = std::vector<unsigned>;

unsigned total_degree(const Exponent& e);

/// Graded lexicographic order: total degree first, ties broken
/// lexicographically (x_1 most significant).
struct GrlexLess {
  bool operator()(const Exponent& a, const Exponent& b) const;
};

class Polynomial {
 public:
  using TermMap = std::map<Exponent, Rational, GrlexLess>;

  explicit Polynomial(std::size_t dimension = 0) : dim_(dimension) {}

  static Polynomial constant(std::size_t dimension, const Rational& c);
  static Polynomial variable(std::size_t dimension, std::size_t index);
  static Polynomial monomial(Exponent exponent, const Rational& c);

  std::size_t dimension() const { return dim_; }
  const TermMap& terms() const { return terms_; }

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  /// -1 for the zero polynomial.
  int degree() const;
  /// Lowest total degree among the terms; -1 for the zero polynomial.
  int min_degree() const;
  bool is_homogeneous() const;

  /// Coefficient of the largest monomial in grlex order.
  const Rational& leading_coefficient() const;
  /// Constant term value (zero if absent).
  Rational constant_term() const;

  /// Componentwise minimum of the exponents of all terms.
  Exponent monomial_content() const;
  /// Exact division by x^e; every term must be divisible.
  Polynomial divide_monomial(const Exponent& e) const;

  Polynomial derivative(std::size_t index) const;
  Polynomial pow(unsigned k) const;
  Polynomial scaled(const Rational& c) const;

  /// Adds c·x^e, dropping the key when the coefficient cancels.
  void add_term(const Exponent& e, const Rational& c);

  double evaluate(std::span<const double> x) const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(const Polynomial& other);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, const Polynomial& b) { return a *= b; }
  Polynomial operator-() const;

  friend bool operator==(const Polynomial& a, const Polynomial& b);

 private:
  void check_dimension(const Polynomial& other) const;

  std::size_t dim_;
  TermMap terms_;
};

/// P/Q with Q nonzero, monomial content cancelled and Q's leading
/// coefficient positive. A constant denominator is folded into P.
class RationalFunction {
 public:
  explicit RationalFunction(std::size_t dimension = 0);
  RationalFunction(Polynomial numerator);  // NOLINT(google-explicit-constructor)
  RationalFunction(Polynomial numerator, Polynomial denominator);

  std::size_t dimension() const { return num_.dimension(); }
  const Polynomial& numerator() const { return num_; }
  const Polynomial& denominator() const { return den_; }

  bool is_polynomial() const { return den_.is_constant(); }
  bool is_zero() const { return num_.is_zero(); }
  bool is_constant() const { return num_.is_constant() && den_.is_constant(); }

  RationalFunction derivative(std::size_t index) const;
  RationalFunction pow(unsigned k) const;

  double evaluate(std::span<const double> x) const;

  RationalFunction& operator+=(const RationalFunction& other);
  RationalFunction& operator-=(const RationalFunction& other);
  RationalFunction& operator*=(const RationalFunction& other);
  RationalFunction& operator/=(const RationalFunction& other);
  friend RationalFunction operator+(RationalFunction a, const RationalFunction& b) { return a += b; }
  friend RationalFunction operator-(RationalFunction a, const RationalFunction& b) { return a -= b; }
  friend RationalFunction operator*(RationalFunction a, const RationalFunction& b) { return a *= b; }
  friend RationalFunction operator/(RationalFunction a, const RationalFunction& b) { return a /= b; }
  RationalFunction operator-() const;

  friend bool operator==(const RationalFunction& a, const RationalFunction& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }

 private:
  void canonicalize();

  Polynomial num_;
  Polynomial den_;
};

/// Floating-point image of a polynomial: coefficients converted once.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const Polynomial& p);

  double evaluate(std::span<const double> x) const;
  /// Sum of |c_a x^a|; the natural scale for rounding error of evaluate().
  double absolute_evaluate(std::span<const double> x) const;
  std::size_t dimension() const { return dim_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> coefficients_;
  std::vector<unsigned> exponents_;  // row-major, dim_ per term
};

class CompiledRational {
 public:
  CompiledRational() = default;
  explicit CompiledRational(const RationalFunction& rf);

  /// Throws PoleError when the denominator vanishes at x.
  double evaluate(std::span<const double> x) const;

 private:
  CompiledPolynomial num_;
  CompiledPolynomial den_;
  bool polynomial_ = true;
};

/// Symmetric n×n array with single (upper-triangular) storage, so that
/// (i,j) and (j,i) designate the same element.
template <typename T>
class SymmetricArray {
 public:
  SymmetricArray() = default;
  explicit SymmetricArray(std::size_t n, const T& fill = T()) : n_(n), data_(n * (n + 1) / 2, fill) {}

  std::size_t dimension() const { return n_; }
  static std::size_t packed_index(std::size_t n, std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i + 1) / 2 + j;
  }
  T& operator()(std::size_t i, std::size_t j) { return data_[packed_index(n_, i, j)]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[packed_index(n_, i, j)]; }
  const std::vector<T>& packed() const { return data_; }
  std::vector<T>& packed() { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

std::vector<RationalFunction> gradient(const RationalFunction& f);
/// Mixed partials are computed once per unordered pair.
SymmetricArray<RationalFunction> hessian(const RationalFunction& f);

struct HomogeneousPart {
  unsigned degree;
  Polynomial part;
};

struct HomogeneousDecomposition {
  std::vector<HomogeneousPart> parts;  // ascending degree, all nonzero

  unsigned leading_degree() const { return parts.front().degree; }
  const Polynomial& leading_part() const { return parts.front().part; }
};

HomogeneousDecomposition homogeneous_decomposition(const Polynomial& p);

struct EulerResiduals {
  double first;         // |k f_k(x) - <grad f_k(x), x>|
  double second;        // |k(k-1) f_k(x) - <Hs(f_k)(x) x, x>|
  double first_scale;   // k * sum |c_a x^a|
  double second_scale;  // k(k-1) * sum |c_a x^a|

  double first_relative() const { return first_scale > 0 ? first / first_scale : first; }
  double second_relative() const { return second_scale > 0 ? second / second_scale : second; }
};

/// Euler identities for a homogeneous polynomial of degree k >= 2.
EulerResiduals euler_identity_residuals(const Polynomial& f_k, unsigned k, std::span<const double> x);

/// p(M·y): substitutes x_i = sum_j M[i][j] y_j.
Polynomial substitute_linear(const Polynomial& p, const std::vector<std::vector<Rational>>& m);
RationalFunction substitute_linear(const RationalFunction& f, const std::vector<std::vector<Rational>>& m);

std::string to_string(const Polynomial& p, const std::vector<std::string>& vars);
std::string to_string(const RationalFunction& f, const std::vector<std::string>& vars);

}  // namespace nonosc
