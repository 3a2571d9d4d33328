#include "nonosc/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nonosc/errors.hpp"

namespace nonosc {

namespace {

double ipow(double base, unsigned e) {
  double result = 1.0;
  while (e != 0) {
    if (e & 1U) result *= base;
    base *= base;
    e >>= 1U;
  }
  return result;
}

std::string variable_name(const std::vector<std::string>& vars, std::size_t i) {
  if (i < vars.size()) return vars[i];
  return "x" + std::to_string(i + 1);
}

}  // namespace

unsigned total_degree(const Exponent& e) { return std::accumulate(e.begin(), e.end(), 0U); }

bool GrlexLess::operator()(const Exponent& a, const Exponent& b) const {
  const unsigned da = total_degree(a);
  const unsigned db = total_degree(b);
  if (da != db) return da < db;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// ---------------------------------------------------------------------------
// Polynomial

Polynomial Polynomial::constant(std::size_t dimension, const Rational& c) {
  Polynomial p(dimension);
  p.add_term(Exponent(dimension, 0), c);
  return p;
}

Polynomial Polynomial::variable(std::size_t dimension, std::size_t index) {
  if (index >= dimension) throw ConfigError("variable index out of range");
  Exponent e(dimension, 0);
  e[index] = 1;
  return monomial(std::move(e), Rational(1));
}

Polynomial Polynomial::monomial(Exponent exponent, const Rational& c) {
  Polynomial p(exponent.size());
  p.add_term(exponent, c);
  return p;
}

bool Polynomial::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && total_degree(terms_.begin()->first) == 0);
}

int Polynomial::degree() const {
  if (terms_.empty()) return -1;
  return static_cast<int>(total_degree(terms_.rbegin()->first));
}

int Polynomial::min_degree() const {
  if (terms_.empty()) return -1;
  return static_cast<int>(total_degree(terms_.begin()->first));
}

bool Polynomial::is_homogeneous() const { return degree() == min_degree(); }

const Rational& Polynomial::leading_coefficient() const {
  if (terms_.empty()) throw DomainError("leading coefficient of the zero polynomial");
  return terms_.rbegin()->second;
}

Rational Polynomial::constant_term() const {
  auto it = terms_.find(Exponent(dim_, 0));
  return it == terms_.end() ? Rational(0) : it->second;
}

Exponent Polynomial::monomial_content() const {
  Exponent content(dim_, 0);
  if (terms_.empty()) return content;
  content = terms_.begin()->first;
  for (const auto& [e, c] : terms_) {
    for (std::size_t i = 0; i < dim_; ++i) content[i] = std::min(content[i], e[i]);
  }
  return content;
}

Polynomial Polynomial::divide_monomial(const Exponent& d) const {
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) {
    Exponent q = e;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (q[i] < d[i]) throw DomainError("monomial does not divide polynomial");
      q[i] -= d[i];
    }
    out.terms_.emplace(std::move(q), c);
  }
  return out;
}

Polynomial Polynomial::derivative(std::size_t index) const {
  if (index >= dim_) throw ConfigError("derivative index out of range");
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) {
    if (e[index] == 0) continue;
    Exponent d = e;
    d[index] -= 1;
    out.terms_.emplace(std::move(d), c * e[index]);
  }
  return out;
}

Polynomial Polynomial::pow(unsigned k) const {
  Polynomial result = constant(dim_, Rational(1));
  Polynomial base = *this;
  while (k != 0) {
    if (k & 1U) result *= base;
    k >>= 1U;
    if (k != 0) base *= base;
  }
  return result;
}

Polynomial Polynomial::scaled(const Rational& c) const {
  Polynomial out(dim_);
  if (c == 0) return out;
  for (const auto& [e, v] : terms_) out.terms_.emplace(e, v * c);
  return out;
}

void Polynomial::add_term(const Exponent& e, const Rational& c) {
  if (e.size() != dim_) throw ConfigError("exponent length does not match dimension");
  if (c == 0) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

double Polynomial::evaluate(std::span<const double> x) const { return CompiledPolynomial(*this).evaluate(x); }

void Polynomial::check_dimension(const Polynomial& other) const {
  if (other.dim_ != dim_) throw ConfigError("polynomial dimension mismatch");
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  check_dimension(other);
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  check_dimension(other);
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& other) {
  check_dimension(other);
  Polynomial out(dim_);
  Exponent e(dim_);
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : other.terms_) {
      for (std::size_t i = 0; i < dim_; ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  }
  *this = std::move(out);
  return *this;
}

Polynomial Polynomial::operator-() const { return scaled(Rational(-1)); }

bool operator==(const Polynomial& a, const Polynomial& b) { return a.dim_ == b.dim_ && a.terms_ == b.terms_; }

// ---------------------------------------------------------------------------
// RationalFunction

RationalFunction::RationalFunction(std::size_t dimension)
    : num_(dimension), den_(Polynomial::constant(dimension, Rational(1))) {}

RationalFunction::RationalFunction(Polynomial numerator)
    : num_(std::move(numerator)), den_(Polynomial::constant(num_.dimension(), Rational(1))) {}

RationalFunction::RationalFunction(Polynomial numerator, Polynomial denominator)
    : num_(std::move(numerator)), den_(std::move(denominator)) {
  canonicalize();
}

void RationalFunction::canonicalize() {
  if (num_.dimension() != den_.dimension()) throw ConfigError("rational function dimension mismatch");
  if (den_.is_zero()) throw ConfigError("zero denominator");
  const std::size_t n = num_.dimension();
  if (num_.is_zero()) {
    den_ = Polynomial::constant(n, Rational(1));
    return;
  }
  Exponent common = num_.monomial_content();
  const Exponent den_content = den_.monomial_content();
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    common[i] = std::min(common[i], den_content[i]);
    any = any || common[i] != 0;
  }
  if (any) {
    num_ = num_.divide_monomial(common);
    den_ = den_.divide_monomial(common);
  }
  if (den_.is_constant()) {
    num_ = num_.scaled(1 / den_.constant_term());
    den_ = Polynomial::constant(n, Rational(1));
    return;
  }
  if (den_.leading_coefficient() < 0) {
    num_ = -num_;
    den_ = -den_;
  }
}

RationalFunction RationalFunction::derivative(std::size_t index) const {
  if (is_polynomial()) return RationalFunction(num_.derivative(index));
  const Polynomial dq = den_.derivative(index);
  if (dq.is_zero()) return RationalFunction(num_.derivative(index), den_);
  return RationalFunction(num_.derivative(index) * den_ - num_ * dq, den_ * den_);
}

RationalFunction RationalFunction::pow(unsigned k) const {
  if (is_polynomial()) return RationalFunction(num_.pow(k));
  return RationalFunction(num_.pow(k), den_.pow(k));
}

double RationalFunction::evaluate(std::span<const double> x) const { return CompiledRational(*this).evaluate(x); }

RationalFunction& RationalFunction::operator+=(const RationalFunction& other) {
  if (den_ == other.den_) {
    *this = RationalFunction(num_ + other.num_, den_);
  } else {
    *this = RationalFunction(num_ * other.den_ + other.num_ * den_, den_ * other.den_);
  }
  return *this;
}

RationalFunction& RationalFunction::operator-=(const RationalFunction& other) { return *this += -other; }

RationalFunction& RationalFunction::operator*=(const RationalFunction& other) {
  *this = RationalFunction(num_ * other.num_, den_ * other.den_);
  return *this;
}

RationalFunction& RationalFunction::operator/=(const RationalFunction& other) {
  if (other.is_zero()) throw ConfigError("zero denominator");
  *this = RationalFunction(num_ * other.den_, den_ * other.num_);
  return *this;
}

RationalFunction RationalFunction::operator-() const {
  RationalFunction out = *this;
  out.num_ = -out.num_;
  return out;
}

// ---------------------------------------------------------------------------
// Compiled evaluation

CompiledPolynomial::CompiledPolynomial(const Polynomial& p) : dim_(p.dimension()) {
  coefficients_.reserve(p.terms().size());
  exponents_.reserve(p.terms().size() * dim_);
  for (const auto& [e, c] : p.terms()) {
    coefficients_.push_back(c.get_d());
    exponents_.insert(exponents_.end(), e.begin(), e.end());
  }
}

double CompiledPolynomial::evaluate(std::span<const double> x) const {
  if (x.size() != dim_) throw ConfigError("point dimension does not match polynomial");
  double sum = 0.0;
  const unsigned* e = exponents_.data();
  for (double c : coefficients_) {
    double term = c;
    for (std::size_t i = 0; i < dim_; ++i, ++e) {
      if (*e != 0) term *= ipow(x[i], *e);
    }
    sum += term;
  }
  return sum;
}

double CompiledPolynomial::absolute_evaluate(std::span<const double> x) const {
  if (x.size() != dim_) throw ConfigError("point dimension does not match polynomial");
  double sum = 0.0;
  const unsigned* e = exponents_.data();
  for (double c : coefficients_) {
    double term = std::abs(c);
    for (std::size_t i = 0; i < dim_; ++i, ++e) {
      if (*e != 0) term *= ipow(std::abs(x[i]), *e);
    }
    sum += term;
  }
  return sum;
}

CompiledRational::CompiledRational(const RationalFunction& rf)
    : num_(rf.numerator()), den_(rf.denominator()), polynomial_(rf.is_polynomial()) {}

double CompiledRational::evaluate(std::span<const double> x) const {
  const double p = num_.evaluate(x);
  if (polynomial_) return p;
  const double q = den_.evaluate(x);
  const double value = p / q;
  if (q == 0.0 || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "denominator vanishes at (";
    for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
    msg << ")";
    throw PoleError(msg.str(), std::vector<double>(x.begin(), x.end()));
  }
  return value;
}

// ---------------------------------------------------------------------------
// Derivatives and decompositions

std::vector<RationalFunction> gradient(const RationalFunction& f) {
  std::vector<RationalFunction> g;
  g.reserve(f.dimension());
  for (std::size_t i = 0; i < f.dimension(); ++i) g.push_back(f.derivative(i));
  return g;
}

SymmetricArray<RationalFunction> hessian(const RationalFunction& f) {
  const std::size_t n = f.dimension();
  SymmetricArray<RationalFunction> h(n, RationalFunction(n));
  for (std::size_t i = 0; i < n; ++i) {
    const RationalFunction di = f.derivative(i);
    for (std::size_t j = i; j < n; ++j) h(i, j) = di.derivative(j);
  }
  return h;
}

HomogeneousDecomposition homogeneous_decomposition(const Polynomial& p) {
  if (p.is_zero()) throw DomainError("homogeneous decomposition of the zero polynomial");
  std::map<unsigned, Polynomial> by_degree;
  for (const auto& [e, c] : p.terms()) {
    auto [it, inserted] = by_degree.try_emplace(total_degree(e), p.dimension());
    it->second.add_term(e, c);
  }
  HomogeneousDecomposition out;
  for (auto& [k, part] : by_degree) out.parts.push_back({k, std::move(part)});
  return out;
}

EulerResiduals euler_identity_residuals(const Polynomial& f_k, unsigned k, std::span<const double> x) {
  if (k < 2) throw DomainError("Euler identities require degree k >= 2");
  if (f_k.is_zero() || !f_k.is_homogeneous() || static_cast<unsigned>(f_k.degree()) != k) {
    throw DomainError("euler_identity_residuals: input is not homogeneous of degree " + std::to_string(k));
  }
  const std::size_t n = f_k.dimension();
  if (x.size() != n) throw ConfigError("point dimension does not match polynomial");

  const CompiledPolynomial f(f_k);
  const double value = f.evaluate(x);
  const double abs_value = f.absolute_evaluate(x);

  double radial = 0.0;
  double quadratic = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Polynomial di = f_k.derivative(i);
    radial += CompiledPolynomial(di).evaluate(x) * x[i];
    for (std::size_t j = 0; j < n; ++j) {
      quadratic += CompiledPolynomial(di.derivative(j)).evaluate(x) * x[i] * x[j];
    }
  }
  const double kd = static_cast<double>(k);
  return EulerResiduals{std::abs(kd * value - radial), std::abs(kd * (kd - 1) * value - quadratic), kd * abs_value,
                        kd * (kd - 1) * abs_value};
}

Polynomial substitute_linear(const Polynomial& p, const std::vector<std::vector<Rational>>& m) {
  const std::size_t n = p.dimension();
  if (m.size() != n) throw ConfigError("substitution matrix has wrong number of rows");
  const std::size_t cols = n == 0 ? 0 : m.front().size();
  std::vector<Polynomial> linear;
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i].size() != cols) throw ConfigError("substitution matrix is ragged");
    Polynomial l(cols);
    for (std::size_t j = 0; j < cols; ++j) l += Polynomial::variable(cols, j).scaled(m[i][j]);
    linear.push_back(std::move(l));
  }
  // powers[i][e] = linear[i]^e, filled lazily
  std::vector<std::vector<Polynomial>> powers(n);
  auto power = [&](std::size_t i, unsigned e) -> const Polynomial& {
    auto& cache = powers[i];
    if (cache.empty()) cache.push_back(Polynomial::constant(cols, Rational(1)));
    while (cache.size() <= e) cache.push_back(cache.back() * linear[i]);
    return cache[e];
  };
  Polynomial out(cols);
  for (const auto& [e, c] : p.terms()) {
    Polynomial term = Polynomial::constant(cols, c);
    for (std::size_t i = 0; i < n; ++i) {
      if (e[i] != 0) term *= power(i, e[i]);
    }
    out += term;
  }
  return out;
}

RationalFunction substitute_linear(const RationalFunction& f, const std::vector<std::vector<Rational>>& m) {
  return RationalFunction(substitute_linear(f.numerator(), m), substitute_linear(f.denominator(), m));
}

// ---------------------------------------------------------------------------
// Printing

std::string to_string(const Polynomial& p, const std::vector<std::string>& vars) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const Exponent& e = it->first;
    const Rational& c = it->second;
    const bool negative = c < 0;
    const Rational magnitude = negative ? Rational(-c) : c;
    if (first) {
      if (negative) out += "-";
    } else {
      out += negative ? " - " : " + ";
    }
    first = false;

    std::string mono;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += variable_name(vars, i);
      if (e[i] > 1) mono += "^" + std::to_string(e[i]);
    }
    if (mono.empty()) {
      out += magnitude.get_str();
    } else if (magnitude == 1) {
      out += mono;
    } else {
      out += magnitude.get_str() + "*" + mono;
    }
  }
  return out;
}

std::string to_string(const RationalFunction& f, const std::vector<std::string>& vars) {
  if (f.is_polynomial()) return to_string(f.numerator(), vars);
  return "(" + to_string(f.numerator(), vars) + ")/(" + to_string(f.denominator(), vars) + ")";
}

}  // namespace nonosc
