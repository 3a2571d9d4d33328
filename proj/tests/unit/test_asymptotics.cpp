#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nonosc/asymptotics.hpp"
#include "nonosc/errors.hpp"
#include "nonosc/exprparse.hpp"

using namespace nonosc;

namespace {

const std::vector<std::string> xy{"x", "y"};

FunctionField field_of(const char* text) { return make_field(parse_rational(text, xy)); }

Trajectory run(const char* text, std::vector<double> x0, double r_limit,
               FlowDirection dir = FlowDirection::inward) {
  IntegrationOptions opts;
  opts.direction = dir;
  opts.r_limit = r_limit;
  return integrate_unit_gradient(field_of(text), x0, opts);
}

const Trajectory& radial() {
  static const Trajectory t = run("-(x^2+y^2)", {0.6, 0.8}, 1e-6);
  return t;
}
const Trajectory& anisotropic() {
  static const Trajectory t = run("-(x^2+2*y^2)", {1, 1}, 1e-6);
  return t;
}
const Trajectory& quartic() {
  static const Trajectory t = run("-(x^4+y^4)", {0.5, 0.5}, 1e-4);
  return t;
}
const Trajectory& inverse_square() {
  static const Trajectory t = run("-1/(x^2+y^2)", {1, 0}, 1e3, FlowDirection::outward);
  return t;
}

double matrix_gap(const SymMatrix& a, std::initializer_list<double> diag) {
  return distance(a, SymMatrix::diagonal(std::vector<double>(diag)));
}

}  // namespace

TEST_CASE("dyadic windows") {
  const auto ws = dyadic_windows(anisotropic(), 4);
  REQUIRE(ws.size() == 4);
  const double rf = anisotropic().samples.back().r;
  CHECK(ws.back().limit_index() == anisotropic().samples.size() - 1);
  CHECK(ws.back().r_lo == doctest::Approx(rf));
  CHECK(ws.back().r_hi == doctest::Approx(2 * rf));
  for (std::size_t k = 0; k < ws.size(); ++k) {
    CHECK(ws[k].size() >= 5);
    for (std::size_t i = ws[k].begin; i < ws[k].end; ++i) {
      CHECK(anisotropic().samples[i].r >= ws[k].r_lo * (1 - 1e-12));
      CHECK(anisotropic().samples[i].r < ws[k].r_hi * (1 + 1e-12));
    }
    if (k > 0) CHECK(ws[k].begin == ws[k - 1].end);
  }
  const auto out = dyadic_windows(inverse_square(), 3);
  REQUIRE(out.size() == 3);
  CHECK(out.back().r_hi == doctest::Approx(inverse_square().samples.back().r));
  CHECK(out.front().r_lo < out.back().r_lo);
}

TEST_CASE("secant limit") {
  auto s = estimate_secant_limit(radial());
  CHECK(std::abs(s.nu[0] - 0.6) <= 1e-8);
  CHECK(std::abs(s.nu[1] - 0.8) <= 1e-8);
  CHECK(s.spherical_tail_length <= 1e-9);

  s = estimate_secant_limit(anisotropic());
  CHECK(norm(subtract(s.nu, std::vector{1.0, 0.0})) <= 1e-4);
  CHECK(s.spherical_tail_length > 0.1);

  s = estimate_secant_limit(quartic());
  const double h = 1 / std::sqrt(2.0);
  CHECK(norm(subtract(s.nu, std::vector{h, h})) <= 1e-9);

  Trajectory shortened = radial();
  shortened.samples.resize(10);
  CHECK_THROWS_AS(estimate_secant_limit(shortened), DomainError);
}

TEST_CASE("exponent fits") {
  auto fit = estimate_exponents(radial());
  CHECK(std::abs(fit.m - 2) <= 1e-6);
  CHECK(std::abs(fit.a - 1) <= 1e-6);
  CHECK(fit.residual <= 1e-6);
  CHECK(fit.radial_slope_consistent);
  CHECK(fit.rational.numerator == 2);
  CHECK(fit.rational.denominator == 1);

  fit = estimate_exponents(quartic());
  CHECK(std::abs(fit.m - 4) <= 1e-6);
  CHECK(std::abs(fit.a - 0.5) <= 1e-6);

  fit = estimate_exponents(inverse_square());
  CHECK(fit.outward);
  CHECK(std::abs(fit.m - 2) <= 1e-6);
  CHECK(std::abs(fit.a - 1) <= 1e-6);
  CHECK(fit.radial_slope_expected == doctest::Approx(-3));
  CHECK(fit.radial_slope_consistent);

  fit = estimate_exponents(anisotropic());
  CHECK(std::abs(fit.m - 2) <= 1e-6);
  CHECK(std::abs(fit.a - 1) <= 1e-6);
  CHECK(fit.residual <= 1e-3);

  CHECK_THROWS_AS(estimate_exponents(radial(), 2), DomainError);
  Trajectory positive = radial();
  positive.samples.back().f_val = 1.0;
  CHECK_THROWS_AS(estimate_exponents(positive), DomainError);
}

TEST_CASE("nearest rational") {
  const auto r = nearest_rational(1.3334);
  CHECK(r.numerator == 4);
  CHECK(r.denominator == 3);
  CHECK(r.distance == doctest::Approx(0.0000667).epsilon(1e-2));
  CHECK(nearest_rational(-2.0).numerator == -2);
}

TEST_CASE("hessian direction limits") {
  auto h = estimate_hessian_direction_limit(anisotropic());
  CHECK(matrix_gap(h.direction, {-2 / std::sqrt(20.0), -4 / std::sqrt(20.0)}) <= 1e-10);
  CHECK(h.cauchy_gap <= 1e-12);

  h = estimate_hessian_direction_limit(quartic());
  CHECK(matrix_gap(h.direction, {-1 / std::sqrt(2.0), -1 / std::sqrt(2.0)}) <= 1e-9);
  CHECK(h.cauchy_gap <= 1e-10);

  h = estimate_hessian_direction_limit(inverse_square());
  CHECK(matrix_gap(h.direction, {-6 / std::sqrt(40.0), 2 / std::sqrt(40.0)}) <= 1e-6);
}

TEST_CASE("eigen direction check") {
  // Hs·ν_f = -2·(-ν) = 2ν: w tends to +ν for inward flows
  auto e = eigen_direction_check(radial());
  CHECK(e.final_residual <= 1e-12);
  CHECK(e.final_w_minus_nu <= 1e-12);
  CHECK(e.final_w_plus_nu == doctest::Approx(2.0));
  CHECK(!e.direction_sign_check);
  CHECK(e.estimate_sign_check);

  e = eigen_direction_check(anisotropic());
  CHECK(e.final_residual <= 1e-3);
  CHECK(e.final_w_minus_nu <= 1e-3);
  CHECK(e.estimate_sign_check);
  CHECK(e.residuals_non_increasing);

  e = eigen_direction_check(inverse_square());
  CHECK(e.final_residual <= 1e-12);
  CHECK(e.final_w_plus_nu <= 1e-12);
  CHECK(e.direction_sign_check);
  CHECK(e.estimate_sign_check);
}

TEST_CASE("estimate suite") {
  auto fit = estimate_exponents(radial());
  auto est = verify_estimates(radial(), fit);
  for (const auto& w : est.windows) {
    CHECK(w.grad_radial_ratio <= 1e-9);
    CHECK(*w.consequence1_ratio <= 1e-9);
    CHECK(*w.euler_like_residual <= 1e-9);
    CHECK(w.vca_value == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(*w.scaled_eigenvalue == doctest::Approx(-1.0).epsilon(1e-9));
  }
  CHECK(est.hypothesis_flag);

  fit = estimate_exponents(quartic());
  est = verify_estimates(quartic(), fit);
  CHECK(est.windows.back().vca_value == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(*est.windows.back().scaled_eigenvalue == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(est.hypothesis_flag);
  CHECK(est.hessian_slope == doctest::Approx(2.0).epsilon(1e-6));

  fit = estimate_exponents(anisotropic());
  est = verify_estimates(anisotropic(), fit);
  for (const auto& w : est.windows) {
    if (w.r <= 1e-4) CHECK(*w.consequence1_ratio <= 0.01);
  }
  CHECK(*est.windows.back().euler_like_residual <= 1e-6);
  CHECK(est.windows.back().vca_value == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(std::abs(est.vca_log_derivative) <= 1e-3);

  fit = estimate_exponents(inverse_square());
  est = verify_estimates(inverse_square(), fit);
  CHECK(est.q == doctest::Approx(-2.0));
  for (const auto& w : est.windows) {
    CHECK(w.grad_radial_ratio <= 1e-6);
    CHECK(*w.consequence1_ratio <= 1e-6);
    CHECK(*w.euler_like_residual <= 1e-6);
    CHECK(w.vca_value == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(*w.scaled_eigenvalue == doctest::Approx(-1.0).epsilon(1e-6));
  }
  CHECK(est.hypothesis_flag);

  // m <= 1 disables the Hessian estimate
  AsymptoticFit low = estimate_exponents(radial());
  low.m = 1.0;
  est = verify_estimates(radial(), low);
  CHECK(!est.consequence1_enabled);
  CHECK(!est.windows.back().consequence1_ratio);
}

TEST_CASE("Bochnak-Lojasiewicz ratios") {
  auto bl = bochnak_lojasiewicz_constant(radial());
  CHECK(bl.hessian_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bl.value_ratio == doctest::Approx(2.0).epsilon(1e-12));
  bl = bochnak_lojasiewicz_constant(anisotropic());
  CHECK(bl.hessian_ratio >= 0.5);
  bl = bochnak_lojasiewicz_constant(inverse_square());
  CHECK(bl.value_ratio == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("level gradient extrema") {
  const double eps = 1e-2;
  auto ext = level_gradient_extrema(field_of("-(x^2+y^2)"), -eps, 200, 1);
  CHECK(ext.min_grad == doctest::Approx(2 * std::sqrt(eps)).epsilon(1e-10));
  CHECK(ext.max_grad == doctest::Approx(2 * std::sqrt(eps)).epsilon(1e-10));

  ext = level_gradient_extrema(field_of("-(x^2+2*y^2)"), -eps, 200, 1);
  CHECK(ext.normalized_min == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(ext.normalized_max == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-6));
  CHECK(std::abs(ext.argmin[1]) <= 1e-3);
  CHECK(std::abs(ext.argmax[0]) <= 1e-3);

  // determinism
  const auto again = level_gradient_extrema(field_of("-(x^2+2*y^2)"), -eps, 200, 1);
  CHECK(again.min_grad == ext.min_grad);
  CHECK(again.max_grad == ext.max_grad);

  // quartic against a dense sampling oracle: t^4 (c^4 + s^4) = eps, |grad| = 4 t^3 sqrt(c^6 + s^6)
  ext = level_gradient_extrema(field_of("-(x^4+y^4)"), -eps, 500, 3);
  double lo = 1e300, hi = 0, lo_theta = 0, hi_theta = 0;
  for (int k = 0; k < 100000; ++k) {
    const double th = 2 * std::numbers::pi * k / 100000;
    const double c = std::cos(th), s = std::sin(th);
    const double t = std::pow(eps / (std::pow(c, 4) + std::pow(s, 4)), 0.25);
    const double g = 4 * t * t * t * std::sqrt(std::pow(c, 6) + std::pow(s, 6));
    if (g < lo) { lo = g; lo_theta = th; }
    if (g > hi) { hi = g; hi_theta = th; }
  }
  CHECK(ext.min_grad == doctest::Approx(lo).epsilon(1e-6));
  CHECK(ext.max_grad == doctest::Approx(hi).epsilon(1e-6));
  CHECK(std::abs(std::abs(std::cos(lo_theta)) - std::abs(std::sin(lo_theta))) <= 1e-3);  // diagonal
  CHECK(std::abs(std::sin(2 * hi_theta)) <= 1e-3);                                       // axis
  CHECK(std::abs(std::abs(ext.argmin[0]) - std::abs(ext.argmin[1])) <= 1e-4 * norm(ext.argmin));

  CHECK_THROWS_AS(level_gradient_extrema(field_of("x^2+y^2"), -eps, 50, 1), DomainError);
}

TEST_CASE("ridge valley residual") {
  const FunctionField f = field_of("-(x^2+2*y^2)");
  CHECK(ridge_valley_residual(f, std::vector{0.3, 0.0}) == 0.0);
  // a = (-2,-4), b = 2 Hs a = (8, 32): |a1 b2 - a2 b1| = |-64 + 32|
  CHECK(ridge_valley_residual(f, std::vector{1.0, 1.0}) == doctest::Approx(32.0));
  const double a2 = 4 + 16, b2 = 64 + 1024, ab = -16 - 128;
  CHECK(ridge_valley_residual(f, std::vector{1.0, 1.0}) == doctest::Approx(std::sqrt(a2 * b2 - ab * ab)));
  const FunctionField round = field_of("-(x^2+y^2)");
  CHECK(ridge_valley_residual(round, std::vector{0.7, -0.2}) == 0.0);
}

TEST_CASE("sphere point relation") {
  const double h = 1 / std::sqrt(2.0);
  const auto rel = sphere_point_relation(field_of("-(x^4+y^4)"), std::vector{h, h});
  CHECK(rel.degree == 4);
  CHECK(rel.rayleigh == doctest::Approx(-6.0).epsilon(1e-12));
  CHECK(rel.predicted == doctest::Approx(-6.0).epsilon(1e-12));
}

TEST_CASE("analyze_trajectory collects estimator errors") {
  const LimitReport full = analyze_trajectory(anisotropic());
  CHECK(full.errors.empty());
  REQUIRE(full.eigen_residual_final);
  CHECK(*full.eigen_residual_final <= 1e-3);
  CHECK(*full.eigenvalue_estimate == doctest::Approx(-2 / std::sqrt(20.0)).epsilon(1e-4));

  Trajectory shortened = anisotropic();
  shortened.samples.resize(12);
  const LimitReport partial = analyze_trajectory(shortened);
  CHECK(!partial.errors.empty());
  CHECK(!partial.secant);
}

TEST_CASE("scale equivariance") {
  const Trajectory base = run("-(x^2+2*y^2)", {1, 1}, 1e-6);
  const Trajectory scaled3 = run("-3*(x^2+2*y^2)", {1, 1}, 1e-6);
  const auto a = analyze_trajectory(base);
  const auto b = analyze_trajectory(scaled3);
  CHECK(norm(subtract(a.secant->nu, b.secant->nu)) <= 1e-8);
  CHECK(std::abs(a.fit->m - b.fit->m) <= 1e-8);
  CHECK(std::abs(b.fit->a / a.fit->a - 3) <= 1e-8);
  CHECK(distance(a.hessian->direction, b.hessian->direction) <= 1e-8);
  CHECK(std::abs(*a.eigen_residual_final - *b.eigen_residual_final) <= 1e-8);
}
