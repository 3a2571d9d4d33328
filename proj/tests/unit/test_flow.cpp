#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nonosc/errors.hpp"
#include "nonosc/exprparse.hpp"
#include "nonosc/flow.hpp"

using namespace nonosc;

namespace {

const std::vector<std::string> xy{"x", "y"};

FunctionField field_of(const char* text) { return make_field(parse_rational(text, xy)); }

Trajectory inward(const char* text, std::vector<double> x0, double r_limit, double rel_tol = 1e-10) {
  IntegrationOptions opts;
  opts.r_limit = r_limit;
  opts.rel_tol = rel_tol;
  return integrate_unit_gradient(field_of(text), x0, opts);
}

}  // namespace

TEST_CASE("make_field") {
  const FunctionField f = field_of("-(x^2+y^2)");
  CHECK(f.gradient()[0] == parse_rational("-2*x", xy));
  CHECK(f.gradient()[1] == parse_rational("-2*y", xy));
  const SymMatrix h = f.hessian_at(std::vector{0.3, 0.4});
  CHECK(h(0, 0) == -2.0);
  CHECK(h(1, 1) == -2.0);
  CHECK(h(0, 1) == 0.0);

  const FunctionField g = field_of("-1/(x^2+y^2)");
  CHECK(g.gradient()[0] == parse_rational("2*x/(x^2+y^2)^2", xy));
  CHECK(g.gradient()[1] == parse_rational("2*y/(x^2+y^2)^2", xy));

  CHECK_THROWS_AS(field_of("5"), ConfigError);
}

TEST_CASE("radial quadratic flow is a straight segment") {
  const Trajectory t = inward("-(x^2+y^2)", {0.6, 0.8}, 1e-6);
  REQUIRE(t.termination == Termination::reached_r_limit);
  CHECK(!t.flipped);
  const auto& last = t.samples.back();
  CHECK(std::abs(last.r - 1e-6) <= 1e-15);
  CHECK(std::abs(last.s - (1 - 1e-6)) <= 1e-6);
  for (const auto& s : t.samples) {
    CHECK(std::abs(s.x[0] / s.r - 0.6) <= 1e-9);
    CHECK(std::abs(s.x[1] / s.r - 0.8) <= 1e-9);
  }
  CHECK(t.tail_begin == 0);
}

TEST_CASE("sample invariants and f increases") {
  const Trajectory t = inward("-(x^2+2*y^2)", {1, 1}, 1e-6);
  REQUIRE(t.termination == Termination::reached_r_limit);
  for (std::size_t k = 0; k < t.samples.size(); ++k) {
    const auto& s = t.samples[k];
    CHECK(s.grad_norm > 0);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(s.unit_grad[i] - s.grad[i] / s.grad_norm) <= 1e-14);
    const double split = s.dr_f * s.dr_f + dot(s.tangential_grad, s.tangential_grad);
    CHECK(std::abs(split - s.grad_norm * s.grad_norm) <= 1e-10 * s.grad_norm * s.grad_norm);
    if (k > 0) {
      CHECK(s.f_val > t.samples[k - 1].f_val);
      CHECK(s.r < t.samples[k - 1].r);
      CHECK(s.r >= t.samples[k - 1].r / 1.05 * (1 - 1e-12));
    }
  }
  // exact orbit of the gradient flow: y = x^2 from (1,1)
  for (const auto& s : t.samples) CHECK(std::abs(s.x[1] - s.x[0] * s.x[0]) <= 1e-8 * s.r);
  const auto& last = t.samples.back();
  CHECK(std::abs(last.x[0] / last.r - 1) <= 1e-4);
  CHECK(std::abs(last.x[1] / last.r) <= 1e-4);

  // dr/ds -> -1 from finite differences of (s, r)
  const auto& prev = t.samples[t.samples.size() - 2];
  CHECK(std::abs((last.r - prev.r) / (last.s - prev.s) + 1) <= 0.01);
}

TEST_CASE("step-halving consistency") {
  const double tol = 1e-8;
  const Trajectory a = inward("-(x^2+2*y^2)", {1, 1}, 1e-3, tol);
  const Trajectory b = inward("-(x^2+2*y^2)", {1, 1}, 1e-3, tol / 10);
  CHECK(norm(subtract(a.samples.back().x, b.samples.back().x)) <= 10 * tol);
}

TEST_CASE("outward flow of the inverse square") {
  IntegrationOptions opts;
  opts.direction = FlowDirection::outward;
  opts.r_limit = 1e3;
  const Trajectory t = integrate_unit_gradient(field_of("-1/(x^2+y^2)"), std::vector{1.0, 0.0}, opts);
  REQUIRE(t.termination == Termination::reached_r_limit);
  CHECK(std::abs(t.samples.back().r - 1e3) <= 1e-6);
  for (std::size_t k = 0; k < t.samples.size(); ++k) {
    CHECK(t.samples[k].x[1] == 0.0);
    if (k > 0) CHECK(t.samples[k].f_val > t.samples[k - 1].f_val);
  }
  CHECK(t.samples.front().f_val == doctest::Approx(-1.0));
  CHECK(t.samples.back().f_val < 0.0);
  CHECK(t.samples.back().f_val > -1e-5);
}

TEST_CASE("orientation flip and start errors") {
  const Trajectory t = inward("x^2+y^2", {0.6, 0.8}, 1e-3);
  CHECK(t.flipped);
  CHECK(t.samples.back().f_val < 0);
  CHECK(t.termination == Termination::reached_r_limit);
  CHECK_THROWS_AS(inward("(x-1)^2 - 1 + y^2", {1, 0}, 1e-3), DomainError);  // critical start
  CHECK_THROWS_AS(inward("x^2 - y^2", {1, 1}, 1e-3), DomainError);         // zero level
}

TEST_CASE("pole on the path") {
  // the flow of -(x^2+y^2) toward O crosses the pole line x = 1/2 of 1/(x - 1/2)
  const Trajectory t = inward("-(x^2+y^2) + 1/(1000*(2*x - 1)) - 1", {1, 0.001}, 1e-3);
  CHECK(t.termination == Termination::pole_encountered);
}

TEST_CASE("reparameterize by radius") {
  const Trajectory ray = inward("-(x^2+y^2)", {0.6, 0.8}, 1e-6);
  const auto grid = geometric_grid(1e-1, 1e-5, 5);
  const auto samples = reparameterize_by_radius(ray, grid);
  REQUIRE(samples.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(std::abs(samples[k].x[0] - 0.6 * grid[k]) <= 1e-9 * grid[k]);
    CHECK(std::abs(samples[k].x[1] - 0.8 * grid[k]) <= 1e-9 * grid[k]);
    CHECK(std::abs(samples[k].s - (1 - grid[k])) <= 1e-9);
  }

  const Trajectory t = inward("-(x^2+2*y^2)", {1, 1}, 1e-6);
  const auto fine = geometric_grid(1e-1, 1e-5, 60);
  const auto resampled = reparameterize_by_radius(t, fine);
  for (std::size_t k = 0; k < fine.size(); ++k) {
    CHECK(resampled[k].r == doctest::Approx(fine[k]).epsilon(1e-12));
    CHECK(std::abs(norm(resampled[k].x) - fine[k]) <= 1e-9 * fine[k]);
    // interpolated points stay on the exact orbit y = x^2
    CHECK(std::abs(resampled[k].x[1] - resampled[k].x[0] * resampled[k].x[0]) <= 1e-6 * fine[k]);
    CHECK(resampled[k].f_val == doctest::Approx(-(std::pow(resampled[k].x[0], 2) + 2 * std::pow(resampled[k].x[1], 2))));
  }
  const std::vector<double> below{1e-7};
  CHECK_THROWS_AS(reparameterize_by_radius(t, below), DomainError);
}

TEST_CASE("divided field examples") {
  const DividedField df = divided_field(field_of("-(x^2+3*y^2)"));
  CHECK(df.leading_degree() == 2);
  auto rate = df.evaluate(std::vector{0.0, 1.0}, 0.0);
  CHECK(norm(rate.u_dot) == 0.0);
  CHECK(rate.r_dot == 0.0);
  rate = df.evaluate(std::vector{1.0, 0.0}, 0.5);
  CHECK(norm(rate.u_dot) == 0.0);
  CHECK(rate.r_dot / 0.5 == doctest::Approx(-2.0));

  const DividedField quartic = divided_field(field_of("-(x^4+y^4)"));
  const double h = 1 / std::sqrt(2.0);
  rate = quartic.evaluate(std::vector{h, h}, 0.0);
  CHECK(norm(rate.u_dot) <= 1e-15);

  CHECK_THROWS_AS(divided_field(field_of("x + y^2")), DomainError);
  CHECK_THROWS_AS(divided_field(field_of("-1/(x^2+y^2)")), ConfigError);
}

TEST_CASE("divided field is tangent at r = 0") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const DividedField df = divided_field(field_of("-(x^4+y^4) + x^3*y - 2*x^5"));
  for (int k = 0; k < 50; ++k) {
    const Vec u = normalized(std::vector{g(rng), g(rng)});
    const auto rate = df.evaluate(u, 0.0);
    CHECK(std::abs(dot(rate.u_dot, u)) <= 1e-12);
  }
}

TEST_CASE("divided field matches the blown-up gradient away from r = 0") {
  // x = r u, x' = grad f  =>  r' = <grad f, u>, u' = (grad f - r' u)/r, then scale by (p-1) r^(2-p)
  const FunctionField f = field_of("-(x^2+3*y^2) + x^3 - x*y^2");
  const DividedField df = divided_field(f);
  const Vec u = normalized(std::vector{0.3, -0.7});
  const double r = 0.2;
  const Vec x = scaled(u, r);
  const Vec g = f.gradient_at(x);
  const double rdot = dot(g, u);
  const auto rate = df.evaluate(u, r);
  CHECK(rate.r_dot == doctest::Approx(rdot));
  for (std::size_t i = 0; i < 2; ++i) CHECK(rate.u_dot[i] == doctest::Approx((g[i] - rdot * u[i]) / r));
}

TEST_CASE("divided field linearization") {
  const DividedField df = divided_field(field_of("-(x^2+3*y^2)"));
  const auto lin = divided_field_linearization(df, std::vector{1.0, 0.0});
  REQUIRE(lin.eigenvalues.size() == 2);
  CHECK(lin.eigenvalues[0].real() == doctest::Approx(-4).epsilon(1e-8));
  CHECK(lin.eigenvalues[1].real() == doctest::Approx(-2).epsilon(1e-8));
  CHECK(lin.predicted == std::vector<double>{-4, -2});
  CHECK(lin.prediction_gap <= 1e-5);

  const DividedField round = divided_field(field_of("-(x^2+y^2)"));
  const auto any = divided_field_linearization(round, normalized(std::vector{0.3, 0.9}));
  CHECK(any.eigenvalues[0].real() == doctest::Approx(-2).epsilon(1e-8));
  CHECK(std::abs(any.eigenvalues[1]) <= 1e-8);

  const double h = 1 / std::sqrt(2.0);
  CHECK_THROWS_AS(divided_field_linearization(df, std::vector{h, h}), DomainError);

  // quartic diagonal: r' = -6 r, tangential rate (p-1)h2 - h1 = 3(-6) + 6 = -12
  const DividedField quartic = divided_field(field_of("-(x^4+y^4)"));
  const auto q = divided_field_linearization(quartic, std::vector{h, h});
  CHECK(q.eigenvalues[0].real() == doctest::Approx(-12).epsilon(1e-7));
  CHECK(q.eigenvalues[1].real() == doctest::Approx(-6).epsilon(1e-7));
  CHECK(q.prediction_gap <= 1e-5);
}

TEST_CASE("monotonicity report") {
  const Trajectory t = inward("-(x^2+2*y^2)", {1, 1}, 1e-6);
  for (const char* probe : {"x", "y", "x^2+y^2"}) {
    const auto rep = monotonicity_report(t, parse_rational(probe, xy), 1.0);
    CHECK(rep.sign_changes == 0);
    CHECK(rep.verdict == MonotonicityVerdict::monotone);
  }
  const auto flat = monotonicity_report(t, parse_rational("x - x + 1", xy), 0.5);
  CHECK(flat.verdict == MonotonicityVerdict::constant);
  CHECK_THROWS_AS(monotonicity_report(t, parse_rational("1/(x^2 - y^2 - 1e-300)", xy), 1.0), PoleError);

  // logarithmic spiral fixture, not a gradient trajectory
  Trajectory spiral;
  for (int k = 0; k < 400; ++k) {
    const double theta = 0.1 * k;
    const double r = std::exp(-0.05 * theta);
    TrajectorySample s;
    s.x = {r * std::cos(theta), r * std::sin(theta)};
    s.r = r;
    spiral.samples.push_back(s);
  }
  const auto osc = monotonicity_report(spiral, parse_rational("x", xy), 1.0);
  CHECK(osc.sign_changes > 3);
  CHECK(osc.verdict == MonotonicityVerdict::oscillation_suspected);

  Trajectory shortened = t;
  shortened.samples.resize(5);
  shortened.tail_begin = 0;
  CHECK_THROWS_AS(monotonicity_report(shortened, parse_rational("x", xy), 1.0), DomainError);
}

TEST_CASE("sphere equilibrium refinement") {
  const std::vector<std::string> xy{"x", "y"};
  const DividedField df = divided_field(make_field(parse_rational("-(x^2+2*y^2)", xy)));
  const Vec u = refine_sphere_equilibrium(df, std::vector{1.0, 1e-3});
  CHECK(std::abs(u[0] - 1) <= 1e-12);
  CHECK(std::abs(u[1]) <= 1e-12);
  CHECK(norm(df.evaluate(u, 0.0).u_dot) <= 1e-12);
  const Linearization lin = divided_field_linearization(df, u);
  CHECK(lin.prediction_gap <= 1e-5);

  const DividedField quartic = divided_field(make_field(parse_rational("-(x^4+y^4)", xy)));
  const Vec d = refine_sphere_equilibrium(quartic, std::vector{0.7, 0.72});
  CHECK(std::abs(d[0] - std::sqrt(0.5)) <= 1e-10);
  CHECK(std::abs(d[1] - std::sqrt(0.5)) <= 1e-10);
  CHECK_THROWS_AS(refine_sphere_equilibrium(df, std::vector{0.1, 1.0}, 1e-12, 10), NumericalError);
}

TEST_CASE("step control does not depend on the coordinate axes") {
  const std::vector<std::string> xy{"x", "y"};
  const RationalFunction f = parse_rational("-(x^2+2*y^2) + x^3 - x*y^2", xy);
  // rotation by the 3-4-5 angle; f_Q(x) = f(Q^T x) started at Q x0
  const std::vector<std::vector<Rational>> qt{{Rational(3, 5), Rational(4, 5)}, {Rational(-4, 5), Rational(3, 5)}};
  Matrix q(2, 2);
  q(0, 0) = 0.6, q(0, 1) = -0.8, q(1, 0) = 0.8, q(1, 1) = 0.6;
  IntegrationOptions opts;
  const Trajectory a = integrate_unit_gradient(make_field(f), std::vector{0.5, 0.5}, opts);
  const Trajectory b = integrate_unit_gradient(make_field(substitute_linear(f, qt)), q.apply(std::vector{0.5, 0.5}), opts);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(std::abs(b.samples[k].r / a.samples[k].r - 1) <= 1e-8);
    CHECK(norm(subtract(b.samples[k].x, q.apply(a.samples[k].x))) <= 1e-8 * a.samples[k].r);
  }
}
