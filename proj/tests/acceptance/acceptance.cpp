// Acceptance run: one PASS/FAIL line per criterion, sub-checks indented
// below it. Criteria listed with --known-failure still print FAIL but do
// not affect the exit status.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nonosc/asymptotics.hpp"
#include "nonosc/errors.hpp"
#include "nonosc/exprparse.hpp"
#include "nonosc/flow.hpp"
#include "nonosc/report.hpp"
#include "nonosc/riemannian.hpp"

using namespace nonosc;
using nlohmann::json;

namespace {

const std::vector<std::string> xy{"x", "y"};

struct Check {
  std::string name;
  double value;
  std::string target;
  bool pass;
};

class Criterion {
 public:
  void within(const std::string& name, double value, double expected, double tol) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.6g +- %.1e", expected, tol);
    add(name, value, buf, std::abs(value - expected) <= tol);
  }
  void at_most(const std::string& name, double value, double bound) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "<= %.1e", bound);
    add(name, value, buf, value <= bound);
  }
  void holds(const std::string& name, bool ok) { add(name, ok ? 1.0 : 0.0, "true", ok); }
  void failed(const std::string& name, const std::string& why) { add(name + " [" + why + "]", NAN, "no error", false); }

  bool pass() const {
    for (const auto& c : checks_) {
      if (!c.pass) return false;
    }
    return !checks_.empty();
  }
  const std::vector<Check>& checks() const { return checks_; }

 private:
  void add(const std::string& name, double value, const std::string& target, bool ok) {
    checks_.push_back({name, value, target, ok});
  }
  std::vector<Check> checks_;
};

FunctionField field(const char* text) { return make_field(parse_rational(text, xy)); }

IntegrationOptions inward(double r_min) {
  IntegrationOptions o;
  o.r_limit = r_min;
  return o;
}

double distance_to(std::span<const double> a, std::span<const double> b) { return norm(subtract(a, b)); }

const EstimateWindow& final_window(const EstimateChecks& e) { return e.windows.back(); }

// ---------------------------------------------------------------------------

void radial_quadratic(Criterion& c) {
  const Trajectory t = integrate_unit_gradient(field("-(x^2+y^2)"), std::vector{0.6, 0.8}, inward(1e-6));
  const LimitReport rep = analyze_trajectory(t);
  if (!rep.secant || !rep.fit || !rep.eigen_residual_final || !rep.bl || !rep.estimates) {
    return c.failed("analysis", rep.errors.empty() ? "missing estimator" : rep.errors.front());
  }
  c.within("secant x", rep.secant->nu[0], 0.6, 1e-8);
  c.within("secant y", rep.secant->nu[1], 0.8, 1e-8);
  c.within("m", rep.fit->m, 2.0, 1e-6);
  c.within("a", rep.fit->a, 1.0, 1e-6);
  c.at_most("eigen_residual_final", *rep.eigen_residual_final, 1e-10);
  c.within("bl hessian ratio", rep.bl->hessian_ratio, 1.0, 1e-9);
  c.within("vca_value", final_window(*rep.estimates).vca_value, 2.0, 1e-6);
}

Trajectory anisotropic_trajectory() {
  return integrate_unit_gradient(field("-(x^2+2*y^2)"), std::vector{1.0, 1.0}, inward(1e-6));
}

void anisotropic_morse(Criterion& c) {
  const Trajectory t = anisotropic_trajectory();
  const LimitReport rep = analyze_trajectory(t);
  if (!rep.secant || !rep.hessian || !rep.eigen_check || !rep.estimates) {
    return c.failed("analysis", rep.errors.empty() ? "missing estimator" : rep.errors.front());
  }
  c.at_most("|nu - (1,0)|", distance_to(rep.secant->nu, std::vector{1.0, 0.0}), 1e-4);
  const SymMatrix expected = SymMatrix::diagonal(std::vector{-2.0, -4.0}).scaled(1.0 / std::sqrt(20.0));
  c.at_most("|H - diag(-2,-4)/sqrt20|", distance(rep.hessian->direction, expected), 1e-10);
  // literal requirement; the estimates force w -> +nu on inward trajectories
  c.at_most("|w + nu| final window", rep.eigen_check->final_w_plus_nu, 1e-3);
  const auto& last = t.samples.back();
  c.within("|grad f|/r final", last.grad_norm / last.r, 2.0, 1e-3);
  double worst = 0.0;
  std::size_t counted = 0;
  for (const auto& w : rep.estimates->windows) {
    if (w.r > 1e-4) continue;
    if (!w.consequence1_ratio) return c.failed("consequence1_ratio", "missing");
    worst = std::max(worst, *w.consequence1_ratio);
    ++counted;
  }
  c.holds("windows with r <= 1e-4 exist", counted > 0);
  c.at_most("consequence1_ratio (r <= 1e-4)", worst, 0.01);
}

void homogeneous_quartic(Criterion& c) {
  const FunctionField f = field("-(x^4+y^4)");
  const Trajectory t = integrate_unit_gradient(f, std::vector{0.5, 0.5}, inward(1e-4));
  c.holds("reached r = 1e-4", t.termination == Termination::reached_r_limit);
  double off = 0.0;
  for (const auto& s : t.samples) off = std::max(off, std::abs(s.x[0] - s.x[1]));
  c.at_most("max |x - y|", off, 1e-9);
  const LimitReport rep = analyze_trajectory(t);
  if (!rep.fit || !rep.estimates || !rep.secant) {
    return c.failed("analysis", rep.errors.empty() ? "missing estimator" : rep.errors.front());
  }
  c.within("m", rep.fit->m, 4.0, 1e-4);
  c.within("a", rep.fit->a, 0.5, 1e-4);
  const auto rel = sphere_point_relation(f, rep.secant->nu);
  c.within("<Hs(nu)nu,nu>", rel.rayleigh, -6.0, 1e-8);
  c.within("p(p-1)f(nu)", rel.predicted, -6.0, 1e-8);
  const auto& w = final_window(*rep.estimates);
  if (!w.scaled_eigenvalue) return c.failed("scaled_eigenvalue", "missing");
  c.within("scaled_eigenvalue", *w.scaled_eigenvalue, -0.5, 1e-3);
  c.holds("hypothesis flag", rep.estimates->hypothesis_flag);
}

void euler_suite(Criterion& c) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<std::size_t> dim(2, 4);
  std::uniform_int_distribution<unsigned> deg(2, 6);
  std::uniform_int_distribution<int> coef(-20, 20);
  std::uniform_int_distribution<int> terms(1, 8);
  std::uniform_real_distribution<double> coord(-2, 2);
  double worst_first = 0.0, worst_second = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = dim(rng);
    const unsigned k = deg(rng);
    std::uniform_int_distribution<std::size_t> axis(0, n - 1);
    Polynomial p(n);
    while (p.is_zero()) {
      for (int t = terms(rng); t > 0; --t) {
        Exponent e(n, 0);
        for (unsigned d = 0; d < k; ++d) ++e[axis(rng)];
        p.add_term(e, Rational(coef(rng), 1 + std::abs(coef(rng))));
      }
    }
    std::vector<double> x(n);
    for (double& v : x) v = coord(rng);
    const auto res = euler_identity_residuals(p, k, x);
    worst_first = std::max(worst_first, res.first_relative());
    worst_second = std::max(worst_second, res.second_relative());
  }
  c.at_most("first identity, worst relative", worst_first, 1e-12);
  c.at_most("second identity, worst relative", worst_second, 1e-12);
}

void divided_linearization(Criterion& c) {
  const DividedField df = divided_field(field("-(x^2+3*y^2)"));
  const Linearization lin = divided_field_linearization(df, std::vector{1.0, 0.0});
  std::vector<double> re;
  double imag = 0.0;
  for (const auto& z : lin.eigenvalues) {
    re.push_back(z.real());
    imag = std::max(imag, std::abs(z.imag()));
  }
  std::sort(re.begin(), re.end());
  if (re.size() != 2) return c.failed("eigenvalues", "wrong count");
  c.within("eigenvalue 1", re[0], -4.0, 1e-5);
  c.within("eigenvalue 2", re[1], -2.0, 1e-5);
  c.at_most("imaginary parts", imag, 1e-5);
}

void at_infinity(Criterion& c) {
  IntegrationOptions o;
  o.direction = FlowDirection::outward;
  o.r_limit = 1e3;
  const Trajectory t = integrate_unit_gradient(field("-1/(x^2+y^2)"), std::vector{1.0, 0.0}, o);
  c.holds("reached r = 1e3", t.termination == Termination::reached_r_limit);
  const LimitReport rep = analyze_trajectory(t);
  if (!rep.secant || !rep.fit || !rep.hessian || !rep.eigen_residual_final) {
    return c.failed("analysis", rep.errors.empty() ? "missing estimator" : rep.errors.front());
  }
  c.at_most("|nu - (1,0)|", distance_to(rep.secant->nu, std::vector{1.0, 0.0}), 1e-8);
  c.within("m", rep.fit->m, 2.0, 1e-4);
  c.within("a", rep.fit->a, 1.0, 1e-4);
  const SymMatrix expected = SymMatrix::diagonal(std::vector{-6.0, 2.0}).scaled(1.0 / std::sqrt(40.0));
  c.at_most("|H - diag(-6,2)/sqrt40|", distance(rep.hessian->direction, expected), 1e-6);
  c.at_most("eigen residual at nu", *rep.eigen_residual_final, 1e-8);
  const auto& last = t.samples.back();
  c.within("r|grad f|/|f| final", last.r * last.grad_norm / std::abs(last.f_val), 2.0, 1e-6);
}

// Largest absolute difference over numeric leaves present in both trees.
void compare_numeric(const json& a, const json& b, const std::string& path, double& worst, std::size_t& leaves,
                     std::vector<std::string>& mismatched) {
  if (a.is_number() && b.is_number()) {
    const double d = std::abs(a.get<double>() - b.get<double>());
    worst = std::max(worst, d);
    ++leaves;
    if (d > 1e-10) mismatched.push_back(path);
  } else if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (b.contains(it.key())) compare_numeric(it.value(), b[it.key()], path + "." + it.key(), worst, leaves, mismatched);
    }
  } else if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) {
      mismatched.push_back(path + " (length)");
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      compare_numeric(a[i], b[i], path + "[" + std::to_string(i) + "]", worst, leaves, mismatched);
    }
  } else if (a.type() != b.type()) {
    mismatched.push_back(path + " (type)");
  }
}

void identity_metric(Criterion& c, const std::filesystem::path& scratch) {
  const auto metric = scratch / "identity_metric.json";
  std::ofstream(metric) << R"j({"vars": ["x", "y"], "g": [["1", "0"], ["0", "1"]]})j";
  AnalysisConfig cfg;
  cfg.expr = "-(x^2+2*y^2)";
  cfg.vars = xy;
  cfg.starts = {{1.0, 1.0}};
  cfg.probes = {"x", "y", "x^2+y^2"};
  const json euclid = build_report(cfg).report;
  cfg.mode = AnalysisMode::riemann;
  cfg.metric_file = metric.string();
  const json riem = build_report(cfg).report;

  double worst = 0.0;
  std::size_t leaves = 0;
  std::vector<std::string> mismatched;
  for (const char* key : {"trajectory_summary", "limit_report", "estimate_checks", "monotonicity"}) {
    compare_numeric(euclid[key], riem[key], key, worst, leaves, mismatched);
  }
  c.holds("numeric fields compared (" + std::to_string(leaves) + ")", leaves > 50);
  c.at_most("largest difference", worst, 1e-10);
  c.holds("no mismatched fields" + (mismatched.empty() ? "" : " (first: " + mismatched.front() + ")"),
          mismatched.empty());
  c.holds("both reports error-free", euclid["errors"].empty() && riem["errors"].empty());
}

void stretched_metric(Criterion& c) {
  std::vector<std::vector<RationalFunction>> table{
      {parse_rational("1+x^2", xy), parse_rational("0", xy)},
      {parse_rational("0", xy), parse_rational("1", xy)}};
  const MetricField g = make_metric(table);
  const Trajectory t = integrate_unit_gradient_riemannian(field("-(x^2+2*y^2)"), g, std::vector{1.0, 1.0}, inward(1e-6));
  c.holds("reached r = 1e-6", t.termination == Termination::reached_r_limit);
  const RiemannianReport rep = analyze_riemannian(t);
  if (!rep.limits.eigen_residual_final) return c.failed("eigen residual", "missing");
  c.at_most("eigen residual of H^g at nu", *rep.limits.eigen_residual_final, 1e-3);
  c.within("Gamma^1_11 at (1,0)", christoffel(g, std::vector{1.0, 0.0})(0, 0, 0), 0.5, 1e-12);
  double worst = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  worst = metric_compatibility_residual(g, std::vector{1.0, 0.0}, 1);
  for (int k = 0; k < 16; ++k) worst = std::max(worst, metric_compatibility_residual(g, std::vector{u(rng), u(rng)}, 10 + k));
  c.at_most("metric compatibility residual", worst, 1e-6);
}

void monotonicity(Criterion& c) {
  const Trajectory t = anisotropic_trajectory();
  for (const char* probe : {"x", "y", "x^2+y^2"}) {
    const auto rep = monotonicity_report(t, parse_rational(probe, xy), 0.5);
    c.within(std::string("sign changes of ") + probe, static_cast<double>(rep.sign_changes), 0.0, 0.0);
  }
  // logarithmic spiral: x = r cos(theta), r = exp(-theta/20)
  Trajectory spiral;
  for (int k = 0; k < 400; ++k) {
    const double theta = 0.1 * k;
    TrajectorySample s;
    s.r = std::exp(-0.05 * theta);
    s.x = {s.r * std::cos(theta), s.r * std::sin(theta)};
    spiral.samples.push_back(s);
  }
  const auto osc = monotonicity_report(spiral, parse_rational("x", xy), 1.0);
  c.holds("spiral verdict oscillation_suspected", osc.verdict == MonotonicityVerdict::oscillation_suspected);
}

void equivariance(Criterion& c) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> gen(1, 9);
  std::uniform_int_distribution<int> num(1, 40);
  const char* functions[] = {"-(x^2+2*y^2)", "-(x^2+2*y^2) + x^3 - x*y^2"};
  double worst_nu = 0.0, worst_m = 0.0, worst_res = 0.0, worst_a = 0.0;
  for (const char* text : functions) {
    const RationalFunction f = parse_rational(text, xy);
    const Trajectory t0 = integrate_unit_gradient(make_field(f), std::vector{0.5, 0.5}, inward(1e-6));
    const LimitReport r0 = analyze_trajectory(t0);
    if (!r0.secant || !r0.fit || !r0.eigen_residual_final) return c.failed("reference analysis", text);
    for (int trial = 0; trial < 4; ++trial) {
      // rational rotation from a Pythagorean triple, possibly a reflection
      int p = gen(rng), q = gen(rng);
      if (p == q) ++p;
      const Rational hyp(p * p + q * q), cs(p * p - q * q), sn(2 * p * q);
      const Rational a11 = cs / hyp, a21 = sn / hyp;
      const bool reflect = trial % 2 == 1;
      const std::vector<std::vector<Rational>> rot{{a11, reflect ? a21 : -a21}, {a21, reflect ? -a11 : a11}};
      const Rational scale(num(rng), gen(rng));
      // f_Q(x) = c f(Q^T x)
      const std::vector<std::vector<Rational>> rot_t{{rot[0][0], rot[1][0]}, {rot[0][1], rot[1][1]}};
      RationalFunction g = substitute_linear(f, rot_t);
      g *= RationalFunction(Polynomial::constant(2, scale));
      Matrix qd(2, 2);
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) qd(i, j) = rot[i][j].get_d();
      }
      const Trajectory t = integrate_unit_gradient(make_field(g), qd.apply(std::vector{0.5, 0.5}), inward(1e-6));
      const LimitReport r = analyze_trajectory(t);
      if (!r.secant || !r.fit || !r.eigen_residual_final) return c.failed("transformed analysis", text);
      worst_nu = std::max(worst_nu, distance_to(r.secant->nu, qd.apply(r0.secant->nu)));
      worst_m = std::max(worst_m, std::abs(r.fit->m - r0.fit->m));
      worst_res = std::max(worst_res, std::abs(*r.eigen_residual_final - *r0.eigen_residual_final));
      worst_a = std::max(worst_a, std::abs(r.fit->a / (scale.get_d() * r0.fit->a) - 1.0));
    }
  }
  c.at_most("|nu' - Q nu|", worst_nu, 1e-8);
  c.at_most("|m' - m|", worst_m, 1e-8);
  c.at_most("|residual' - residual|", worst_res, 1e-8);
  c.at_most("|a'/(c a) - 1|", worst_a, 1e-8);
}

void level_extrema(Criterion& c) {
  const double level = -1e-2;
  const LevelExtrema ext = level_gradient_extrema(field("-(x^2+2*y^2)"), level, 2000, 11);
  c.within("normalized min", ext.normalized_min, 2.0, 1e-3);
  c.within("normalized max", ext.normalized_max, 2.0 * std::numbers::sqrt2, 1e-3);

  // brute force on the ellipse x = sqrt(-L) cos t, y = sqrt(-L/2) sin t
  double lo = INFINITY, hi = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double th = 2 * std::numbers::pi * k / 100000.0;
    const double x = std::sqrt(-level) * std::cos(th), y = std::sqrt(-level / 2) * std::sin(th);
    const double grad = std::hypot(2 * x, 4 * y) / std::sqrt(-level);
    lo = std::min(lo, grad);
    hi = std::max(hi, grad);
  }
  c.within("min vs 1e5-sample oracle", ext.normalized_min, lo, 1e-3);
  c.within("max vs 1e5-sample oracle", ext.normalized_max, hi, 1e-3);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> known;
  bool verbose = true;
  app.add_option("--known-failure", known, "criteria whose FAIL does not change the exit status");
  app.add_flag("!--quiet", verbose, "omit sub-check lines");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> known_set(known.begin(), known.end());

  const auto scratch = std::filesystem::temp_directory_path() / "nonosc_acceptance";
  std::filesystem::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria{
      {"radial quadratic oracle", radial_quadratic},
      {"anisotropic Morse function", anisotropic_morse},
      {"homogeneous quartic ray", homogeneous_quartic},
      {"Euler identity property suite", euler_suite},
      {"divided-field linearization", divided_linearization},
      {"trajectory to infinity", at_infinity},
      {"identity metric matches Euclidean report", [&](Criterion& c) { identity_metric(c, scratch); }},
      {"non-trivial metric", stretched_metric},
      {"monotonicity probes and spiral fixture", monotonicity},
      {"rotation and scaling equivariance", equivariance},
      {"level-set gradient extrema", level_extrema},
  };

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Criterion c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.failed("exception", e.what());
    }
    const bool pass = c.pass();
    std::string suffix;
    if (!pass && known_set.count(id)) suffix = "  (known failure)";
    if (pass && known_set.count(id)) suffix = "  (listed as known failure but passed)";
    std::printf("%s %2d %s%s\n", pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), suffix.c_str());
    if (verbose) {
      for (const auto& ch : c.checks()) {
        std::printf("       %-4s %-44s %.10g  (%s)\n", ch.pass ? "ok" : "FAIL", ch.name.c_str(), ch.value,
                    ch.target.c_str());
      }
    }
    if (!pass && !known_set.count(id)) ++unexpected;
  }
  std::fflush(stdout);
  return unexpected == 0 ? 0 : 1;
}
