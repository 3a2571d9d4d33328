#include "nonosc/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "nonosc/errors.hpp"

namespace nonosc {

namespace {

bool is_inward(const Trajectory& traj) { return traj.direction == FlowDirection::inward; }

struct Line {
  double slope;
  double intercept;
  double max_residual;
};

Line least_squares(std::span<const double> xs, std::span<const double> ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (!(sxx > 0)) throw DomainError("degenerate window: radii do not vary");
  Line line{sxy / sxx, 0, 0};
  line.intercept = my - line.slope * mx;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    line.max_residual = std::max(line.max_residual, std::abs(ys[k] - line.intercept - line.slope * xs[k]));
  }
  return line;
}

Line log_fit(const Trajectory& traj, const Window& w, const std::function<double(const TrajectorySample&)>& value) {
  std::vector<double> xs, ys;
  for (std::size_t k = w.begin; k < w.end; ++k) {
    const auto& s = traj.samples[k];
    xs.push_back(std::log(s.r));
    ys.push_back(std::log(std::abs(value(s))));
  }
  return least_squares(xs, ys);
}

std::vector<Window> require_windows(const Trajectory& traj, std::size_t count, std::size_t minimum) {
  auto ws = dyadic_windows(traj, count);
  if (ws.size() < minimum) {
    throw DomainError("need at least " + std::to_string(minimum) + " dyadic tail windows, found " +
                      std::to_string(ws.size()));
  }
  return ws;
}

Vec unit_radial(const TrajectorySample& s) { return scaled(s.x, 1.0 / s.r); }

// Hs·ν_f / |Hs·ν_f|
Vec hessian_image_direction(const TrajectorySample& s) {
  const Vec image = s.hess.apply(s.unit_grad);
  const double len = norm(image);
  if (!(len > 0.0)) throw DomainError("Hs·ν_f vanishes numerically");
  return scaled(image, 1.0 / len);
}

}  // namespace

std::vector<Window> dyadic_windows(const Trajectory& traj, std::size_t max_windows) {
  std::vector<Window> out;
  if (traj.samples.empty() || max_windows == 0) return out;
  const bool in = is_inward(traj);
  const double r_final = traj.samples.back().r;
  auto band = [&](double r) {
    const double ratio = in ? r / r_final : r_final / r;
    return static_cast<long>(std::floor(std::log2(std::max(ratio, 1.0))));
  };

  // walk back from the final sample, closing a window at each band change
  std::size_t end = traj.samples.size();
  long current = band(traj.samples.back().r);
  for (std::size_t k = traj.samples.size(); k-- > traj.tail_begin;) {
    const long b = band(traj.samples[k].r);
    if (b != current) {
      out.push_back(Window{k + 1, end, 0, 0});
      end = k + 1;
      current = b;
      if (out.size() == max_windows) break;
    }
    if (k == traj.tail_begin) {
      out.push_back(Window{k, end, 0, 0});
      break;
    }
  }
  if (out.size() > max_windows) out.resize(max_windows);
  for (Window& w : out) {
    const long b = band(traj.samples[w.limit_index()].r);
    const double scale = std::ldexp(1.0, static_cast<int>(b));
    w.r_lo = in ? r_final * scale : r_final / (2 * scale);
    w.r_hi = in ? r_final * 2 * scale : r_final / scale;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

SecantLimit estimate_secant_limit(const Trajectory& traj) {
  const auto tail = traj.tail();
  if (tail.size() < 20) throw DomainError("secant limit needs at least 20 tail samples");
  SecantLimit out;
  out.nu = unit_radial(tail.back());
  Vec prev = unit_radial(tail.front());
  for (std::size_t k = 1; k < tail.size(); ++k) {
    Vec u = unit_radial(tail[k]);
    out.spherical_tail_length += norm(subtract(u, prev));
    prev = std::move(u);
  }
  const auto ws = dyadic_windows(traj, 1);
  if (!ws.empty()) {
    for (std::size_t k = ws.back().begin; k < ws.back().end; ++k) {
      out.angular_spread = std::max(out.angular_spread, norm(subtract(unit_radial(traj.samples[k]), out.nu)));
    }
  }
  return out;
}

NearestRational nearest_rational(double value, long max_denominator) {
  NearestRational best{0, 1, std::numeric_limits<double>::infinity()};
  for (long q = 1; q <= max_denominator; ++q) {
    const auto p = static_cast<long>(std::llround(value * static_cast<double>(q)));
    const double d = std::abs(value - static_cast<double>(p) / static_cast<double>(q));
    if (d < best.distance - 1e-15) best = {p, q, d};
  }
  return best;
}

AsymptoticFit estimate_exponents(const Trajectory& traj, std::size_t windows) {
  for (const auto& s : traj.tail()) {
    if (!(s.f_val < 0.0)) throw DomainError("f is not negative on the trajectory tail");
  }
  const auto ws = require_windows(traj, windows, 3);
  AsymptoticFit fit;
  fit.outward = !is_inward(traj);
  const double sign = fit.outward ? -1.0 : 1.0;
  Line last{};
  for (const Window& w : ws) {
    if (w.size() < 5) throw DomainError("degenerate window: fewer than 5 samples");
    last = log_fit(traj, w, [](const TrajectorySample& s) { return s.f_val; });
    fit.windows.push_back({w.r_lo, w.r_hi, last.slope, sign * last.slope, std::exp(last.intercept)});
  }
  fit.m = fit.windows.back().m;
  fit.a = fit.windows.back().a;
  fit.r_lo = ws.back().r_lo;
  fit.r_hi = ws.back().r_hi;
  fit.loglog_residual = last.max_residual;
  for (std::size_t k = 1; k < fit.windows.size(); ++k) {
    fit.residual = std::max({fit.residual, std::abs(fit.windows[k].m - fit.windows[k - 1].m),
                             std::abs(fit.windows[k].a - fit.windows[k - 1].a)});
  }

  const Line radial = log_fit(traj, ws.back(), [](const TrajectorySample& s) { return s.dr_f; });
  fit.radial_slope = radial.slope;
  fit.radial_slope_expected = fit.outward ? -fit.m - 1 : fit.m - 1;
  fit.radial_slope_consistent = std::abs(fit.radial_slope - fit.radial_slope_expected) <= std::max(fit.residual, 1e-6);
  fit.rational = nearest_rational(fit.m);
  return fit;
}

HessianDirectionLimit estimate_hessian_direction_limit(const Trajectory& traj, std::size_t windows) {
  const auto ws = require_windows(traj, std::max<std::size_t>(windows, 2), 2);
  HessianDirectionLimit out;
  for (const Window& w : ws) {
    out.per_window.push_back(frobenius_normalize(traj.samples[w.limit_index()].hess).matrix());
  }
  out.direction = frobenius_normalize(traj.samples.back().hess).matrix();
  out.cauchy_gap = distance(out.per_window.back(), out.per_window[out.per_window.size() - 2]);
  return out;
}

EigenDirectionCheck eigen_direction_check(const Trajectory& traj, std::size_t windows) {
  const auto ws = require_windows(traj, windows, 1);
  EigenDirectionCheck out;
  for (const Window& w : ws) {
    const auto& s = traj.samples[w.limit_index()];
    const Vec nu = unit_radial(s);
    const Vec img = hessian_image_direction(s);
    const SymMatrix h = frobenius_normalize(s.hess).matrix();
    out.residual_sequence.push_back(
        {s.r, norm(add(img, nu)), norm(subtract(img, nu)), eigen_direction_residual(h, nu)});
  }
  const auto& last = out.residual_sequence.back();
  out.final_residual = last.eigen_residual;
  out.final_w_plus_nu = last.w_plus_nu;
  out.final_w_minus_nu = last.w_minus_nu;
  out.direction_sign_check = last.w_plus_nu < last.w_minus_nu;
  out.estimate_sign_check = is_inward(traj) ? last.w_minus_nu < last.w_plus_nu : last.w_plus_nu < last.w_minus_nu;
  const auto& seq = out.residual_sequence;
  out.residuals_non_increasing = true;
  for (std::size_t k = seq.size() >= 3 ? seq.size() - 2 : 1; k < seq.size(); ++k) {
    // slack absorbs rounding once the residual is at machine level
    if (seq[k].eigen_residual > seq[k - 1].eigen_residual + 1e-12) out.residuals_non_increasing = false;
  }
  return out;
}

EstimateChecks verify_estimates(const Trajectory& traj, const AsymptoticFit& fit, std::size_t windows) {
  const auto ws = require_windows(traj, windows, 1);
  EstimateChecks out;
  const double q = is_inward(traj) ? fit.m : -fit.m;
  const double a = fit.a;
  const double qq = q * (q - 1);
  out.q = q;
  // at q = 1 the Hessian scale q(q-1) vanishes; below it the sign flips
  out.consequence1_enabled = !(is_inward(traj) && fit.m <= 1.0);
  out.vca_expected = std::abs(q) * a;

  for (const Window& w : ws) {
    const auto& s = traj.samples[w.limit_index()];
    const double r = s.r;
    const Vec nu = unit_radial(s);
    EstimateWindow e;
    e.r = r;
    const double grad_scale = std::abs(q) * a * std::pow(r, q - 1);
    e.grad_radial_ratio = norm(add(s.grad, scaled(nu, q * a * std::pow(r, q - 1)))) / grad_scale;
    const double hess_scale = qq * a * std::pow(r, q - 2);
    if (out.consequence1_enabled && qq != 0.0) {
      const Vec image = s.hess.apply(s.unit_grad);
      e.consequence1_ratio = norm(add(image, scaled(s.unit_grad, hess_scale))) / std::abs(hess_scale);
    }
    const double radial_form = s.hess.quadratic_form(s.x);
    if (qq != 0.0 && s.f_val != 0.0) e.euler_like_residual = std::abs(qq * s.f_val - radial_form) / std::abs(qq * s.f_val);
    e.vca_value = std::pow(r, 1 - q) * s.grad_norm;
    if (qq != 0.0) e.scaled_eigenvalue = s.hess.quadratic_form(nu) / (qq * std::pow(r, q - 2));
    out.windows.push_back(e);
  }

  if (out.windows.size() >= 2) {
    const auto& last = out.windows.back();
    const auto& prev = out.windows[out.windows.size() - 2];
    out.vca_drift = std::abs(last.vca_value - prev.vca_value);
    out.vca_log_derivative = (last.vca_value - prev.vca_value) / (std::log(last.r) - std::log(prev.r));
    std::vector<double> xs, ys;
    for (const Window& w : ws) {
      const auto& s = traj.samples[w.limit_index()];
      xs.push_back(std::log(s.r));
      ys.push_back(std::log(s.hess.frobenius_norm()));
    }
    out.hessian_slope = least_squares(xs, ys).slope;
  } else {
    out.hessian_slope = log_fit(traj, ws.back(), [](const TrajectorySample& s) { return s.hess.frobenius_norm(); }).slope;
  }
  out.hessian_slope_expected = q - 2;
  out.hypothesis_flag = std::abs(out.hessian_slope - out.hessian_slope_expected) <= 0.05;
  return out;
}

BochnakLojasiewicz bochnak_lojasiewicz_constant(const Trajectory& traj, std::size_t windows) {
  const auto ws = require_windows(traj, windows, 1);
  BochnakLojasiewicz out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t k = ws.front().begin; k < ws.back().end; ++k) {
    const auto& s = traj.samples[k];
    const double g2 = s.grad_norm * s.grad_norm;
    out.hessian_ratio = std::min(out.hessian_ratio, s.r * norm(s.hess.apply(s.grad)) / g2);
    out.value_ratio = std::min(out.value_ratio, s.r * s.grad_norm / std::abs(s.f_val));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Level sets

namespace {

class LevelProjector {
 public:
  LevelProjector(const FunctionField& field, double level)
      : field_(field), level_(level) {
    if (field.function().is_polynomial()) {
      const auto hd = homogeneous_decomposition(field.function().numerator());
      leading_ = CompiledPolynomial(hd.leading_part());
      degree_ = hd.leading_degree();
    }
  }

  // |∇f| at the point where the ray along d meets {f = level}, or nullopt.
  std::optional<std::pair<double, Vec>> project(const Vec& d) const {
    double t = initial_guess(d);
    if (!(t > 0.0)) return std::nullopt;
    for (int iter = 0; iter < 60; ++iter) {
      const Vec x = scaled(d, t);
      double phi, dphi;
      try {
        phi = field_.value_at(x) - level_;
        dphi = dot(field_.gradient_at(x), d);
      } catch (const PoleError&) {
        return std::nullopt;
      }
      if (std::abs(phi) <= 1e-15 * std::abs(level_)) {
        return std::make_pair(norm(field_.gradient_at(x)), x);
      }
      if (dphi == 0.0 || !std::isfinite(dphi)) return std::nullopt;
      double next = t - phi / dphi;
      if (!(next > 0.0)) next = 0.5 * t;
      if (std::abs(next - t) <= 1e-15 * t) {
        const Vec xn = scaled(d, next);
        const double rest = field_.value_at(xn) - level_;
        if (std::abs(rest) > 1e-10 * std::abs(level_)) return std::nullopt;
        return std::make_pair(norm(field_.gradient_at(xn)), xn);
      }
      t = next;
    }
    return std::nullopt;
  }

 private:
  double initial_guess(const Vec& d) const {
    if (degree_ > 0) {
      const double lead = leading_.evaluate(d);
      if (lead == 0.0 || (lead > 0) != (level_ > 0)) return -1.0;
      return std::pow(level_ / lead, 1.0 / degree_);
    }
    return std::sqrt(std::abs(level_));
  }

  const FunctionField& field_;
  double level_;
  CompiledPolynomial leading_;
  unsigned degree_ = 0;
};

// Pattern search over unit directions near d, minimizing sign·|∇f|.
std::pair<double, Vec> polish(const LevelProjector& proj, Vec d, double value, double sign) {
  const std::size_t n = d.size();
  double delta = 0.05;
  while (delta > 1e-10) {
    bool improved = false;
    const Matrix e = orthogonal_complement(d);
    for (std::size_t k = 0; k + 1 < n && !improved; ++k) {
      for (double step : {delta, -delta}) {
        Vec trial = d;
        for (std::size_t i = 0; i < n; ++i) trial[i] += step * e(i, k);
        trial = normalized(trial);
        const auto hit = proj.project(trial);
        if (hit && sign * hit->first < sign * value) {
          value = hit->first;
          d = std::move(trial);
          improved = true;
          break;
        }
      }
    }
    if (!improved) delta *= 0.5;
  }
  return {value, d};
}

}  // namespace

LevelExtrema level_gradient_extrema(const FunctionField& field, double level, std::size_t n_samples,
                                    std::uint64_t seed) {
  if (!(level < 0.0)) throw ConfigError("level must be negative");
  if (n_samples == 0) throw ConfigError("need at least one sample direction");
  const std::size_t n = field.dimension();
  const LevelProjector proj(field, level);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  LevelExtrema out;
  out.min_grad = std::numeric_limits<double>::infinity();
  out.max_grad = -std::numeric_limits<double>::infinity();
  Vec dir_min, dir_max;
  for (std::size_t k = 0; k < n_samples; ++k) {
    Vec d(n);
    for (double& v : d) v = gauss(rng);
    if (norm(d) == 0.0) continue;
    d = normalized(d);
    const auto hit = proj.project(d);
    if (!hit) continue;
    ++out.projected;
    if (hit->first < out.min_grad) {
      out.min_grad = hit->first;
      dir_min = d;
    }
    if (hit->first > out.max_grad) {
      out.max_grad = hit->first;
      dir_max = d;
    }
  }
  if (out.projected == 0) throw DomainError("Newton projection onto the level set failed for every sample");

  auto [lo, lo_dir] = polish(proj, dir_min, out.min_grad, 1.0);
  auto [hi, hi_dir] = polish(proj, dir_max, out.max_grad, -1.0);
  out.min_grad = lo;
  out.max_grad = hi;
  out.argmin = proj.project(lo_dir)->second;
  out.argmax = proj.project(hi_dir)->second;
  const double scale = 1.0 / std::sqrt(-level);
  out.normalized_min = out.min_grad * scale;
  out.normalized_max = out.max_grad * scale;
  return out;
}

double ridge_valley_residual(const FunctionField& field, std::span<const double> x) {
  const Vec a = field.gradient_at(x);
  const Vec b = scaled(field.hessian_at(x).apply(a), 2.0);
  // sum of squared 2x2 minors avoids the cancellation in |a|²|b|² - ⟨a,b⟩²
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double minor = a[i] * b[j] - a[j] * b[i];
      s += minor * minor;
    }
  }
  return std::sqrt(s);
}

SpherePointRelation sphere_point_relation(const FunctionField& field, std::span<const double> nu) {
  if (!field.function().is_polynomial()) throw ConfigError("sphere point relation requires a polynomial function");
  const auto hd = homogeneous_decomposition(field.function().numerator());
  const Polynomial& fp = hd.leading_part();
  const std::size_t n = fp.dimension();
  SymMatrix h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Polynomial di = fp.derivative(i);
    for (std::size_t j = i; j < n; ++j) h(i, j) = di.derivative(j).evaluate(nu);
  }
  SpherePointRelation out;
  out.degree = hd.leading_degree();
  out.rayleigh = h.quadratic_form(nu);
  const double p = out.degree;
  out.predicted = p * (p - 1) * fp.evaluate(nu);
  return out;
}

// ---------------------------------------------------------------------------

LimitReport analyze_trajectory(const Trajectory& traj, std::size_t windows) {
  LimitReport report;
  auto attempt = [&report](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      report.errors.push_back(std::string(what) + ": " + e.what());
    }
  };
  attempt("secant_limit", [&] { report.secant = estimate_secant_limit(traj); });
  if (!traj.samples.empty()) report.unit_grad_limit = traj.samples.back().unit_grad;
  attempt("exponent_fit", [&] { report.fit = estimate_exponents(traj, windows); });
  attempt("hessian_direction", [&] { report.hessian = estimate_hessian_direction_limit(traj, windows); });
  if (report.secant && report.hessian) {
    report.eigen_residual_final = eigen_direction_residual(report.hessian->direction, report.secant->nu);
    report.eigenvalue_estimate = report.hessian->direction.quadratic_form(report.secant->nu);
  }
  attempt("eigen_direction_check", [&] { report.eigen_check = eigen_direction_check(traj, windows); });
  if (report.fit) attempt("estimates", [&] { report.estimates = verify_estimates(traj, *report.fit, windows); });
  attempt("bochnak_lojasiewicz", [&] { report.bl = bochnak_lojasiewicz_constant(traj, windows); });
  return report;
}

}  // namespace nonosc
