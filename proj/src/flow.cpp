#include "nonosc/flow.hpp"

// pchip.hpp in Boost 1.74 calls isnan unqualified
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "nonosc/errors.hpp"

namespace nonosc {

namespace {

double signed_ipow(double base, unsigned e) {
  double result = 1.0;
  while (e != 0) {
    if (e & 1U) result *= base;
    base *= base;
    e >>= 1U;
  }
  return result;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------
// FunctionField

FunctionField::FunctionField(RationalFunction f)
    : f_(std::move(f)), grad_(nonosc::gradient(f_)), hess_(nonosc::hessian(f_)), f_c_(f_) {
  for (const auto& g : grad_) grad_c_.emplace_back(g);
  for (const auto& h : hess_.packed()) hess_c_.emplace_back(h);
}

Vec FunctionField::gradient_at(std::span<const double> x) const {
  Vec g(grad_c_.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_c_[i].evaluate(x);
  return g;
}

SymMatrix FunctionField::hessian_at(std::span<const double> x) const {
  const std::size_t n = dimension();
  SymMatrix h(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      h(i, j) = hess_c_[SymmetricArray<double>::packed_index(n, i, j)].evaluate(x);
    }
  }
  return h;
}

FunctionField make_field(const RationalFunction& f) {
  if (f.is_constant()) throw ConfigError("function is constant; its gradient flow is trivial");
  return FunctionField(f);
}

// ---------------------------------------------------------------------------
// Euclidean model

void set_radial_parts(TrajectorySample& sample, std::span<const double> coordinate_grad) {
  sample.r = norm(sample.x);
  if (sample.r == 0.0) {
    sample.dr_f = 0.0;
    sample.tangential_grad.assign(coordinate_grad.begin(), coordinate_grad.end());
    return;
  }
  sample.dr_f = dot(coordinate_grad, sample.x) / sample.r;
  sample.tangential_grad.resize(coordinate_grad.size());
  for (std::size_t i = 0; i < coordinate_grad.size(); ++i) {
    sample.tangential_grad[i] = coordinate_grad[i] - sample.dr_f * sample.x[i] / sample.r;
  }
}

Vec EuclideanFlow::direction(std::span<const double> x) const {
  Vec g = field_.gradient_at(x);
  const double len = norm(g);
  if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("gradient vanishes or is not finite");
  for (double& v : g) v /= len;
  return g;
}

TrajectorySample EuclideanFlow::sample(std::span<const double> x) const {
  TrajectorySample s;
  s.x.assign(x.begin(), x.end());
  s.f_val = field_.value_at(x);
  s.grad = field_.gradient_at(x);
  s.grad_norm = norm(s.grad);
  s.unit_grad = s.grad_norm > 0 ? scaled(s.grad, 1.0 / s.grad_norm) : Vec(x.size(), 0.0);
  s.hess = field_.hessian_at(x);
  set_radial_parts(s, s.grad);
  return s;
}

std::string to_string(FlowDirection d) { return d == FlowDirection::inward ? "inward" : "outward"; }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::reached_r_limit: return "reached_r_limit";
    case Termination::gradient_below_floor: return "gradient_below_floor";
    case Termination::max_steps: return "max_steps";
    case Termination::left_domain: return "left_domain";
    case Termination::pole_encountered: return "pole_encountered";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Integrator

namespace {

using Stepper = boost::numeric::odeint::runge_kutta_dopri5<Vec>;

void validate(const IntegrationOptions& opts) {
  if (!(opts.r_limit > 0.0) || !std::isfinite(opts.r_limit)) throw ConfigError("r_limit must be positive");
  if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (opts.max_steps == 0) throw ConfigError("max_steps must be positive");
  if (!(opts.radius_ratio > 1.0)) throw ConfigError("radius_ratio must exceed 1");
  if (!(opts.curvature_factor > 0.0)) throw ConfigError("curvature_factor must be positive");
}

bool inward(const IntegrationOptions& opts) { return opts.direction == FlowDirection::inward; }

// Signed distance to the radius limit: positive while the limit has not been reached.
double to_limit(double r, const IntegrationOptions& opts) {
  return inward(opts) ? r - opts.r_limit : opts.r_limit - r;
}

double step_cap(const TrajectorySample& s, const IntegrationOptions& opts) {
  double cap = inward(opts) ? s.r * (1.0 - 1.0 / opts.radius_ratio) : s.r * (opts.radius_ratio - 1.0);
  const double h = s.hess.frobenius_norm();
  if (h > 0.0 && std::isfinite(h)) cap = std::min(cap, opts.curvature_factor * s.grad_norm / h);
  return cap;
}

std::size_t monotone_tail_begin(const std::vector<TrajectorySample>& samples, FlowDirection direction) {
  std::size_t begin = samples.size() - 1;
  while (begin > 0) {
    const double prev = samples[begin - 1].r;
    const double cur = samples[begin].r;
    if (direction == FlowDirection::inward ? !(cur < prev) : !(cur > prev)) break;
    --begin;
  }
  return begin;
}

}  // namespace

Trajectory integrate_flow(std::shared_ptr<const FlowModel> model, std::span<const double> x0,
                          const IntegrationOptions& opts) {
  validate(opts);
  if (x0.size() != model->dimension()) throw ConfigError("start point has the wrong dimension");
  if (!all_finite(x0)) throw ConfigError("start point is not finite");

  Trajectory traj;
  traj.direction = opts.direction;
  traj.model = model;

  TrajectorySample first = model->sample(x0);
  if (!(first.f_val < 0.0)) throw DomainError("flow must start where the function is negative");
  if (!(first.grad_norm > opts.grad_floor)) throw DomainError("start point is a critical point");
  if (first.r == 0.0) throw DomainError("start point is the origin");
  if (!(to_limit(first.r, opts) > 0.0)) throw DomainError("start point already lies beyond r_limit");
  const double r_start = first.r;
  traj.samples.push_back(std::move(first));

  Stepper stepper;
  auto system = [&model](const Vec& x, Vec& dxdt, double) { dxdt = model->direction(x); };

  Vec x(x0.begin(), x0.end());
  Vec dxdt = model->direction(x);
  Vec x_new(x.size()), dxdt_new(x.size()), err(x.size());
  double h = 0.01 * r_start;
  std::size_t landing_attempts = 0;
  traj.termination = Termination::max_steps;

  for (std::size_t accepted = 0; accepted < opts.max_steps;) {
    const TrajectorySample& cur = traj.samples.back();
    const double h_min = 1e-12 * cur.r;
    h = std::min(h, step_cap(cur, opts));

    bool pole = false;
    TrajectorySample next;
    try {
      stepper.do_step(system, x, dxdt, cur.s, x_new, dxdt_new, h, err);
      if (!all_finite(x_new) || !all_finite(dxdt_new)) throw PoleError("non-finite state", x_new);
      next = model->sample(x_new);
      if (!std::isfinite(next.f_val) || !std::isfinite(next.grad_norm)) throw PoleError("non-finite sample", x_new);
    } catch (const PoleError&) {
      pole = true;
    } catch (const DegenerateMetricError&) {
      throw;
    } catch (const DomainError&) {
      // a stage landed on a critical point; shrink like a pole
      pole = true;
    }
    if (pole) {
      ++traj.rejected_steps;
      h *= 0.25;
      if (h < h_min) {
        traj.termination = Termination::pole_encountered;
        break;
      }
      continue;
    }

    // RMS of the error vector: invariant under rotations of the coordinates
    const double rms = norm(err) / std::sqrt(static_cast<double>(x.size()));
    const double err_norm = rms / (opts.abs_tol + opts.rel_tol * std::max(cur.r, next.r));
    if (err_norm > 1.0) {
      ++traj.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
      if (h < h_min) throw NumericalError("step size underflow", x);
      continue;
    }

    if (!(next.f_val > cur.f_val)) {
      ++traj.rejected_steps;
      h *= 0.5;
      if (h < h_min) throw NumericalError("step size underflow: function no longer increases", x);
      continue;
    }

    const bool radial_ok = inward(opts) ? next.r < cur.r : next.r > cur.r;
    if (accepted >= opts.transient_steps && !radial_ok) {
      ++traj.rejected_steps;
      h *= 0.5;
      if (h < h_min) {
        traj.termination = Termination::left_domain;
        break;
      }
      continue;
    }

    // land on r_limit by secant correction of the step length
    const double remaining = to_limit(next.r, opts);
    const double tolerance = 1e-10 * opts.r_limit;
    if (remaining < -tolerance && landing_attempts < 50) {
      ++landing_attempts;
      const double before = to_limit(cur.r, opts);
      h *= before / (before - remaining);
      continue;
    }

    next.s = cur.s + h;
    traj.samples.push_back(std::move(next));
    x.swap(x_new);
    dxdt.swap(dxdt_new);
    ++accepted;
    landing_attempts = 0;
    h *= err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);

    const TrajectorySample& last = traj.samples.back();
    if (to_limit(last.r, opts) <= tolerance) {
      traj.termination = Termination::reached_r_limit;
      break;
    }
    if (last.grad_norm < opts.grad_floor) {
      traj.termination = Termination::gradient_below_floor;
      break;
    }
    if (inward(opts) ? last.r > 1e3 * r_start : last.r < 1e-3 * r_start) {
      traj.termination = Termination::left_domain;
      break;
    }
  }

  traj.tail_begin = monotone_tail_begin(traj.samples, traj.direction);
  return traj;
}

Trajectory integrate_unit_gradient(const FunctionField& field, std::span<const double> x0,
                                   const IntegrationOptions& opts) {
  if (x0.size() != field.dimension()) throw ConfigError("start point has the wrong dimension");
  const double f0 = field.value_at(x0);
  if (f0 == 0.0) throw DomainError("flow must start off the zero level of the function");
  if (f0 > 0.0) {
    Trajectory traj = integrate_flow(std::make_shared<EuclideanFlow>(FunctionField(-field.function())), x0, opts);
    traj.flipped = true;
    return traj;
  }
  return integrate_flow(std::make_shared<EuclideanFlow>(field), x0, opts);
}

// ---------------------------------------------------------------------------
// Radius reparameterization

std::vector<double> geometric_grid(double hi, double lo, std::size_t n) {
  if (!(hi > 0.0) || !(lo > 0.0) || n == 0) throw ConfigError("geometric grid needs positive bounds");
  std::vector<double> grid(n);
  if (n == 1) {
    grid[0] = hi;
    return grid;
  }
  const double step = std::log(lo / hi) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) grid[k] = hi * std::exp(step * static_cast<double>(k));
  grid.front() = hi;
  grid.back() = lo;
  return grid;
}

std::vector<TrajectorySample> reparameterize_by_radius(const Trajectory& traj, std::span<const double> grid) {
  if (!traj.model) throw ConfigError("trajectory has no field attached");
  const auto tail = traj.tail();
  if (tail.size() < 4) throw DomainError("tail too short to reparameterize by radius");
  const std::size_t n = traj.model->dimension();

  // abscissa ascending in r
  std::vector<const TrajectorySample*> ordered;
  for (const auto& s : tail) ordered.push_back(&s);
  if (traj.direction == FlowDirection::inward) std::reverse(ordered.begin(), ordered.end());
  const double r_lo = ordered.front()->r;
  const double r_hi = ordered.back()->r;

  using Interpolant = boost::math::interpolators::pchip<std::vector<double>>;
  auto make = [&](auto value) {
    std::vector<double> rs, ys;
    for (const auto* s : ordered) {
      rs.push_back(s->r);
      ys.push_back(value(*s));
    }
    return Interpolant(std::move(rs), std::move(ys));
  };
  std::vector<Interpolant> coords;
  for (std::size_t i = 0; i < n; ++i) coords.push_back(make([i](const TrajectorySample& s) { return s.x[i]; }));
  const Interpolant arclength = make([](const TrajectorySample& s) { return s.s; });

  const double slack = 1e-12 * r_hi;
  std::vector<TrajectorySample> out;
  out.reserve(grid.size());
  for (double rho : grid) {
    if (!(rho >= r_lo - slack && rho <= r_hi + slack)) {
      throw DomainError("radius " + std::to_string(rho) + " outside the trajectory's range");
    }
    const double at = std::clamp(rho, r_lo, r_hi);
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = coords[i](at);
    const double len = norm(x);
    if (len == 0.0) throw NumericalError("interpolated point collapsed to the origin");
    for (double& v : x) v *= rho / len;
    TrajectorySample sample = traj.model->sample(x);
    sample.s = arclength(at);
    out.push_back(std::move(sample));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Divided field

DividedField divided_field(const FunctionField& field) {
  const RationalFunction& f = field.function();
  if (!f.is_polynomial()) throw ConfigError("blow-up analysis requires a polynomial function");
  const HomogeneousDecomposition hd = homogeneous_decomposition(f.numerator());
  if (hd.leading_degree() < 2) {
    throw DomainError("blow-up requires the origin to be critical: lowest degree is " +
                      std::to_string(hd.leading_degree()));
  }
  DividedField df;
  df.p_ = hd.leading_degree();
  df.leading_ = hd.leading_part();
  for (const auto& part : hd.parts) {
    DividedField::Part compiled{part.degree, {}};
    for (std::size_t i = 0; i < part.part.dimension(); ++i) compiled.gradient.emplace_back(part.part.derivative(i));
    df.parts_.push_back(std::move(compiled));
  }
  const std::size_t n = df.leading_.dimension();
  for (std::size_t i = 0; i < n; ++i) {
    const Polynomial di = df.leading_.derivative(i);
    for (std::size_t j = i; j < n; ++j) df.leading_hessian_.emplace_back(di.derivative(j));
  }
  return df;
}

DividedField::Rate DividedField::evaluate(std::span<const double> u, double r) const {
  const std::size_t n = dimension();
  const double factor = static_cast<double>(p_) - 1.0;
  Rate rate{Vec(n, 0.0), 0.0};
  for (const Part& part : parts_) {
    Vec g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = part.gradient[i].evaluate(u);
    const double radial = dot(g, u);
    const double weight = factor * signed_ipow(r, part.degree - p_);
    rate.r_dot += weight * r * radial;
    for (std::size_t i = 0; i < n; ++i) rate.u_dot[i] += weight * (g[i] - radial * u[i]);
  }
  return rate;
}

SymMatrix DividedField::leading_hessian(std::span<const double> u) const {
  const std::size_t n = dimension();
  SymMatrix h(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) h(i, j) = leading_hessian_[k++].evaluate(u);
  }
  return h;
}

Vec refine_sphere_equilibrium(const DividedField& df, std::span<const double> guess, double tol,
                              std::size_t max_iterations) {
  if (guess.size() != df.dimension()) throw ConfigError("direction has the wrong dimension");
  Vec u = normalized(guess);
  const double factor = static_cast<double>(df.leading_degree()) - 1.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Vec rate = df.evaluate(u, 0.0).u_dot;
    if (norm(rate) <= tol) return u;
    const double stiffness = factor * df.leading_hessian(u).frobenius_norm();
    if (!(stiffness > 0.0) || !std::isfinite(stiffness)) throw NumericalError("sphere field has no usable scale");
    u = normalized(add(u, scaled(rate, 0.5 / stiffness)));
  }
  throw NumericalError("sphere equilibrium refinement did not converge");
}

Linearization divided_field_linearization(const DividedField& df, std::span<const double> nu) {
  const std::size_t n = df.dimension();
  if (nu.size() != n) throw ConfigError("equilibrium has the wrong dimension");
  const Vec v0 = normalized(nu);

  Linearization lin;
  lin.equilibrium = v0;
  lin.equilibrium_residual = norm(df.evaluate(v0, 0.0).u_dot);
  if (lin.equilibrium_residual > 1e-8) {
    throw DomainError("direction is not an equilibrium of the divided field (residual " +
                      std::to_string(lin.equilibrium_residual) + ")");
  }

  // chart: u(v) = sqrt(1 - |v|^2) ν + E v, state (v, r)
  const Matrix e = orthogonal_complement(v0);
  const std::size_t m = n - 1;
  auto rhs = [&](std::span<const double> state) {
    Vec u(n);
    double vv = 0.0;
    for (std::size_t k = 0; k < m; ++k) vv += state[k] * state[k];
    const double c = std::sqrt(1.0 - vv);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = c * v0[i];
      for (std::size_t k = 0; k < m; ++k) u[i] += e(i, k) * state[k];
    }
    const auto rate = df.evaluate(u, state[m]);
    Vec out = e.apply_transpose(rate.u_dot);
    out.push_back(rate.r_dot);
    return out;
  };

  constexpr double step = 1e-6;
  lin.jacobian = Matrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    Vec plus(n, 0.0), minus(n, 0.0);
    plus[col] = step;
    minus[col] = -step;
    const Vec fp = rhs(plus);
    const Vec fm = rhs(minus);
    for (std::size_t row = 0; row < n; ++row) lin.jacobian(row, col) = (fp[row] - fm[row]) / (2 * step);
  }
  lin.eigenvalues = general_eigenvalues(lin.jacobian);

  const SymMatrix hs = df.leading_hessian(v0);
  const double h1 = hs.quadratic_form(v0);
  const auto tangential = eigen_decomposition(congruence(hs, e));
  lin.predicted.push_back(h1);
  for (double hi : tangential.values) lin.predicted.push_back((static_cast<double>(df.leading_degree()) - 1) * hi - h1);
  std::sort(lin.predicted.begin(), lin.predicted.end());
  for (std::size_t k = 0; k < n; ++k) {
    lin.prediction_gap = std::max(lin.prediction_gap, std::abs(lin.eigenvalues[k] - lin.predicted[k]));
  }
  return lin;
}

// ---------------------------------------------------------------------------
// Monotonicity

std::string to_string(MonotonicityVerdict v) {
  switch (v) {
    case MonotonicityVerdict::monotone: return "monotone";
    case MonotonicityVerdict::constant: return "constant";
    case MonotonicityVerdict::few_changes: return "few_changes";
    case MonotonicityVerdict::oscillation_suspected: return "oscillation_suspected";
  }
  return "unknown";
}

MonotonicityReport monotonicity_report(const Trajectory& traj, const RationalFunction& psi, double tail_fraction,
                                       std::size_t change_cap) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ConfigError("tail_fraction must lie in (0, 1]");
  const auto tail = traj.tail();
  const auto count = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(tail.size())));
  if (count < 10) throw DomainError("monotonicity needs at least 10 tail samples");

  const CompiledRational probe(psi);
  std::vector<double> values;
  values.reserve(count);
  double scale = 0.0;
  for (const auto& s : tail.subspan(tail.size() - count)) {
    values.push_back(probe.evaluate(s.x));
    scale = std::max(scale, std::abs(values.back()));
  }

  MonotonicityReport report;
  report.samples = count;
  const double floor = 1e-13 * scale;
  int last_sign = 0;
  bool any_nonzero = false;
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double d = values[k] - values[k - 1];
    if (std::abs(d) <= floor) continue;
    any_nonzero = true;
    const int sign = d > 0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++report.sign_changes;
    last_sign = sign;
  }
  if (!any_nonzero) {
    report.verdict = MonotonicityVerdict::constant;
  } else if (report.sign_changes == 0) {
    report.verdict = MonotonicityVerdict::monotone;
  } else if (report.sign_changes > change_cap) {
    report.verdict = MonotonicityVerdict::oscillation_suspected;
  } else {
    report.verdict = MonotonicityVerdict::few_changes;
  }
  return report;
}

}  // namespace nonosc
