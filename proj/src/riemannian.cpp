#include "nonosc/riemannian.hpp"

#include <cmath>
#include <random>

#include "nonosc/errors.hpp"

namespace nonosc {

MetricField::MetricField(SymmetricArray<RationalFunction> entries) : entries_(std::move(entries)) {
  const std::size_t n = entries_.dimension();
  for (const auto& e : entries_.packed()) compiled_.emplace_back(e);
  derivative_.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    for (const auto& e : entries_.packed()) derivative_[l].emplace_back(e.derivative(l));
  }
}

SymMatrix MetricField::evaluate(std::span<const double> x) const {
  const std::size_t n = dimension();
  SymMatrix g(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) g(i, j) = compiled_[k++].evaluate(x);
  }
  return g;
}

std::vector<SymMatrix> MetricField::derivatives(std::span<const double> x) const {
  const std::size_t n = dimension();
  std::vector<SymMatrix> out(n, SymMatrix(n));
  for (std::size_t l = 0; l < n; ++l) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) out[l](i, j) = derivative_[l][k++].evaluate(x);
    }
  }
  return out;
}

MetricField make_metric(const std::vector<std::vector<RationalFunction>>& table) {
  const std::size_t n = table.size();
  if (n == 0) throw ConfigError("metric has no entries");
  for (const auto& row : table) {
    if (row.size() != n) throw ConfigError("metric table must be square");
  }
  SymmetricArray<RationalFunction> entries(n, RationalFunction(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      if (table[i][j].dimension() != n) throw ConfigError("metric entry has the wrong number of variables");
      entries(i, j) = table[i][j];
    }
  }
  return MetricField(std::move(entries));
}

MetricValue metric_at(const MetricField& g, std::span<const double> x) {
  MetricValue out{g.evaluate(x), {}, {}};
  const auto eig = eigen_decomposition(out.g);
  if (!(eig.values.front() > 1e-10)) {
    throw DegenerateMetricError("metric is not positive definite at the point (smallest eigenvalue " +
                                std::to_string(eig.values.front()) + ")");
  }
  out.chol = cholesky(out.g);
  out.g_inv = spd_inverse(out.g);
  return out;
}

MetricGradient metric_gradient(const MetricValue& m, std::span<const double> d) {
  const Matrix& l = m.chol;
  const std::size_t n = d.size();
  Vec z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = d[i];
    for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * z[k];
    z[i] = v / l(i, i);
  }
  MetricGradient out{Vec(n), norm(z)};
  for (std::size_t i = n; i-- > 0;) {
    double v = z[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * out.grad[k];
    out.grad[i] = v / l(i, i);
  }
  return out;
}

Vec ChristoffelData::contract(std::span<const double> x, std::span<const double> y) const {
  Vec out(gamma.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) out[k] = dot(gamma[k].apply(x), y);
  return out;
}

ChristoffelData christoffel(const MetricField& g, std::span<const double> x) {
  const std::size_t n = g.dimension();
  const MetricValue m = metric_at(g, x);
  const auto dg = g.derivatives(x);
  ChristoffelData out{std::vector<SymMatrix>(n, SymMatrix(n))};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      // first kind: [ij, l] = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
      Vec first(n);
      for (std::size_t l = 0; l < n; ++l) first[l] = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
      for (std::size_t k = 0; k < n; ++k) {
        double v = 0.0;
        for (std::size_t l = 0; l < n; ++l) v += m.g_inv(k, l) * first[l];
        out.gamma[k](i, j) = v;
      }
    }
  }
  return out;
}

Vec riemannian_gradient(const FunctionField& field, const MetricField& g, std::span<const double> x) {
  return metric_gradient(metric_at(g, x), field.gradient_at(x)).grad;
}

double riemannian_gradient_norm(const FunctionField& field, const MetricField& g, std::span<const double> x) {
  return metric_gradient(metric_at(g, x), field.gradient_at(x)).length;
}

SymMatrix riemannian_hessian(const FunctionField& field, const MetricField& g, std::span<const double> x) {
  const SymMatrix hs = field.hessian_at(x);
  const Vec d = field.gradient_at(x);
  const ChristoffelData gamma = christoffel(g, x);
  const std::size_t n = field.dimension();
  SymMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = hs(i, j);
      for (std::size_t k = 0; k < n; ++k) v -= gamma(k, i, j) * d[k];
      out(i, j) = v;
    }
  }
  return out;
}

Vec covariant_derivative(const MetricField& g, std::span<const double> x, std::span<const double> X,
                         std::span<const double> Y, const Matrix& jacobian) {
  return add(jacobian.apply(X), christoffel(g, x).contract(X, Y));
}

double metric_compatibility_residual(const MetricField& g, std::span<const double> x, std::uint64_t seed,
                                     std::size_t trials, double step) {
  const std::size_t n = g.dimension();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto random_unit = [&] {
    Vec v(n);
    for (double& c : v) c = gauss(rng);
    return normalized(v);
  };
  const MetricValue m = metric_at(g, x);
  const ChristoffelData gamma = christoffel(g, x);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vec X = random_unit(), Y = random_unit(), Z = random_unit();
    Vec plus(x.begin(), x.end()), minus(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) {
      plus[i] += step * X[i];
      minus[i] -= step * X[i];
    }
    const double pairing_plus = dot(g.evaluate(plus).apply(Y), Z);
    const double pairing_minus = dot(g.evaluate(minus).apply(Y), Z);
    const double lhs = (pairing_plus - pairing_minus) / (2 * step);
    // constant coordinate fields: D_X Y = Γ(X, Y)
    const double rhs = dot(m.g.apply(gamma.contract(X, Y)), Z) + dot(m.g.apply(Y), gamma.contract(X, Z));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Flow

RiemannianFlow::RiemannianFlow(FunctionField field, MetricField metric, std::optional<Matrix> frame)
    : field_(std::move(field)), metric_(std::move(metric)), frame_(std::move(frame)) {
  if (field_.dimension() != metric_.dimension()) throw ConfigError("metric and function dimensions differ");
  if (frame_) {
    // A = L^-T is upper triangular; its inverse is L^T
    frame_inv_ = lower_triangular_inverse(frame_->transpose()).transpose();
  }
}

Vec RiemannianFlow::to_input(std::span<const double> y) const {
  if (!frame_) return Vec(y.begin(), y.end());
  return frame_->apply(y);
}

double RiemannianFlow::value(std::span<const double> y) const { return field_.value_at(to_input(y)); }

Vec RiemannianFlow::direction(std::span<const double> y) const {
  const Vec x = to_input(y);
  auto [grad, len] = metric_gradient(metric_at(metric_, x), field_.gradient_at(x));
  if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("gradient vanishes or is not finite");
  if (frame_inv_) grad = frame_inv_->apply(grad);
  for (double& v : grad) v /= len;
  return grad;
}

TrajectorySample RiemannianFlow::sample(std::span<const double> y) const {
  const Vec x = to_input(y);
  const MetricValue m = metric_at(metric_, x);
  Vec d = field_.gradient_at(x);
  SymMatrix hess = riemannian_hessian(field_, metric_, x);
  auto [grad, len] = metric_gradient(m, d);

  MetricSampleData data;
  if (frame_) {
    // tensors pull back by A, vectors push forward by A^-1
    const Matrix& a = *frame_;
    d = a.apply_transpose(d);
    hess = congruence(hess, a);
    grad = frame_inv_->apply(grad);
    data.metric = congruence(m.g, a);
    data.metric_inverse = congruence(m.g_inv, frame_inv_->transpose());
  } else {
    data.metric = m.g;
    data.metric_inverse = m.g_inv;
  }
  data.euclidean_grad = d;
  data.hess_norm = hess.frobenius_norm();
  if (data.hess_norm > 0.0) data.normalized_hess = hess.scaled(1.0 / data.hess_norm);

  TrajectorySample s;
  s.x.assign(y.begin(), y.end());
  s.f_val = field_.value_at(x);
  s.grad = std::move(grad);
  s.grad_norm = len;
  s.unit_grad = len > 0 ? scaled(s.grad, 1.0 / len) : Vec(y.size(), 0.0);
  s.hess = std::move(hess);
  set_radial_parts(s, data.euclidean_grad);
  s.metric = std::move(data);
  return s;
}

Trajectory integrate_unit_gradient_riemannian(const FunctionField& field, const MetricField& g,
                                              std::span<const double> x0, const IntegrationOptions& opts) {
  if (opts.direction != FlowDirection::inward) {
    throw ConfigError("metric flows are analyzed toward the origin only");
  }
  const std::size_t n = field.dimension();
  if (x0.size() != n) throw ConfigError("start point has the wrong dimension");

  const Vec origin(n, 0.0);
  const MetricValue at_origin = metric_at(g, origin);
  std::optional<Matrix> frame;
  Vec y0(x0.begin(), x0.end());
  if (distance(at_origin.g, SymMatrix::identity(n)) != 0.0) {
    const Matrix l = cholesky(at_origin.g);
    frame = lower_triangular_inverse(l).transpose();
    y0 = l.apply_transpose(x0);
  }

  const double f0 = field.value_at(x0);
  if (f0 == 0.0) throw DomainError("flow must start off the zero level of the function");
  const bool flip = f0 > 0.0;
  auto model = std::make_shared<RiemannianFlow>(flip ? FunctionField(-field.function()) : field, g, frame);
  Trajectory traj = integrate_flow(model, y0, opts);
  traj.flipped = flip;
  traj.coordinate_frame = frame;
  return traj;
}

// ---------------------------------------------------------------------------
// Analysis

double endomorphism_direction_residual(const Matrix& s, std::span<const double> v) {
  const Vec sv = s.apply(v);
  const double len = norm(sv);
  if (len == 0.0) return 0.0;
  const double rayleigh = dot(sv, v);
  return std::min(1.0, norm(subtract(sv, scaled(v, rayleigh))) / len);
}

RiemannianReport analyze_riemannian(const Trajectory& traj, std::size_t windows) {
  RiemannianReport out;
  out.limits = analyze_trajectory(traj, windows);
  if (out.limits.secant) {
    Vec nu = out.limits.secant->nu;
    if (traj.coordinate_frame) nu = normalized(traj.coordinate_frame->apply(nu));
    out.nu_input = std::move(nu);
  }
  for (const Window& w : dyadic_windows(traj, windows)) {
    const auto& s = traj.samples[w.limit_index()];
    if (!s.metric) continue;
    const Matrix endo = s.metric->metric_inverse.to_dense() * s.hess.to_dense();
    out.endomorphism_residuals.push_back(endomorphism_direction_residual(endo, scaled(s.x, 1.0 / s.r)));
  }
  if (!out.endomorphism_residuals.empty()) out.endomorphism_residual_final = out.endomorphism_residuals.back();
  return out;
}

}  // namespace nonosc
