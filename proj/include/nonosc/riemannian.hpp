#pragma once

// Metrics with rational-function entries: Levi-Civita connection, metric
// gradient and connection Hessian, and the unit-gradient flow for g.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nonosc/asymptotics.hpp"
#include "nonosc/flow.hpp"

namespace nonosc {

class MetricField {
 public:
  /// entries(i, j) = g_ij; symmetric by construction.
  explicit MetricField(SymmetricArray<RationalFunction> entries);

  std::size_t dimension() const { return entries_.dimension(); }
  const SymmetricArray<RationalFunction>& entries() const { return entries_; }

  /// g(x) without the positive-definiteness check.
  SymMatrix evaluate(std::span<const double> x) const;
  /// ∂_l g(x) for l = 0..n-1.
  std::vector<SymMatrix> derivatives(std::span<const double> x) const;

 private:
  SymmetricArray<RationalFunction> entries_;
  std::vector<CompiledRational> compiled_;                 // packed
  std::vector<std::vector<CompiledRational>> derivative_;  // [l][packed]
};

/// Builds a metric from a square table of entries; the upper triangle is
/// authoritative.
MetricField make_metric(const std::vector<std::vector<RationalFunction>>& table);

struct MetricValue {
  SymMatrix g;
  SymMatrix g_inv;
  Matrix chol;  // lower Cholesky factor L, g = L L^T
};

/// g^-1 d together with its g-length (d^T g^-1 d)^(1/2), both through
/// triangular solves with L.
struct MetricGradient {
  Vec grad;
  double length = 0.0;
};
MetricGradient metric_gradient(const MetricValue& m, std::span<const double> d);

/// Throws DegenerateMetricError when the smallest eigenvalue of g(x) is not
/// above 1e-10, PoleError at a pole of an entry.
MetricValue metric_at(const MetricField& g, std::span<const double> x);

/// Γ^k_ij at one point; gamma[k] is symmetric in (i, j).
struct ChristoffelData {
  std::vector<SymMatrix> gamma;

  double operator()(std::size_t k, std::size_t i, std::size_t j) const { return gamma[k](i, j); }
  /// Γ(X, Y)^k = Γ^k_ij X^i Y^j.
  Vec contract(std::span<const double> x, std::span<const double> y) const;
};

ChristoffelData christoffel(const MetricField& g, std::span<const double> x);

/// g^-1 ∂f.
Vec riemannian_gradient(const FunctionField& field, const MetricField& g, std::span<const double> x);
/// (∂f^T g^-1 ∂f)^(1/2).
double riemannian_gradient_norm(const FunctionField& field, const MetricField& g, std::span<const double> x);
/// ∂_i∂_j f - Γ^k_ij ∂_k f.
SymMatrix riemannian_hessian(const FunctionField& field, const MetricField& g, std::span<const double> x);

/// D_X Y = dY·X + Γ(X, Y), with jacobian(i, j) = ∂_j Y^i.
Vec covariant_derivative(const MetricField& g, std::span<const double> x, std::span<const double> X,
                         std::span<const double> Y, const Matrix& jacobian);

/// Largest |X⟨Y,Z⟩_g - ⟨D_X Y, Z⟩_g - ⟨Y, D_X Z⟩_g| over random constant
/// fields X, Y, Z of unit length, the directional derivative by central
/// differences with the given step.
double metric_compatibility_residual(const MetricField& g, std::span<const double> x, std::uint64_t seed,
                                     std::size_t trials = 8, double step = 1e-5);

/// Unit gradient flow for g, samples carrying metric data.
class RiemannianFlow : public FlowModel {
 public:
  /// frame: x = A·y; samples are stated in y.
  RiemannianFlow(FunctionField field, MetricField metric, std::optional<Matrix> frame = std::nullopt);

  std::size_t dimension() const override { return field_.dimension(); }
  double value(std::span<const double> y) const override;
  Vec direction(std::span<const double> y) const override;
  TrajectorySample sample(std::span<const double> y) const override;

  const FunctionField& field() const { return field_; }
  const MetricField& metric() const { return metric_; }

 private:
  Vec to_input(std::span<const double> y) const;

  FunctionField field_;
  MetricField metric_;
  std::optional<Matrix> frame_;      // A
  std::optional<Matrix> frame_inv_;  // A^-1 = L^T
};

/// Inward flow only. When g(0) differs from the identity the flow runs in
/// coordinates y = L^T x, L the Cholesky factor of g(0), so that the metric
/// is Euclidean at the origin; the frame is recorded in the trajectory.
Trajectory integrate_unit_gradient_riemannian(const FunctionField& field, const MetricField& g,
                                              std::span<const double> x0, const IntegrationOptions& opts);

/// |S v - ⟨S v, v⟩ v| / |S v| for a square, not necessarily symmetric S.
double endomorphism_direction_residual(const Matrix& s, std::span<const double> v);

struct RiemannianReport {
  LimitReport limits;  // eigen residuals on the coordinate matrix of Hess_g
  /// Secant limit mapped back to the input coordinates.
  std::optional<Vec> nu_input;
  /// Residuals of g^-1 Hess_g at x/r, per window limit end.
  std::vector<double> endomorphism_residuals;
  std::optional<double> endomorphism_residual_final;
};

RiemannianReport analyze_riemannian(const Trajectory& traj, std::size_t windows = 4);

}  // namespace nonosc
