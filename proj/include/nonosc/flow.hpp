#pragma once

// Unit-gradient flow of a rational function, the divided (blown-up) field
// at a critical point, and monotonicity probes along trajectories.

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nonosc/algebra.hpp"
#include "nonosc/symlin.hpp"

namespace nonosc {

/// f together with its exact symbolic gradient and Hessian, plus
/// floating-point images of all three.
class FunctionField {
 public:
  explicit FunctionField(RationalFunction f);

  std::size_t dimension() const { return f_.dimension(); }
  const RationalFunction& function() const { return f_; }
  const std::vector<RationalFunction>& gradient() const { return grad_; }
  const SymmetricArray<RationalFunction>& hessian() const { return hess_; }

  double value_at(std::span<const double> x) const { return f_c_.evaluate(x); }
  Vec gradient_at(std::span<const double> x) const;
  SymMatrix hessian_at(std::span<const double> x) const;

 private:
  RationalFunction f_;
  std::vector<RationalFunction> grad_;
  SymmetricArray<RationalFunction> hess_;
  CompiledRational f_c_;
  std::vector<CompiledRational> grad_c_;
  std::vector<CompiledRational> hess_c_;  // packed upper triangle
};

/// Throws ConfigError for a constant f.
FunctionField make_field(const RationalFunction& f);

/// Metric quantities carried by samples of a Riemannian flow.
struct MetricSampleData {
  Vec euclidean_grad;          // ∂f
  SymMatrix metric;            // g(x)
  SymMatrix metric_inverse;    // g(x)^-1
  double hess_norm = 0.0;      // Frobenius norm h of Hess_g entries
  SymMatrix normalized_hess;   // h^-1 Hess_g
};

/// One integration state. In a Riemannian flow, grad is the metric gradient
/// g^-1 ∂f, grad_norm its g-length, unit_grad the g-unit gradient and hess
/// the connection Hessian; dr_f is always the coordinate radial derivative
/// ⟨∂f, x/r⟩ and tangential_grad is ∂f - dr_f x/r.
struct TrajectorySample {
  double s = 0.0;
  Vec x;
  double r = 0.0;
  double f_val = 0.0;
  Vec grad;
  double grad_norm = 0.0;
  Vec unit_grad;
  double dr_f = 0.0;
  Vec tangential_grad;
  SymMatrix hess;
  std::optional<MetricSampleData> metric;
};

/// The vector field a trajectory integrates. Implementations are immutable
/// and may be shared between threads.
class FlowModel {
 public:
  virtual ~FlowModel() = default;
  virtual std::size_t dimension() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  /// Unit flow direction at x; throws DomainError at a critical point.
  virtual Vec direction(std::span<const double> x) const = 0;
  /// Full sample at x (s left at 0).
  virtual TrajectorySample sample(std::span<const double> x) const = 0;
};

class EuclideanFlow : public FlowModel {
 public:
  explicit EuclideanFlow(FunctionField field) : field_(std::move(field)) {}

  const FunctionField& field() const { return field_; }
  std::size_t dimension() const override { return field_.dimension(); }
  double value(std::span<const double> x) const override { return field_.value_at(x); }
  Vec direction(std::span<const double> x) const override;
  TrajectorySample sample(std::span<const double> x) const override;

 private:
  FunctionField field_;
};

/// Fills r, dr_f and tangential_grad from x and the coordinate gradient.
void set_radial_parts(TrajectorySample& sample, std::span<const double> coordinate_grad);

enum class FlowDirection { inward, outward };
enum class Termination { reached_r_limit, gradient_below_floor, max_steps, left_domain, pole_encountered };

std::string to_string(FlowDirection d);
std::string to_string(Termination t);

struct IntegrationOptions {
  FlowDirection direction = FlowDirection::inward;
  double r_limit = 1e-6;
  double rel_tol = 1e-10;
  double abs_tol = 1e-20;
  std::size_t max_steps = 200000;
  double grad_floor = 1e-13;
  /// Accepted steps before strict radial monotonicity is enforced.
  std::size_t transient_steps = 50;
  /// Largest ratio between consecutive radii.
  double radius_ratio = 1.05;
  /// Step cap h <= curvature_factor * grad_norm / |Hs|_F.
  double curvature_factor = 0.1;
};

struct Trajectory {
  FlowDirection direction = FlowDirection::inward;
  std::vector<TrajectorySample> samples;
  Termination termination = Termination::max_steps;
  /// True when f(x0) > 0 and the flow of -f was integrated instead.
  bool flipped = false;
  /// First sample of the strictly radially monotone tail.
  std::size_t tail_begin = 0;
  std::size_t rejected_steps = 0;
  /// Linear change of coordinates x = A·y when samples are stated in
  /// coordinates y other than the input ones.
  std::optional<Matrix> coordinate_frame;
  /// The (possibly sign-flipped) field that produced the samples.
  std::shared_ptr<const FlowModel> model;

  std::span<const TrajectorySample> tail() const {
    return std::span<const TrajectorySample>(samples).subspan(tail_begin);
  }
};

/// Integrates γ' = unit flow direction of model from x0; model's value at
/// x0 must be negative.
Trajectory integrate_flow(std::shared_ptr<const FlowModel> model, std::span<const double> x0,
                          const IntegrationOptions& opts);

/// Euclidean unit-gradient flow. Integrates -f instead when f(x0) > 0.
Trajectory integrate_unit_gradient(const FunctionField& field, std::span<const double> x0,
                                   const IntegrationOptions& opts);

/// Samples of the tail at the given radii. x(r) and s(r) are interpolated
/// with monotone cubics and all derived quantities are re-evaluated at the
/// interpolated point, pulled radially onto |x| = r.
std::vector<TrajectorySample> reparameterize_by_radius(const Trajectory& traj, std::span<const double> grid);

/// n geometric values from hi down to lo.
std::vector<double> geometric_grid(double hi, double lo, std::size_t n);

// ---------------------------------------------------------------------------
// Blow-up at the origin

/// The gradient field in coordinates x = r·u, multiplied by (p-1)·r^(2-p) so
/// that it stays analytic up to r = 0 and its r = 0 restriction is
/// u' = Hs(f_p)(u)u - ⟨Hs(f_p)(u)u, u⟩u, r' = r⟨Hs(f_p)(u)u, u⟩.
class DividedField {
 public:
  struct Rate {
    Vec u_dot;
    double r_dot;
  };

  unsigned leading_degree() const { return p_; }
  const Polynomial& leading_part() const { return leading_; }
  std::size_t dimension() const { return leading_.dimension(); }

  Rate evaluate(std::span<const double> u, double r) const;
  /// Hs(f_p)(u).
  SymMatrix leading_hessian(std::span<const double> u) const;

 private:
  friend DividedField divided_field(const FunctionField& field);

  struct Part {
    unsigned degree;
    std::vector<CompiledPolynomial> gradient;
  };

  unsigned p_ = 0;
  Polynomial leading_;
  std::vector<Part> parts_;
  std::vector<CompiledPolynomial> leading_hessian_;  // packed upper triangle
};

/// Throws ConfigError for a non-polynomial f and DomainError when the
/// lowest-degree part has degree < 2.
DividedField divided_field(const FunctionField& field);

struct Linearization {
  Vec equilibrium;
  double equilibrium_residual = 0.0;
  Matrix jacobian;  // chart (v, r): v in the orthogonal complement of ν, r last
  std::vector<std::complex<double>> eigenvalues;
  /// {h₁} ∪ {(p-1)hᵢ - h₁} from Hs(f_p)(ν), ascending.
  std::vector<double> predicted;
  /// Largest distance between sorted computed and predicted eigenvalues.
  double prediction_gap = 0.0;
};

/// Follows the r = 0 sphere field from a nearby direction (explicit steps
/// scaled by the leading Hessian) until its residual is at most tol.
/// Throws NumericalError when max_iterations do not suffice.
Vec refine_sphere_equilibrium(const DividedField& df, std::span<const double> guess, double tol = 1e-12,
                              std::size_t max_iterations = 100000);

/// Finite-difference Jacobian (central, step 1e-6) of the divided field at
/// (ν, 0). Throws DomainError when ν is not an equilibrium (residual > 1e-8).
Linearization divided_field_linearization(const DividedField& df, std::span<const double> nu);

// ---------------------------------------------------------------------------
// Monotonicity

enum class MonotonicityVerdict { monotone, constant, few_changes, oscillation_suspected };
std::string to_string(MonotonicityVerdict v);

struct MonotonicityReport {
  std::size_t samples = 0;
  std::size_t sign_changes = 0;
  MonotonicityVerdict verdict = MonotonicityVerdict::monotone;
};

/// Counts strict sign changes of successive differences of ψ over the last
/// tail_fraction of the trajectory tail. Differences below 1e-13 times the
/// largest |ψ| count as zero.
MonotonicityReport monotonicity_report(const Trajectory& traj, const RationalFunction& psi, double tail_fraction,
                                       std::size_t change_cap = 3);

}  // namespace nonosc
