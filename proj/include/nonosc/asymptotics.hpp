#pragma once

// Limit objects and asymptotic estimates read off a computed trajectory.
//
// All estimates are written for f ≈ -a·r^q along the tail, with q = m for
// inward trajectories and q = -m for outward ones.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonosc/flow.hpp"
#include "nonosc/symlin.hpp"

namespace nonosc {

/// A dyadic band of tail radii. Indices are into Trajectory::samples in
/// sample order; limit_index is the sample closest to the limit.
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last sample
  double r_lo = 0.0;
  double r_hi = 0.0;

  std::size_t size() const { return end - begin; }
  std::size_t limit_index() const { return end - 1; }
};

/// Tail split at r_f·2^j (inward) or r_f/2^j (outward), r_f the final
/// radius; ordered away from the limit first. At most max_windows bands,
/// the ones nearest the limit. Bands may hold fewer than 5 samples.
std::vector<Window> dyadic_windows(const Trajectory& traj, std::size_t max_windows);

struct SecantLimit {
  Vec nu;
  double spherical_tail_length = 0.0;
  /// max |u - ν| over the last window.
  double angular_spread = 0.0;
};

/// ν = x/r at the final sample. Throws DomainError with fewer than 20 tail samples.
SecantLimit estimate_secant_limit(const Trajectory& traj);

struct WindowFit {
  double r_lo = 0.0;
  double r_hi = 0.0;
  double slope = 0.0;
  double m = 0.0;
  double a = 0.0;
};

struct NearestRational {
  long numerator = 0;
  long denominator = 1;
  double distance = 0.0;
};

/// Nearest p/q to value with 1 <= q <= max_denominator.
NearestRational nearest_rational(double value, long max_denominator = 12);

struct AsymptoticFit {
  double m = 0.0;
  double a = 0.0;
  double r_lo = 0.0;
  double r_hi = 0.0;
  /// Largest drift of m or a between consecutive windows.
  double residual = 0.0;
  /// Largest absolute residual of the log-log fit in the last window.
  double loglog_residual = 0.0;
  bool outward = false;
  /// Slope of log|∂_r f| against log r in the last window, and its expected
  /// value m-1 (outward: -m-1).
  double radial_slope = 0.0;
  double radial_slope_expected = 0.0;
  bool radial_slope_consistent = false;
  NearestRational rational;
  std::vector<WindowFit> windows;
};

/// Least squares of log|f| against log r per window; m and a from the last
/// window. Throws DomainError when f is not negative on the tail, fewer than
/// 3 windows exist, or a window holds fewer than 5 samples.
AsymptoticFit estimate_exponents(const Trajectory& traj, std::size_t windows = 4);

struct HessianDirectionLimit {
  SymMatrix direction;  // unit Frobenius norm
  double cauchy_gap = 0.0;
  std::vector<SymMatrix> per_window;  // normalized Hessian at each window's limit end
};

/// ℋ from the final sample, Cauchy gap from the previous window's limit end.
HessianDirectionLimit estimate_hessian_direction_limit(const Trajectory& traj, std::size_t windows = 4);

struct EigenWindowResidual {
  double r = 0.0;
  double w_plus_nu = 0.0;   // |w + ν|
  double w_minus_nu = 0.0;  // |w - ν|
  double eigen_residual = 0.0;
};

struct EigenDirectionCheck {
  std::vector<EigenWindowResidual> residual_sequence;
  double final_residual = 0.0;
  double final_w_plus_nu = 0.0;
  double final_w_minus_nu = 0.0;
  /// Literal test |w + ν| < |w - ν| in the last window (limit -ν); inward only,
  /// for outward trajectories the test is |w + ν| < |w - ν| as well.
  bool direction_sign_check = false;
  /// Sign implied by Hs·ν_f ≈ -q(q-1)a r^(q-2) ν_f: w → +ν inward, -ν outward.
  bool estimate_sign_check = false;
  /// Eigen residuals non-increasing across the last three windows.
  bool residuals_non_increasing = false;
};

/// w = Hs·ν_f/|Hs·ν_f| at each window's limit end; eigen residual of the
/// window's normalized Hessian at x/r there. Throws DomainError when Hs·ν_f
/// vanishes.
EigenDirectionCheck eigen_direction_check(const Trajectory& traj, std::size_t windows = 4);

struct EstimateWindow {
  double r = 0.0;
  double grad_radial_ratio = 0.0;
  std::optional<double> consequence1_ratio;
  std::optional<double> euler_like_residual;
  double vca_value = 0.0;
  std::optional<double> scaled_eigenvalue;
};

struct EstimateChecks {
  double q = 0.0;  // m inward, -m outward
  std::vector<EstimateWindow> windows;
  bool consequence1_enabled = true;
  /// |q|·a, the value the asymptotic-critical-value quantity should approach.
  double vca_expected = 0.0;
  double vca_drift = 0.0;
  /// r·dv/dr between the last two windows.
  double vca_log_derivative = 0.0;
  /// Slope of log h against log r over the windows, h the Hessian norm.
  double hessian_slope = 0.0;
  double hessian_slope_expected = 0.0;
  bool hypothesis_flag = false;
};

/// Evaluates the radial-gradient, Hessian and Euler-like estimates at the
/// limit end of each window.
EstimateChecks verify_estimates(const Trajectory& traj, const AsymptoticFit& fit, std::size_t windows = 4);

struct BochnakLojasiewicz {
  double hessian_ratio = 0.0;  // inf r·|Hs·∇f| / |∇f|²
  double value_ratio = 0.0;    // inf r·|∇f| / |f|
};

/// Infima over the samples of the analyzed windows.
BochnakLojasiewicz bochnak_lojasiewicz_constant(const Trajectory& traj, std::size_t windows = 4);

struct LevelExtrema {
  double min_grad = 0.0;
  double max_grad = 0.0;
  double normalized_min = 0.0;  // min·|level|^(-1/2)
  double normalized_max = 0.0;
  Vec argmin;
  Vec argmax;
  std::size_t projected = 0;  // samples whose Newton projection converged
};

/// Projects seeded random rays onto {f = level} by Newton's method, then
/// polishes the extreme directions by pattern search. Throws DomainError
/// when no projection converges.
LevelExtrema level_gradient_extrema(const FunctionField& field, double level, std::size_t n_samples,
                                    std::uint64_t seed);

/// |∇f ∧ 2Hs·∇f|: zero iff ∇f is an eigenvector of Hs at x.
double ridge_valley_residual(const FunctionField& field, std::span<const double> x);

struct SpherePointRelation {
  unsigned degree = 0;
  double rayleigh = 0.0;   // ⟨Hs(f_p)(ν)ν, ν⟩
  double predicted = 0.0;  // p(p-1) f_p(ν)
};

/// Needs a polynomial f; f_p is its lowest-degree homogeneous part.
SpherePointRelation sphere_point_relation(const FunctionField& field, std::span<const double> nu);

struct LimitReport {
  std::optional<SecantLimit> secant;
  std::optional<Vec> unit_grad_limit;
  std::optional<AsymptoticFit> fit;
  std::optional<HessianDirectionLimit> hessian;
  std::optional<double> eigen_residual_final;
  std::optional<double> eigenvalue_estimate;  // ⟨ℋν, ν⟩
  std::optional<EigenDirectionCheck> eigen_check;
  std::optional<EstimateChecks> estimates;
  std::optional<BochnakLojasiewicz> bl;
  std::vector<std::string> errors;
};

/// Runs every estimator; a failing estimator leaves its field empty and
/// records its message in errors.
LimitReport analyze_trajectory(const Trajectory& traj, std::size_t windows = 4);

}  // namespace nonosc
