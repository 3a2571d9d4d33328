#pragma once

// Command-line surface: analysis configuration, JSON report, CSV dump.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nonosc/flow.hpp"

namespace nonosc {

enum class AnalysisMode { inward, outward, blowup, riemann, selftest };

std::string to_string(AnalysisMode m);
/// Throws ConfigError for an unknown name.
AnalysisMode parse_mode(const std::string& name);

struct AnalysisConfig {
  AnalysisMode mode = AnalysisMode::inward;
  std::optional<std::string> expr;
  std::optional<std::string> function_file;
  std::vector<std::string> vars;
  /// One entry per trajectory; more than one makes a batch.
  std::vector<Vec> starts;
  double r_min = 1e-6;
  double r_max = 1e3;
  double rel_tol = 1e-10;
  double abs_tol = 1e-20;
  std::size_t max_steps = 200000;
  std::size_t windows = 4;
  std::optional<std::string> metric_file;
  std::vector<std::string> probes;
  double probe_tail_fraction = 0.5;
  std::optional<Vec> equilibrium;
  std::optional<std::string> dump;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

/// Throws ConfigError when mode-required fields are missing or a tolerance
/// is not positive.
void validate(const AnalysisConfig& config);

/// Report for one start point (index into config.starts, ignored when the
/// mode needs no start). Never throws for numerical trouble: errors go to
/// the "errors" array and numerical_failure is set. Non-finite numbers are
/// written as null with a sibling "<key>_null_reason".
struct ReportResult {
  nlohmann::json report;
  bool numerical_failure = false;
  std::optional<Trajectory> trajectory;
  std::vector<std::string> vars;
};
ReportResult build_report(const AnalysisConfig& config, std::size_t start_index = 0);

/// Writes the trajectory rows: s, r, x_i, f, dr_f, grad_norm, nu_i and the
/// upper-triangular Hessian, with a header row and 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& vars);

/// "<stem>.<k><ext>" for batch output k.
std::string batch_path(const std::string& path, std::size_t k);

/// Validates, runs every start (config.jobs worker threads), writes reports
/// and dumps. Returns 0, 2 on configuration errors, 3 on numerical failure.
int run(const AnalysisConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv (subcommands analyze, blowup, selftest) and calls run.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nonosc
