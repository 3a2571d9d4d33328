#include <cerrno>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nonosc/errors.hpp"
#include "nonosc/report.hpp"

namespace nonosc {

namespace {

Vec parse_point(const std::string& text) {
  Vec out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const char* begin = item.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (item.empty() || end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
      throw ConfigError("cannot read coordinate '" + item + "' in '" + text + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty point '" + text + "'");
  return out;
}

struct RawOptions {
  std::string mode = "inward";
  std::string expr;
  std::string function_file;
  std::vector<std::string> vars;
  std::vector<std::string> starts;
  std::string metric_file;
  std::string equilibrium;
  std::string dump;
  std::string out;
};

void add_common(CLI::App* cmd, AnalysisConfig& c, RawOptions& raw) {
  cmd->add_option("--expr", raw.expr, "function expression");
  cmd->add_option("--function-file", raw.function_file, "JSON function spec {\"vars\": [...], \"f\": \"...\"}");
  cmd->add_option("--vars", raw.vars, "comma-separated variable names")->delimiter(',');
  cmd->add_option("--start", raw.starts, "start point x1,x2,...; repeat for a batch");
  cmd->add_option("--r-min", c.r_min, "inward stopping radius");
  cmd->add_option("--r-max", c.r_max, "outward stopping radius");
  cmd->add_option("--rel-tol", c.rel_tol, "relative integration tolerance");
  cmd->add_option("--abs-tol", c.abs_tol, "absolute integration tolerance");
  cmd->add_option("--max-steps", c.max_steps, "accepted step budget");
  cmd->add_option("--windows", c.windows, "number of dyadic windows analyzed");
  cmd->add_option("--probe", c.probes, "monotonicity probe expression (repeatable)");
  cmd->add_option("--probe-fraction", c.probe_tail_fraction, "tail fraction scanned by probes");
  cmd->add_option("--dump", raw.dump, "trajectory CSV path");
  cmd->add_option("--out", raw.out, "report path (stdout when absent)");
  cmd->add_option("--seed", c.seed, "seed for randomized checks");
  cmd->add_option("--jobs", c.jobs, "worker threads for batches");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient trajectory analysis near critical points and at infinity"};
  app.require_subcommand(1);
  AnalysisConfig c;
  RawOptions raw;

  auto* analyze = app.add_subcommand("analyze", "integrate and analyze trajectories");
  add_common(analyze, c, raw);
  analyze->add_option("--mode", raw.mode, "inward | outward | blowup | riemann | selftest");
  analyze->add_option("--metric-file", raw.metric_file, "JSON metric spec {\"vars\": [...], \"g\": [[...]]}");
  analyze->add_option("--equilibrium", raw.equilibrium, "sphere point for the blow-up linearization");

  auto* blowup = app.add_subcommand("blowup", "linearize the divided field at a sphere point");
  add_common(blowup, c, raw);
  blowup->add_option("--equilibrium", raw.equilibrium, "sphere point for the blow-up linearization");

  auto* selftest = app.add_subcommand("selftest", "closed-form checks on the radial quadratic");
  selftest->add_option("--r-min", c.r_min, "inward stopping radius");
  selftest->add_option("--windows", c.windows, "number of dyadic windows analyzed");
  selftest->add_option("--out", raw.out, "report path (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed()) c.mode = parse_mode(raw.mode);
    if (blowup->parsed()) c.mode = AnalysisMode::blowup;
    if (selftest->parsed()) c.mode = AnalysisMode::selftest;
    if (!raw.expr.empty()) c.expr = raw.expr;
    if (!raw.function_file.empty()) c.function_file = raw.function_file;
    c.vars = raw.vars;
    for (const auto& s : raw.starts) c.starts.push_back(parse_point(s));
    if (!raw.metric_file.empty()) c.metric_file = raw.metric_file;
    if (!raw.equilibrium.empty()) c.equilibrium = parse_point(raw.equilibrium);
    if (!raw.dump.empty()) c.dump = raw.dump;
    if (!raw.out.empty()) c.out = raw.out;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return run(c, out, err);
}

}  // namespace nonosc
