#include "nonosc/report.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "nonosc/asymptotics.hpp"
#include "nonosc/errors.hpp"
#include "nonosc/exprparse.hpp"
#include "nonosc/riemannian.hpp"

namespace nonosc {

using nlohmann::json;

std::string to_string(AnalysisMode m) {
  switch (m) {
    case AnalysisMode::inward: return "inward";
    case AnalysisMode::outward: return "outward";
    case AnalysisMode::blowup: return "blowup";
    case AnalysisMode::riemann: return "riemann";
    case AnalysisMode::selftest: return "selftest";
  }
  return "unknown";
}

AnalysisMode parse_mode(const std::string& name) {
  for (auto m : {AnalysisMode::inward, AnalysisMode::outward, AnalysisMode::blowup, AnalysisMode::riemann,
                 AnalysisMode::selftest}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + name + "'");
}

void validate(const AnalysisConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(c.r_min, "r-min");
  positive(c.r_max, "r-max");
  positive(c.rel_tol, "rel-tol");
  positive(c.abs_tol, "abs-tol");
  if (c.max_steps == 0) throw ConfigError("max-steps must be positive");
  if (c.windows < 3) throw ConfigError("windows must be at least 3");
  if (c.jobs == 0) throw ConfigError("jobs must be positive");
  if (!(c.probe_tail_fraction > 0.0 && c.probe_tail_fraction <= 1.0)) {
    throw ConfigError("probe tail fraction must lie in (0, 1]");
  }
  if (c.mode == AnalysisMode::selftest) return;

  if (c.expr && c.function_file) throw ConfigError("give either --expr or --function-file, not both");
  if (!c.expr && !c.function_file) throw ConfigError("a function is required (--expr or --function-file)");
  if (c.expr && c.vars.empty()) throw ConfigError("--expr needs --vars");
  const bool needs_start = c.mode != AnalysisMode::blowup;
  if (needs_start && c.starts.empty()) throw ConfigError("mode " + to_string(c.mode) + " needs --start");
  if (c.mode == AnalysisMode::blowup && c.starts.empty() && !c.equilibrium) {
    throw ConfigError("blowup needs --equilibrium or --start");
  }
  if (c.mode == AnalysisMode::riemann && !c.metric_file) throw ConfigError("mode riemann needs --metric-file");
  if (c.mode != AnalysisMode::riemann && c.metric_file) throw ConfigError("--metric-file is only used by mode riemann");
  if (c.mode == AnalysisMode::outward && c.r_max <= 1.0) throw ConfigError("r-max must exceed 1 for outward runs");
  if (c.starts.size() > 1 && !c.out) throw ConfigError("batch runs need --out");
}

namespace {

// ---------------------------------------------------------------------------
// Inputs

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

std::vector<std::string> string_list(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError(std::string(what) + " must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

struct Inputs {
  std::vector<std::string> vars;
  std::string expr;
  RationalFunction function;
  std::optional<std::vector<std::vector<std::string>>> metric_text;
  std::optional<MetricField> metric;
  std::vector<RationalFunction> probes;
};

Inputs load_inputs(const AnalysisConfig& c) {
  Inputs in;
  in.vars = c.vars;
  if (c.function_file) {
    const json spec = read_json_file(*c.function_file);
    if (!spec.is_object() || !spec.contains("vars") || !spec.contains("f") || !spec["f"].is_string()) {
      throw ConfigError("function spec needs \"vars\" and \"f\"");
    }
    const auto file_vars = string_list(spec["vars"], "vars");
    if (!in.vars.empty() && in.vars != file_vars) throw ConfigError("--vars disagrees with the function spec");
    in.vars = file_vars;
    in.expr = spec["f"].get<std::string>();
  } else {
    in.expr = *c.expr;
  }
  if (in.vars.empty()) throw ConfigError("no variables given");
  in.function = parse_rational(in.expr, in.vars);

  if (c.metric_file) {
    const json spec = read_json_file(*c.metric_file);
    if (!spec.is_object() || !spec.contains("vars") || !spec.contains("g") || !spec["g"].is_array()) {
      throw ConfigError("metric spec needs \"vars\" and \"g\"");
    }
    if (string_list(spec["vars"], "vars") != in.vars) throw ConfigError("metric variables differ from the function's");
    std::vector<std::vector<std::string>> text;
    std::vector<std::vector<RationalFunction>> table;
    for (const auto& row : spec["g"]) {
      text.push_back(string_list(row, "metric row"));
      table.emplace_back();
      for (const auto& e : text.back()) table.back().push_back(parse_rational(e, in.vars));
    }
    in.metric = make_metric(table);
    in.metric_text = std::move(text);
  }
  for (const auto& p : c.probes) in.probes.push_back(parse_rational(p, in.vars));
  return in;
}

// ---------------------------------------------------------------------------
// JSON helpers

json to_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

json to_json(const Matrix& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const SymMatrix& s) { return to_json(s.to_dense()); }

template <class T>
json optional_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  return json(*v);
}

void put_optional(json& obj, const std::string& key, const std::optional<double>& v, const std::string& reason) {
  obj[key] = optional_json(v);
  if (!v) obj[key + "_null_reason"] = reason;
}

bool has_non_finite(json& j) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) {
      j = nullptr;
      return true;
    }
    return false;
  }
  bool found = false;
  if (j.is_array()) {
    for (auto& e : j) found = has_non_finite(e) || found;
  }
  return found;
}

// Replaces non-finite numbers by null and records why next to the key.
void sanitize(json& j) {
  if (j.is_array()) {
    for (auto& e : j) sanitize(e);
    return;
  }
  if (!j.is_object()) return;
  std::vector<std::pair<std::string, std::string>> reasons;
  for (auto it = j.begin(); it != j.end(); ++it) {
    json& v = it.value();
    if (v.is_object()) {
      sanitize(v);
    } else if (v.is_number_float()) {
      if (has_non_finite(v)) reasons.emplace_back(it.key(), "value is not finite");
    } else if (v.is_array()) {
      bool nested_objects = false;
      for (auto& e : v) nested_objects = nested_objects || e.is_object();
      if (nested_objects) sanitize(v);
      if (has_non_finite(v)) reasons.emplace_back(it.key(), "non-finite entries replaced by null");
    }
  }
  for (auto& [key, why] : reasons) j[key + "_null_reason"] = why;
}

// Gives every remaining null member a reason.
void annotate_nulls(json& j) {
  if (j.is_array()) {
    for (auto& e : j) annotate_nulls(e);
    return;
  }
  if (!j.is_object()) return;
  std::vector<std::string> missing;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_null()) {
      if (!j.contains(it.key() + "_null_reason")) missing.push_back(it.key());
    } else {
      annotate_nulls(it.value());
    }
  }
  for (const auto& key : missing) j[key + "_null_reason"] = "not computed; see errors";
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const PoleError*>(&e)) return "PoleError";
  if (dynamic_cast<const DegenerateMetricError*>(&e)) return "DegenerateMetricError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  return "Error";
}

json error_entry(const std::string& stage, const std::string& kind, const std::string& message) {
  return json{{"stage", stage}, {"type", kind}, {"message", message}};
}

// ---------------------------------------------------------------------------
// Report sections

json trajectory_json(const Trajectory& t) {
  json j;
  j["direction"] = to_string(t.direction);
  j["termination"] = to_string(t.termination);
  j["flipped"] = t.flipped;
  j["samples"] = t.samples.size();
  j["tail_begin"] = t.tail_begin;
  j["rejected_steps"] = t.rejected_steps;
  if (!t.samples.empty()) {
    const auto& first = t.samples.front();
    const auto& last = t.samples.back();
    j["r_start"] = first.r;
    j["r_final"] = last.r;
    j["s_final"] = last.s;
    j["x_final"] = to_json(last.x);
    j["f_final"] = last.f_val;
    j["grad_norm_final"] = last.grad_norm;
  }
  j["coordinate_frame"] = t.coordinate_frame ? to_json(*t.coordinate_frame) : json(nullptr);
  if (!t.coordinate_frame) j["coordinate_frame_null_reason"] = "samples are in the input coordinates";
  return j;
}

json fit_json(const AsymptoticFit& f) {
  json j{{"m", f.m},
         {"a", f.a},
         {"r_lo", f.r_lo},
         {"r_hi", f.r_hi},
         {"residual", f.residual},
         {"loglog_residual", f.loglog_residual},
         {"outward", f.outward},
         {"radial_slope", f.radial_slope},
         {"radial_slope_expected", f.radial_slope_expected},
         {"radial_slope_consistent", f.radial_slope_consistent},
         {"nearest_rational",
          {{"numerator", f.rational.numerator},
           {"denominator", f.rational.denominator},
           {"distance", f.rational.distance}}}};
  json windows = json::array();
  for (const auto& w : f.windows) {
    windows.push_back({{"r_lo", w.r_lo}, {"r_hi", w.r_hi}, {"slope", w.slope}, {"m", w.m}, {"a", w.a}});
  }
  j["windows"] = std::move(windows);
  return j;
}

json eigen_check_json(const EigenDirectionCheck& c) {
  json seq = json::array();
  for (const auto& w : c.residual_sequence) {
    seq.push_back({{"r", w.r},
                   {"w_plus_nu", w.w_plus_nu},
                   {"w_minus_nu", w.w_minus_nu},
                   {"eigen_residual", w.eigen_residual}});
  }
  return {{"residual_sequence", std::move(seq)},
          {"final_residual", c.final_residual},
          {"final_w_plus_nu", c.final_w_plus_nu},
          {"final_w_minus_nu", c.final_w_minus_nu},
          {"direction_sign_check", c.direction_sign_check},
          {"estimate_sign_check", c.estimate_sign_check},
          {"residuals_non_increasing", c.residuals_non_increasing}};
}

json estimates_json(const EstimateChecks& e) {
  json windows = json::array();
  for (const auto& w : e.windows) {
    json row{{"r", w.r}, {"grad_radial_ratio", w.grad_radial_ratio}, {"vca_value", w.vca_value}};
    put_optional(row, "consequence1_ratio", w.consequence1_ratio,
                 e.consequence1_enabled ? "Hessian image of the secant vanishes" : "disabled for m <= 1");
    put_optional(row, "euler_like_residual", w.euler_like_residual, "undefined where q(q-1)f vanishes");
    put_optional(row, "scaled_eigenvalue", w.scaled_eigenvalue, "undefined where q(q-1) vanishes");
    windows.push_back(std::move(row));
  }
  return {{"q", e.q},
          {"windows", std::move(windows)},
          {"consequence1_enabled", e.consequence1_enabled},
          {"vca_expected", e.vca_expected},
          {"vca_drift", e.vca_drift},
          {"vca_log_derivative", e.vca_log_derivative},
          {"hessian_slope", e.hessian_slope},
          {"hessian_slope_expected", e.hessian_slope_expected},
          {"hypothesis_flag", e.hypothesis_flag}};
}

json limit_json(const LimitReport& r) {
  json j;
  if (r.secant) {
    j["secant"] = {{"nu", to_json(r.secant->nu)},
                   {"spherical_tail_length", r.secant->spherical_tail_length},
                   {"angular_spread", r.secant->angular_spread}};
  } else {
    j["secant"] = nullptr;
  }
  j["unit_grad_limit"] = r.unit_grad_limit ? to_json(*r.unit_grad_limit) : json(nullptr);
  j["fit"] = r.fit ? fit_json(*r.fit) : json(nullptr);
  if (r.hessian) {
    json per_window = json::array();
    for (const auto& h : r.hessian->per_window) per_window.push_back(to_json(h));
    j["hessian"] = {{"direction", to_json(r.hessian->direction)},
                    {"cauchy_gap", r.hessian->cauchy_gap},
                    {"per_window", std::move(per_window)}};
  } else {
    j["hessian"] = nullptr;
  }
  put_optional(j, "eigen_residual_final", r.eigen_residual_final, "needs both the secant and the Hessian limit");
  put_optional(j, "eigenvalue_estimate", r.eigenvalue_estimate, "needs both the secant and the Hessian limit");
  j["eigen_check"] = r.eigen_check ? eigen_check_json(*r.eigen_check) : json(nullptr);
  j["bochnak_lojasiewicz"] =
      r.bl ? json{{"hessian_ratio", r.bl->hessian_ratio}, {"value_ratio", r.bl->value_ratio}} : json(nullptr);
  return j;
}

Trajectory in_input_coordinates(const Trajectory& t) {
  Trajectory copy = t;
  for (auto& s : copy.samples) s.x = t.coordinate_frame->apply(s.x);
  return copy;
}

json monotonicity_json(const AnalysisConfig& c, const Inputs& in, const Trajectory& t, json& errors) {
  json out = json::array();
  const Trajectory* probed = &t;
  std::optional<Trajectory> mapped;
  if (t.coordinate_frame) {
    mapped = in_input_coordinates(t);
    probed = &*mapped;
  }
  for (std::size_t k = 0; k < in.probes.size(); ++k) {
    json entry{{"probe", c.probes[k]}};
    try {
      const auto rep = monotonicity_report(*probed, in.probes[k], c.probe_tail_fraction);
      entry["samples"] = rep.samples;
      entry["sign_changes"] = rep.sign_changes;
      entry["verdict"] = to_string(rep.verdict);
    } catch (const Error& e) {
      entry["samples"] = nullptr;
      entry["sign_changes"] = nullptr;
      entry["sign_changes_null_reason"] = e.what();
      entry["verdict"] = nullptr;
      errors.push_back(error_entry("monotonicity", error_kind(e), e.what()));
    }
    out.push_back(std::move(entry));
  }
  return out;
}

// A secant estimate is refined onto the nearby sphere equilibrium; a given
// equilibrium is used as is.
json blowup_json(const FunctionField& field, const std::vector<std::string>& vars, const Vec& equilibrium,
                 bool from_secant) {
  const DividedField df = divided_field(field);
  const Vec nu = from_secant ? refine_sphere_equilibrium(df, equilibrium) : normalized(equilibrium);
  json j{{"leading_degree", df.leading_degree()},
         {"leading_part", to_string(df.leading_part(), vars)},
         {"equilibrium_source", from_secant ? "secant_refined" : "given"},
         {"equilibrium", to_json(nu)}};
  if (from_secant) j["secant_refinement_gap"] = norm(subtract(nu, normalized(equilibrium)));
  const auto rel = sphere_point_relation(field, nu);
  j["sphere_point"] = {{"rayleigh", rel.rayleigh}, {"predicted", rel.predicted}};
  const Linearization lin = divided_field_linearization(df, nu);
  j["equilibrium_residual"] = lin.equilibrium_residual;
  j["jacobian"] = to_json(lin.jacobian);
  json eig = json::array();
  for (const auto& z : lin.eigenvalues) eig.push_back({{"re", z.real()}, {"im", z.imag()}});
  j["eigenvalues"] = std::move(eig);
  j["predicted"] = to_json(lin.predicted);
  j["prediction_gap"] = lin.prediction_gap;
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

IntegrationOptions integration_options(const AnalysisConfig& c, FlowDirection direction) {
  IntegrationOptions o;
  o.direction = direction;
  o.r_limit = direction == FlowDirection::inward ? c.r_min : c.r_max;
  o.rel_tol = c.rel_tol;
  o.abs_tol = c.abs_tol;
  o.max_steps = c.max_steps;
  return o;
}

// Closed-form checks on f = -(x^2 + y^2) from (0.6, 0.8).
json selftest_json(const AnalysisConfig& c, json& errors) {
  const std::vector<std::string> vars{"x", "y"};
  const FunctionField field = make_field(parse_rational("-(x^2+y^2)", vars));
  const Trajectory t = integrate_unit_gradient(field, std::vector{0.6, 0.8}, integration_options(c, FlowDirection::inward));
  const LimitReport rep = analyze_trajectory(t, c.windows);
  json checks = json::array();
  auto check = [&](const std::string& name, std::optional<double> value, double expected, double tol) {
    const bool pass = value && std::abs(*value - expected) <= tol;
    json row{{"name", name}, {"expected", expected}, {"tolerance", tol}, {"pass", pass}};
    put_optional(row, "value", value, "estimator failed");
    checks.push_back(std::move(row));
    if (!pass) errors.push_back(error_entry("selftest", "NumericalError", name + " outside tolerance"));
  };
  auto opt = [](bool ok, double v) { return ok ? std::optional<double>(v) : std::nullopt; };
  check("secant_x", opt(rep.secant.has_value(), rep.secant ? rep.secant->nu[0] : 0.0), 0.6, 1e-8);
  check("secant_y", opt(rep.secant.has_value(), rep.secant ? rep.secant->nu[1] : 0.0), 0.8, 1e-8);
  check("exponent", opt(rep.fit.has_value(), rep.fit ? rep.fit->m : 0.0), 2.0, 1e-6);
  check("coefficient", opt(rep.fit.has_value(), rep.fit ? rep.fit->a : 0.0), 1.0, 1e-6);
  check("eigen_residual", rep.eigen_residual_final, 0.0, 1e-10);
  check("bl_hessian_ratio", opt(rep.bl.has_value(), rep.bl ? rep.bl->hessian_ratio : 0.0), 1.0, 1e-9);
  return {{"function", "-(x^2+y^2)"}, {"start", {0.6, 0.8}}, {"checks", std::move(checks)}};
}

}  // namespace

ReportResult build_report(const AnalysisConfig& c, std::size_t start_index) {
  validate(c);
  ReportResult result;
  json& r = result.report;
  json errors = json::array();

  auto numerical = [&](const std::string& stage, const std::exception& e) {
    errors.push_back(error_entry(stage, error_kind(e), e.what()));
    result.numerical_failure = true;
  };

  r["config_echo"] = {{"mode", to_string(c.mode)},
                      {"r_min", c.r_min},
                      {"r_max", c.r_max},
                      {"rel_tol", c.rel_tol},
                      {"abs_tol", c.abs_tol},
                      {"max_steps", c.max_steps},
                      {"windows", c.windows},
                      {"probes", c.probes},
                      {"probe_tail_fraction", c.probe_tail_fraction},
                      {"seed", c.seed}};
  r["trajectory_summary"] = nullptr;
  r["limit_report"] = nullptr;
  r["estimate_checks"] = nullptr;
  r["monotonicity"] = json::array();

  if (c.mode == AnalysisMode::selftest) {
    try {
      r["selftest"] = selftest_json(c, errors);
      for (const char* key : {"trajectory_summary", "limit_report", "estimate_checks"}) {
        r[std::string(key) + "_null_reason"] = "selftest reports its checks under \"selftest\"";
      }
      if (!errors.empty()) result.numerical_failure = true;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      numerical("selftest", e);
    }
  } else {
    const Inputs in = load_inputs(c);
    const FunctionField field = make_field(in.function);
    const std::size_t n = in.vars.size();
    json& echo = r["config_echo"];
    echo["function"] = in.expr;
    echo["function_canonical"] = to_string(in.function, in.vars);
    echo["vars"] = in.vars;
    echo["metric"] = in.metric_text ? json(*in.metric_text) : json(nullptr);
    echo["equilibrium"] = c.equilibrium ? to_json(*c.equilibrium) : json(nullptr);

    std::optional<Vec> start;
    if (!c.starts.empty()) {
      if (start_index >= c.starts.size()) throw ConfigError("start index out of range");
      start = c.starts[start_index];
      if (start->size() != n) throw ConfigError("start point has " + std::to_string(start->size()) +
                                                " coordinates, expected " + std::to_string(n));
    }
    if (c.equilibrium && c.equilibrium->size() != n) throw ConfigError("equilibrium has the wrong dimension");
    echo["start"] = start ? to_json(*start) : json(nullptr);

    std::optional<Trajectory> traj;
    if (start) {
      try {
        if (c.mode == AnalysisMode::riemann) {
          traj = integrate_unit_gradient_riemannian(field, *in.metric, *start,
                                                    integration_options(c, FlowDirection::inward));
        } else {
          const auto dir = c.mode == AnalysisMode::outward ? FlowDirection::outward : FlowDirection::inward;
          traj = integrate_unit_gradient(field, *start, integration_options(c, dir));
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        numerical("integration", e);
      }
    }

    result.vars = in.vars;
    result.trajectory = traj;
    std::optional<LimitReport> limits;
    std::optional<RiemannianReport> riem;
    if (traj) {
      r["trajectory_summary"] = trajectory_json(*traj);
      if (c.mode == AnalysisMode::riemann) {
        riem = analyze_riemannian(*traj, c.windows);
        limits = riem->limits;
      } else {
        limits = analyze_trajectory(*traj, c.windows);
      }
      for (const auto& e : limits->errors) errors.push_back(error_entry("limit_report", "DomainError", e));
      r["limit_report"] = limit_json(*limits);
      if (limits->estimates) {
        r["estimate_checks"] = estimates_json(*limits->estimates);
      } else {
        r["estimate_checks_null_reason"] = "estimates need a successful exponent fit";
      }
      r["monotonicity"] = monotonicity_json(c, in, *traj, errors);
    } else {
      r["trajectory_summary_null_reason"] = start ? "integration failed" : "no start point";
    }

    if (c.mode == AnalysisMode::blowup) {
      r["blowup"] = nullptr;
      std::optional<Vec> eq = c.equilibrium;
      if (!eq && limits && limits->secant) eq = limits->secant->nu;
      if (!eq) {
        r["blowup_null_reason"] = "no equilibrium and no secant limit";
      } else {
        try {
          r["blowup"] = blowup_json(field, in.vars, *eq, !c.equilibrium);
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          numerical("blowup", e);
          r["blowup_null_reason"] = e.what();
        }
      }
    }

    if (c.mode == AnalysisMode::riemann) {
      json j;
      try {
        j["metric_compatibility_residual"] = metric_compatibility_residual(*in.metric, *start, c.seed);
      } catch (const Error& e) {
        j["metric_compatibility_residual"] = nullptr;
        j["metric_compatibility_residual_null_reason"] = e.what();
      }
      if (riem) {
        j["nu_input"] = riem->nu_input ? to_json(*riem->nu_input) : json(nullptr);
        j["endomorphism_residuals"] = riem->endomorphism_residuals;
        put_optional(j, "endomorphism_residual_final", riem->endomorphism_residual_final, "no analyzable windows");
      }
      r["riemannian"] = std::move(j);
    }
  }

  r["errors"] = std::move(errors);
  sanitize(r);
  for (auto it = r.begin(); it != r.end(); ++it) {
    if (it.key() != "config_echo") annotate_nulls(it.value());
  }
  for (const char* key : {"trajectory_summary", "limit_report", "estimate_checks", "blowup"}) {
    if (r.contains(key) && r[key].is_null() && !r.contains(std::string(key) + "_null_reason")) {
      r[std::string(key) + "_null_reason"] = "not computed; see errors";
    }
  }
  r["timestamp"] = utc_timestamp();
  return result;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& vars) {
  const std::size_t n = vars.size();
  std::string header = "s,r";
  for (const auto& v : vars) header += "," + v;
  header += ",f,dr_f,grad_norm";
  for (const auto& v : vars) header += ",nu_" + v;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) header += ",hess_" + vars[i] + vars[j];
  }
  os << header << '\n';

  char buf[40];
  auto put = [&](double v, bool first = false) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (!first) os << ',';
    os << buf;
  };
  for (const auto& s : traj.samples) {
    put(s.s, true);
    put(s.r);
    for (double v : s.x) put(v);
    put(s.f_val);
    put(s.dr_f);
    put(s.grad_norm);
    for (double v : s.x) put(v / s.r);
    for (double v : s.hess.packed()) put(v);
    os << '\n';
  }
}

std::string batch_path(const std::string& path, std::size_t k) {
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / p.stem();
  out += "." + std::to_string(k) + p.extension().string();
  return out.string();
}

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  os << text;
}

}  // namespace

int run(const AnalysisConfig& c, std::ostream& out, std::ostream& err) {
  try {
    validate(c);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  const std::size_t count = std::max<std::size_t>(1, c.mode == AnalysisMode::selftest ? 1 : c.starts.size());
  const bool batch = count > 1;
  std::vector<int> codes(count, 0);
  std::vector<std::string> messages(count);
  std::atomic<std::size_t> next{0};

  auto job = [&](std::size_t k) {
    try {
      const ReportResult res = build_report(c, k);
      const std::string text = res.report.dump(2) + "\n";
      if (c.out) {
        write_file(batch ? batch_path(*c.out, k) : *c.out, text);
      } else {
        messages[k] = text;
      }
      if (c.dump && res.trajectory) {
        std::ostringstream csv;
        write_trajectory_csv(csv, *res.trajectory, res.vars);
        write_file(batch ? batch_path(*c.dump, k) : *c.dump, csv.str());
      }
      codes[k] = res.numerical_failure ? 3 : 0;
    } catch (const ConfigError& e) {
      messages[k] = std::string("error: ") + e.what() + "\n";
      codes[k] = 2;
    } catch (const std::exception& e) {
      messages[k] = std::string("error: ") + e.what() + "\n";
      codes[k] = 3;
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(c.jobs, count));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < count;) job(k);
    });
  }
  for (auto& t : pool) t.join();

  int code = 0;
  for (std::size_t k = 0; k < count; ++k) {
    (messages[k].rfind("error: ", 0) == 0 ? err : out) << messages[k];
    code = std::max(code, codes[k]);
  }
  return code;
}

}  // namespace nonosc
