#pragma once

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "choquard/fiber.hpp"
#include "choquard/field_io.hpp"
#include "choquard/minimize.hpp"
#include "choquard/problem.hpp"
#include "choquard/report.hpp"
#include "choquard/thresholds.hpp"

namespace choquard {

/// Bad flags, bad config values, or parameters outside a command's scope.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_nonconvergence = 2, exit_io = 3 };

struct RunConfig {
  ProblemParams problem;
  /// When set, rho is this fraction of the threshold rho0.
  std::optional<double> rho_fraction;
  std::vector<PowerTerm> terms;
  int m = 64;
  double box = 24.0;
  SolveOptions solver;
  std::filesystem::path output_dir = ".";
  bool write_fiber = false;
  bool outside_theory = false;
  BundleOptions constants;
  int h_samples = 400;
  double tau_min = 1e-2;
  double tau_max = 10.0;
  int tau_count = 200;
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline std::vector<PowerTerm> parse_terms_json(const json& j) {
  if (j.is_string()) {
    try {
      return parse_terms(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: nonlinearity: ") + e.what());
    }
  }
  if (!j.is_array()) throw ConfigError("config: nonlinearity must be a string or a list of terms");
  std::vector<PowerTerm> out;
  for (const auto& t : j) {
    if (t.is_array() && t.size() == 2) {
      out.push_back({t[0].get<double>(), t[1].get<double>()});
    } else if (t.is_object() && t.contains("coef") && t.contains("exponent")) {
      out.push_back({t["coef"].get<double>(), t["exponent"].get<double>()});
    } else {
      throw ConfigError("config: each term is [coef, exponent] or {\"coef\":..,\"exponent\":..}");
    }
  }
  return out;
}

}  // namespace detail

/// Builds a RunConfig from the JSON layout documented in the README.
inline RunConfig parse_config(const json& j) {
  using detail::get_or;
  RunConfig c;
  const json problem = j.value("problem", json::object());
  for (const char* key : {"N", "alpha", "b"}) {
    if (!problem.contains(key)) throw ConfigError(std::string("config: problem.") + key + " is required");
  }
  c.problem.dim = get_or<int>(problem, "N", 3);
  c.problem.alpha = get_or<double>(problem, "alpha", 0.0);
  c.problem.b = get_or<int>(problem, "b", 0);
  if (problem.contains("rho") && !problem.at("rho").is_null()) {
    c.problem.rho = get_or<double>(problem, "rho", 0.0);
  } else if (problem.contains("rho_fraction") && !problem.at("rho_fraction").is_null()) {
    c.rho_fraction = get_or<double>(problem, "rho_fraction", 0.0);
    if (!(*c.rho_fraction > 0.0)) throw ConfigError("config: problem.rho_fraction must be positive");
  } else {
    throw ConfigError("config: problem.rho (or problem.rho_fraction) is required");
  }
  if (!j.contains("nonlinearity")) throw ConfigError("config: nonlinearity is required");
  c.terms = detail::parse_terms_json(j.at("nonlinearity"));

  const json grid = j.value("grid", json::object());
  c.m = get_or<int>(grid, "m", c.m);
  c.box = get_or<double>(grid, "L", c.box);

  const json s = j.value("solver", json::object());
  c.solver.max_iters = get_or<int>(s, "max_iters", c.solver.max_iters);
  c.solver.step0 = get_or<double>(s, "step0", c.solver.step0);
  c.solver.tol_grad = get_or<double>(s, "tol_grad", c.solver.tol_grad);
  c.solver.n_starts = get_or<int>(s, "n_starts", c.solver.n_starts);
  c.solver.seed = get_or<std::uint64_t>(s, "seed", c.solver.seed);
  if (s.contains("r_cap") && !s.at("r_cap").is_null()) c.solver.r_cap = get_or<double>(s, "r_cap", 0.0);
  c.solver.precondition = get_or<bool>(s, "precondition", c.solver.precondition);

  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir.string());
  c.write_fiber = get_or<bool>(j, "fiber", c.write_fiber);
  c.outside_theory = get_or<bool>(j, "outside_theory", c.outside_theory);

  const json k = j.value("constants", json::object());
  const std::string source = get_or<std::string>(k, "source", "trial");
  if (source == "trial") {
    c.constants.source = SSource::trial;
  } else if (source == "exact") {
    c.constants.source = SSource::exact;
  } else {
    throw ConfigError("config: constants.source must be \"trial\" or \"exact\"");
  }
  c.constants.m = get_or<int>(k, "m", c.constants.m);
  c.constants.box = get_or<double>(k, "L", c.constants.box);

  c.h_samples = get_or<int>(j.value("threshold", json::object()), "h_samples", c.h_samples);
  const json f = j.value("fiber_sampling", json::object());
  c.tau_min = get_or<double>(f, "tau_min", c.tau_min);
  c.tau_max = get_or<double>(f, "tau_max", c.tau_max);
  c.tau_count = get_or<int>(f, "count", c.tau_count);

  try {
    c.solver.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.h_samples < 2) throw ConfigError("config: threshold.h_samples must be >= 2");
  if (!(c.tau_min > 0.0) || !(c.tau_max > c.tau_min) || c.tau_count < 2) {
    throw ConfigError("config: fiber_sampling needs 0 < tau_min < tau_max and count >= 2");
  }
  return c;
}

/// The normalized config with every default filled in; parse_config of this
/// object reproduces the same RunConfig.
inline json config_to_json(const RunConfig& c) {
  json problem = {{"N", c.problem.dim}, {"alpha", c.problem.alpha}, {"b", c.problem.b}};
  if (c.rho_fraction) {
    problem["rho_fraction"] = *c.rho_fraction;
  } else {
    problem["rho"] = c.problem.rho;
  }
  json solver = {{"max_iters", c.solver.max_iters}, {"step0", c.solver.step0},
                 {"tol_grad", c.solver.tol_grad},   {"n_starts", c.solver.n_starts},
                 {"seed", c.solver.seed},           {"r_cap", c.solver.r_cap ? json(*c.solver.r_cap) : json(nullptr)},
                 {"precondition", c.solver.precondition}};
  return {{"problem", problem},
          {"nonlinearity", to_json(c.terms)},
          {"grid", {{"m", c.m}, {"L", c.box}}},
          {"solver", solver},
          {"output_dir", c.output_dir.string()},
          {"fiber", c.write_fiber},
          {"outside_theory", c.outside_theory},
          {"constants",
           {{"source", c.constants.source == SSource::exact ? "exact" : "trial"},
            {"m", c.constants.m},
            {"L", c.constants.box}}},
          {"threshold", {{"h_samples", c.h_samples}}},
          {"fiber_sampling", {{"tau_min", c.tau_min}, {"tau_max", c.tau_max}, {"count", c.tau_count}}}};
}

inline json meta_block() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  char host[256] = {0};
  if (gethostname(host, sizeof host - 1) != 0) host[0] = '\0';
  return {{"timestamp", stamp}, {"host", host}};
}

/// Everything the commands share: validated parameters, the nonlinearity and
/// the threshold bundle at the resolved mass.
struct Prepared {
  RunConfig config;
  Nonlinearity nl;
  ThresholdBundle bundle;
  ValidationReport validation;
};

inline Prepared prepare(RunConfig c) {
  try {
    check(c.problem);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    Grid(c.problem.dim, c.m, c.box);
    if (c.constants.source == SSource::trial) Grid(c.problem.dim, c.constants.m, c.constants.box);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::optional<Nonlinearity> nl;
  try {
    nl.emplace(c.problem, c.terms);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!nl->exponents_admissible()) {
    std::ostringstream os;
    os << "nonlinearity: every exponent must lie in (" << c.problem.p_lower() << ", " << c.problem.p_upper() << "]";
    throw ConfigError(os.str());
  }
  ThresholdBundle bundle = make_bundle(c.problem, *nl, c.constants);
  if (c.rho_fraction) {
    if (bundle.rho0.value <= 0.0) throw ConfigError("rho_fraction given but rho0 is unconstrained");
    c.problem.rho = *c.rho_fraction * bundle.rho0.value;
    bundle = make_bundle(c.problem, *nl, c.constants);
  }
  ValidationReport v = validate(c.problem, *nl);
  return {std::move(c), std::move(*nl), std::move(bundle), std::move(v)};
}

inline json problem_block(const Prepared& p) {
  return {{"problem", to_json(p.config.problem)},
          {"nonlinearity", to_json(p.config.terms)},
          {"nonlinearity_text", format_terms(p.config.terms)},
          {"validation", to_json(p.validation)}};
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline void echo_config(const RunConfig& c) {
  ensure_dir(c.output_dir);
  write_json_atomic(c.output_dir / "config.json", config_to_json(c));
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code and writes its artifacts to
// config.output_dir; stdout receives a short summary.

struct CommandResult {
  int exit_code = exit_ok;
  json document;
  std::string summary;
};

inline CommandResult cmd_constants(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  echo_config(cfg);
  json doc = to_json(p.bundle);
  write_json_atomic(cfg.output_dir / "constants.json", doc);
  return {exit_ok, doc, doc.dump(2)};
}

inline CommandResult cmd_threshold(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  if (!(p.bundle.c.c1 > 0.0 && p.bundle.c.c2 > 0.0)) {
    throw ConfigError("threshold: C1 or C2 vanishes, so rho0 is unconstrained");
  }
  if (!p.bundle.window) {
    std::ostringstream os;
    os << "no positive window: rho = " << p.config.problem.rho << " is not below rho0 = " << p.bundle.rho0.value;
    throw ConfigError(os.str());
  }
  echo_config(cfg);
  const auto& w = *p.bundle.window;
  json doc = to_json(p.bundle);
  const auto ts = log_taus(0.1 * w.r0, 10.0 * w.r1, p.config.h_samples);
  std::ostringstream csv;
  csv << std::setprecision(17) << "t,h\n";
  for (double t : ts) csv << t << ',' << h_value(p.config.problem.rho, t, p.bundle.c, p.config.problem) << "\n";
  write_text_atomic(cfg.output_dir / "h_curve.csv", csv.str());
  doc["h_curve"] = "h_curve.csv";
  write_json_atomic(cfg.output_dir / "threshold.json", doc);
  return {exit_ok, doc, doc.dump(2)};
}

inline CommandResult cmd_solve(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  echo_config(cfg);
  Grid grid = [&] {
    try {
      return Grid(p.config.problem.dim, p.config.m, p.config.box);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  const auto kernel = cached_kernel(grid, p.config.problem.alpha);
  SolveOptions opts = p.config.solver;
  if (!opts.r_cap && !p.bundle.window) {
    throw ConfigError("solve: rho is not below rho0, so there is no R0; set solver.r_cap (and --outside-theory)");
  }
  const SolveReport r = solve(p.config.problem, p.nl, *kernel, p.bundle, opts);

  json doc = problem_block(p);
  doc["grid"] = {{"N", grid.dim()}, {"m", grid.points_per_axis()}, {"L", grid.box()}};
  doc["bundle"] = to_json(p.bundle);
  doc["solve"] = to_json(r);
  doc["outside_theory_requested"] = p.config.outside_theory;
  if (r.best_start >= 0) save_chqf(cfg.output_dir / "u_star.chqf", r.u_star);
  if (p.config.write_fiber && r.best_start >= 0) {
    const FiberCurve c = fiber_curve(p.config.problem, p.nl, *kernel, r.u_star,
                                     log_taus(p.config.tau_min, p.config.tau_max, p.config.tau_count));
    write_text_atomic(cfg.output_dir / "fiber.csv", fiber_csv(c));
    doc["fiber"] = {{"phi_prime_at_1", c.phi_at_1_slope}, {"g4", to_json(g4_diagnose(c))}};
  }
  doc["meta"] = meta_block();
  write_json_atomic(cfg.output_dir / "report.json", doc);

  int code = exit_ok;
  if (!r.converged) {
    code = exit_nonconvergence;
  } else if (!r.certified && !p.config.outside_theory) {
    code = exit_nonconvergence;
  }
  std::ostringstream os;
  os << "converged=" << r.converged << " certified=" << r.certified << " E=" << std::setprecision(12)
     << r.residuals.energy.total << " lambda=" << r.residuals.lambda << " pohozaev=" << r.residuals.pohozaev;
  for (const auto& f : r.failed_checks) os << "\nfailed: " << f;
  return {code, doc, os.str()};
}

inline Field load_field_or_throw(const std::filesystem::path& path) {
  try {
    return load_chqf(path);
  } catch (const FieldIoError& e) {
    throw IoError(e.what());
  }
}

inline CommandResult cmd_fiber(const RunConfig& cfg, const std::filesystem::path& field_path) {
  const Prepared p = prepare(cfg);
  const Field u = load_field_or_throw(field_path);
  if (u.grid.dim() != p.config.problem.dim) throw ConfigError("fiber: field dimension differs from N");
  echo_config(cfg);
  const auto kernel = cached_kernel(u.grid, p.config.problem.alpha);
  const FiberCurve c =
      fiber_curve(p.config.problem, p.nl, *kernel, u, log_taus(p.config.tau_min, p.config.tau_max, p.config.tau_count));
  write_text_atomic(cfg.output_dir / "fiber.csv", fiber_csv(c));
  json doc = {{"phi_prime_at_1", c.phi_at_1_slope}, {"g4", to_json(g4_diagnose(c))}};
  json maxima = json::array();
  for (double t : c.detected_maxima) maxima.push_back(t);
  doc["detected_maxima"] = maxima;
  write_json_atomic(cfg.output_dir / "fiber.json", doc);
  return {exit_ok, doc, doc.dump(2)};
}

/// Recomputes the residual block for any field; never fails on values.
inline CommandResult cmd_verify(const RunConfig& cfg, const std::filesystem::path& field_path) {
  const Prepared p = prepare(cfg);
  const Field u = load_field_or_throw(field_path);
  if (u.grid.dim() != p.config.problem.dim || u.grid.points_per_axis() != p.config.m || u.grid.box() != p.config.box) {
    std::ostringstream os;
    os << "verify: field grid (dim=" << u.grid.dim() << ", m=" << u.grid.points_per_axis() << ", L=" << u.grid.box()
       << ") does not match the config grid (m=" << p.config.m << ", L=" << p.config.box << ")";
    throw ConfigError(os.str());
  }
  echo_config(cfg);
  const auto kernel = cached_kernel(u.grid, p.config.problem.alpha);
  json doc = problem_block(p);
  doc["residuals"] = to_json(residual_block(p.config.problem, p.nl, *kernel, u));
  write_json_atomic(cfg.output_dir / "verify.json", doc);
  return {exit_ok, doc, doc["residuals"].dump(2)};
}

}  // namespace choquard
