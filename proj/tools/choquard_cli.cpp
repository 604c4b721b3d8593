#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "choquard/commands.hpp"

namespace {

using choquard::json;

struct Flags {
  std::string config_path;
  std::optional<int> n;
  std::optional<double> alpha;
  std::optional<int> b;
  std::optional<double> rho;
  std::optional<double> rho_fraction;
  std::optional<std::string> g;
  std::optional<int> m;
  std::optional<double> box;
  std::optional<std::uint64_t> seed;
  std::optional<int> starts;
  std::optional<int> max_iters;
  std::optional<double> r_cap;
  std::optional<std::string> out;
  std::optional<std::string> constants_source;
  bool fiber = false;
  bool outside_theory = false;
  std::string field_path;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
  cmd->add_option("--N", f.n, "spatial dimension");
  cmd->add_option("--alpha", f.alpha, "Riesz order, 0 < alpha < N");
  cmd->add_option("--b", f.b, "lower-critical coefficient, 0 or 1");
  cmd->add_option("--rho", f.rho, "prescribed L2 mass");
  cmd->add_option("--rho-fraction", f.rho_fraction, "mass as a fraction of rho0 (instead of --rho)");
  cmd->add_option("--G", f.g, "G as \"nu1*|t|^p1 + nu2*|t|^p2\"");
  cmd->add_option("--m", f.m, "grid points per axis (power of two)");
  cmd->add_option("--L", f.box, "box side length");
  cmd->add_option("--seed", f.seed, "seed for the random starts");
  cmd->add_option("--starts", f.starts, "number of starts");
  cmd->add_option("--max-iters", f.max_iters, "iteration limit per start");
  cmd->add_option("--r-cap", f.r_cap, "gradient-norm cap (default R0)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--constants-source", f.constants_source, "S1..S3 source: trial or exact");
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw choquard::IoError("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw choquard::ConfigError("config file " + path + ": " + e.what());
  }
}

json merged_config(const Flags& f) {
  json j = f.config_path.empty() ? json::object() : load_config_file(f.config_path);
  if (!j.contains("problem")) j["problem"] = json::object();
  auto& p = j["problem"];
  if (f.n) p["N"] = *f.n;
  if (f.alpha) p["alpha"] = *f.alpha;
  if (f.b) p["b"] = *f.b;
  if (f.rho) {
    p["rho"] = *f.rho;
    p.erase("rho_fraction");
  }
  if (f.rho_fraction) {
    p["rho_fraction"] = *f.rho_fraction;
    p.erase("rho");
  }
  if (f.g) j["nonlinearity"] = *f.g;
  if (f.m) j["grid"]["m"] = *f.m;
  if (f.box) j["grid"]["L"] = *f.box;
  if (f.seed) j["solver"]["seed"] = *f.seed;
  if (f.starts) j["solver"]["n_starts"] = *f.starts;
  if (f.max_iters) j["solver"]["max_iters"] = *f.max_iters;
  if (f.r_cap) j["solver"]["r_cap"] = *f.r_cap;
  if (f.out) j["output_dir"] = *f.out;
  if (f.constants_source) j["constants"]["source"] = *f.constants_source;
  if (f.fiber) j["fiber"] = true;
  if (f.outside_theory) j["outside_theory"] = true;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normalized solutions of the Choquard equation: constants, thresholds, solver, diagnostics"};
  app.require_subcommand(1);
  Flags flags;

  auto* constants = app.add_subcommand("constants", "Riesz/HLS/Sobolev constants, C0, C1, C2, rho0");
  auto* threshold = app.add_subcommand("threshold", "rho0 and the barrier window (R0, R1) at rho");
  auto* solve = app.add_subcommand("solve", "local minimizer on the mass sphere inside the gradient ball");
  auto* fiber = app.add_subcommand("fiber", "fiber map phi(tau) = E(u_tau) of a stored field");
  auto* verify = app.add_subcommand("verify", "energy, lambda and identity residuals of a stored field");
  for (auto* cmd : {constants, threshold, solve, fiber, verify}) add_common(cmd, flags);
  solve->add_flag("--fiber", flags.fiber, "also write fiber.csv for the minimizer");
  solve->add_flag("--outside-theory", flags.outside_theory, "accept rho >= rho0 or uncertified output");
  for (auto* cmd : {fiber, verify}) cmd->add_option("field", flags.field_path, "CHQF1 field file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : choquard::exit_config;
  }

  try {
    const choquard::RunConfig cfg = choquard::parse_config(merged_config(flags));
    choquard::CommandResult r;
    if (constants->parsed()) r = choquard::cmd_constants(cfg);
    if (threshold->parsed()) r = choquard::cmd_threshold(cfg);
    if (solve->parsed()) r = choquard::cmd_solve(cfg);
    if (fiber->parsed()) r = choquard::cmd_fiber(cfg, flags.field_path);
    if (verify->parsed()) r = choquard::cmd_verify(cfg, flags.field_path);
    std::cout << r.summary << "\n";
    return r.exit_code;
  } catch (const choquard::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return choquard::exit_config;
  } catch (const choquard::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return choquard::exit_io;
  } catch (const choquard::FieldIoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return choquard::exit_io;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return choquard::exit_config;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return choquard::exit_config;
  }
}
