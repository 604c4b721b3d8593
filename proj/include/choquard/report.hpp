#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "choquard/fiber.hpp"
#include "choquard/field_io.hpp"
#include "choquard/minimize.hpp"
#include "choquard/problem.hpp"
#include "choquard/thresholds.hpp"

namespace choquard {

using json = nlohmann::ordered_json;

inline json to_json(const ProblemParams& p) {
  return {{"N", p.dim}, {"alpha", p.alpha}, {"b", p.b}, {"rho", p.rho}};
}

inline json to_json(const std::vector<PowerTerm>& terms) {
  json arr = json::array();
  for (const auto& t : terms) arr.push_back({{"coef", t.coef}, {"exponent", t.exponent}});
  return arr;
}

inline json to_json(const EnergyBreakdown& e) {
  return {{"kinetic", e.kinetic}, {"interaction", e.interaction}, {"total", e.total}, {"d_lower", e.d_lower}};
}

inline json to_json(const ResidualBlock& r) {
  return {{"energy", to_json(r.energy)},
          {"lambda", r.lambda},
          {"lambda_pohozaev", r.lambda_pohozaev},
          {"grad_residual", r.grad_residual},
          {"relative_residual", r.relative_residual},
          {"pohozaev", r.pohozaev},
          {"nehari_pohozaev", r.nehari_pohozaev},
          {"mass", r.mass},
          {"grad_norm", r.grad_norm}};
}

inline json to_json(const ValidationReport& v) {
  json out = json::object();
  for (const auto& c : v.conditions) {
    json entry = {{"satisfied", c.satisfied}, {"detail", c.detail}};
    entry["offending_exponent"] = c.offending_exponent ? json(*c.offending_exponent) : json(nullptr);
    out[c.name] = entry;
  }
  return out;
}

/// Flat bundle object with a provenance tag next to every constant.
inline json to_json(const ThresholdBundle& b) {
  json j;
  j["a_alpha"] = b.a_alpha;
  j["a_alpha_provenance"] = "exact-formula";
  j["c_alpha"] = b.c_alpha;
  j["c_alpha_provenance"] = "exact-formula";
  j["s1"] = b.s1;
  j["s1_provenance"] = b.s1_provenance;
  j["s2"] = b.s2;
  j["s2_provenance"] = b.s2_provenance;
  j["s3"] = b.s3;
  j["s3_provenance"] = b.s3_provenance;
  j["s1_exact"] = b.s_exact.s1;
  j["s2_exact"] = b.s_exact.s2;
  j["s3_exact"] = b.s_exact.s3;
  j["c0"] = b.c0;
  j["c0_provenance"] = "numerical-sup";
  j["c1"] = b.c.c1;
  j["c2"] = b.c.c2;
  const bool bounded = b.c.c1 > 0.0 && b.c.c2 > 0.0;
  j["rho0"] = bounded ? json(b.rho0.value) : json(nullptr);
  j["rho0_maximizer"] = bounded ? json(b.rho0.by_maximizer) : json(nullptr);
  j["rho0_printed"] = bounded ? json(b.rho0.printed) : json(nullptr);
  j["rho0_relative_gap"] = bounded ? json(b.rho0.relative_gap) : json(nullptr);
  j["rho0_consistent"] = bounded ? b.rho0.consistent : true;
  j["rho0_unconstrained"] = !bounded;
  j["rho"] = b.rho ? json(*b.rho) : json(nullptr);
  j["t0"] = b.window ? json(b.window->t0) : json(nullptr);
  j["hmax"] = b.window ? json(b.window->hmax) : json(nullptr);
  j["r0"] = b.window ? json(b.window->r0) : json(nullptr);
  j["r1"] = b.window ? json(b.window->r1) : json(nullptr);
  return j;
}

inline json to_json(const StartSummary& s) {
  return {{"kind", s.kind},
          {"energy", s.energy},
          {"relative_residual", s.relative_residual},
          {"iterations", s.iterations},
          {"converged", s.converged},
          {"aborted", s.aborted},
          {"max_mass_defect", s.max_mass_defect},
          {"max_cap_ratio", s.max_cap_ratio},
          {"note", s.note}};
}

inline json to_json(const SolveReport& r) {
  json starts = json::array();
  for (const auto& s : r.starts) starts.push_back(to_json(s));
  json failed = json::array();
  for (const auto& f : r.failed_checks) failed.push_back(f);
  return {{"converged", r.converged},
          {"certified", r.certified},
          {"outside_theory", r.outside_theory},
          {"failed_checks", failed},
          {"residuals", to_json(r.residuals)},
          {"mass_final", r.residuals.mass},
          {"grad_norm_final", r.residuals.grad_norm},
          {"r_cap", r.r_cap},
          {"boundary_margin", r.boundary_margin},
          {"m_estimate", r.m_estimate},
          {"plateau", r.plateau},
          {"below_plateau", r.below_plateau},
          {"iterations", r.iterations},
          {"best_start", r.best_start},
          {"starts", starts}};
}

inline json to_json(const G4Report& g) {
  return {{"n_maxima", g.n_maxima},
          {"decreasing_after_max", g.decreasing_after_max},
          {"inconclusive", g.inconclusive},
          {"variation", g.variation}};
}

// ---------------------------------------------------------------------------
// Atomic text output

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline void write_json_atomic(const std::filesystem::path& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

/// Columns tau, phi, kinetic, interaction, d_lower. Leading comment lines
/// carry phi'(1) and the indices of samples the grid cannot resolve.
inline std::string fiber_csv(const FiberCurve& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "# phi_prime_at_1=" << c.phi_at_1_slope << "\n";
  os << "# unresolved_rows=";
  bool first = true;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.checks[i].resolved) continue;
    os << (first ? "" : ";") << i;
    first = false;
  }
  os << "\n";
  os << "tau,phi,kinetic,interaction,d_lower\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << c.taus[i] << ',' << c.values[i] << ',' << c.kinetic[i] << ',' << c.interaction[i] << ',' << c.d_lower[i]
       << "\n";
  }
  return os.str();
}

}  // namespace choquard
