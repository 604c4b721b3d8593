#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "choquard/energy.hpp"
#include "choquard/grid.hpp"
#include "choquard/problem.hpp"
#include "choquard/riesz.hpp"
#include "choquard/thresholds.hpp"

namespace choquard {

struct SolveOptions {
  int max_iters = 4000;
  double step0 = 1.0;
  /// Stop when ||grad E + lambda u|| / (||Laplacian u|| + ||(I_a*F(u)) f(u)||) drops below this.
  double tol_grad = 1e-6;
  int n_starts = 5;
  std::uint64_t seed = 0;
  /// Gradient-norm cap; R0 of the bundle when unset.
  std::optional<double> r_cap;
  /// Worker threads for the starts; 0 reads CHOQUARD_THREADS (default 1).
  int threads = 0;
  /// Precondition the gradient with (c - Laplacian)^{-1}.
  bool precondition = true;
  /// Keep the per-iteration accepted energies of every start.
  bool record_trace = false;

  void check() const {
    if (max_iters < 1) throw std::invalid_argument("SolveOptions: max_iters must be >= 1");
    if (!(step0 > 0.0)) throw std::invalid_argument("SolveOptions: step0 must be positive");
    if (!(tol_grad > 0.0)) throw std::invalid_argument("SolveOptions: tol_grad must be positive");
    if (n_starts < 1) throw std::invalid_argument("SolveOptions: n_starts must be >= 1");
    if (r_cap && !(*r_cap > 0.0)) throw std::invalid_argument("SolveOptions: r_cap must be positive");
  }
};

/// Diagnostics of a field against the Euler-Lagrange system; shared by solve
/// and verify so both report identical numbers for identical fields.
struct ResidualBlock {
  EnergyBreakdown energy;
  double lambda = 0.0;
  double lambda_pohozaev = 0.0;
  /// ||grad E + lambda u||_2 / ||u||_2
  double grad_residual = 0.0;
  /// ||grad E + lambda u||_2 / (||Laplacian u||_2 + ||(I_a*F(u)) f(u)||_2)
  double relative_residual = 0.0;
  double pohozaev = 0.0;
  double nehari_pohozaev = 0.0;
  double mass = 0.0;
  double grad_norm = 0.0;
};

namespace detail {

inline double l2_norm(const Field& u) { return std::sqrt(inner(u, u)); }

inline ResidualBlock residuals_from(const ProblemParams& params, const Evaluation& ev, const Field& u) {
  ResidualBlock r;
  r.energy = ev.energy;
  r.mass = std::sqrt(ev.mass_sq);
  r.grad_norm = std::sqrt(ev.grad_sq);
  if (ev.mass_sq == 0.0) return r;
  r.lambda = lambda_of(ev);
  r.lambda_pohozaev = pohozaev_lambda(params, ev);
  Field res = l2_gradient(ev);
  Field force(u.grid);
  for (std::size_t i = 0; i < u.size(); ++i) {
    res[i] += r.lambda * u[i];
    force[i] = ev.potential[i] * ev.f_of_u[i];
  }
  const double rn = l2_norm(res);
  r.grad_residual = rn / r.mass;
  const double scale = l2_norm(ev.neg_lap) + l2_norm(force);
  r.relative_residual = scale > 0.0 ? rn / scale : 0.0;
  r.pohozaev = pohozaev_residual(params, ev, r.lambda);
  r.nehari_pohozaev = nehari_pohozaev_residual(params, ev);
  return r;
}

}  // namespace detail

inline ResidualBlock residual_block(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                                    const Field& u) {
  const Evaluation ev = evaluate(nl, kernel, u);
  ResidualBlock r = detail::residuals_from(params, ev, u);
  if (params.b == 1) r.energy.d_lower = pair_interaction(kernel, u, params.p_lower(), params.p_lower());
  return r;
}

struct StartSummary {
  std::string kind;
  double energy = std::numeric_limits<double>::infinity();
  double relative_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool aborted = false;
  /// Worst relative mass defect and largest ||grad u|| / r_cap over the run.
  double max_mass_defect = 0.0;
  double max_cap_ratio = 0.0;
  std::string note;
  std::vector<double> trace;
};

struct SolveReport {
  Field u_star;
  ResidualBlock residuals;
  double r_cap = 0.0;
  double boundary_margin = 0.0;
  /// Best energy across starts.
  double m_estimate = 0.0;
  int iterations = 0;
  int best_start = -1;
  bool converged = false;
  bool outside_theory = false;
  /// E(u*) < -(1/2) b^2 S2^{-(N+a)/N} rho^{2(N+a)/N}.
  double plateau = 0.0;
  bool below_plateau = false;
  bool certified = false;
  std::vector<std::string> failed_checks;
  std::vector<StartSummary> starts;

  explicit SolveReport(const Grid& g) : u_star(g) {}
};

inline int thread_count_from_env() {
  if (const char* s = std::getenv("CHOQUARD_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Starts

namespace detail {

inline Field gaussian(const Grid& g, double sigma) {
  return sample(g, [&](const std::array<double, 3>& x) {
    return std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma));
  });
}

inline Field random_start(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Field noise(g);
  for (double& v : noise.values) v = normal(rng);
  const double w = g.box() / 16.0;
  Field smooth = apply_radial_multiplier(noise, [&](double k2) { return std::exp(-0.5 * k2 * w * w); });
  const double window = g.box() / 10.0;
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    const auto x = g.position(i);
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    smooth[i] = std::abs(smooth[i]) * std::exp(-r2 / (2.0 * window * window));
  }
  return smooth;
}

}  // namespace detail

/// Start field i before mass scaling: the lower-critical extremal, two
/// Gaussians, then seeded random smooth fields.
inline Field start_field(const Grid& g, int index, std::uint64_t seed, std::string* kind = nullptr) {
  const double L = g.box();
  auto name = [&](const char* s) {
    if (kind != nullptr) *kind = s;
  };
  switch (index) {
    case 0:
      name("s2-extremal");
      return s2_extremal(g, L / 16.0);
    case 1:
      name("gaussian-L/16");
      return detail::gaussian(g, L / 16.0);
    case 2:
      name("gaussian-L/10");
      return detail::gaussian(g, L / 10.0);
    default:
      name("random");
      return detail::random_start(g, seed + static_cast<std::uint64_t>(index));
  }
}

// ---------------------------------------------------------------------------
// Flow

namespace detail {

/// Mass-exact retraction into the ball ||grad u|| <= r_cap by dilation.
inline Field retract(const Field& u, double mass_target, double r_cap) {
  const double gn = std::sqrt(grad_norm_sq(u));
  if (gn <= r_cap) return u;
  const double tau = r_cap * (1.0 - 1e-3) / gn;
  return rescale_mass(dilate(u, tau), mass_target);
}

struct FlowResult {
  Field u;
  Evaluation ev;
  StartSummary summary;
};

inline FlowResult run_flow(const Nonlinearity& nl, const RieszKernel& kernel, Field u, double mass_target,
                           double r_cap, const SolveOptions& opts) {
  StartSummary s;
  u = retract(rescale_mass(u, mass_target), mass_target, r_cap);
  Evaluation ev = evaluate(nl, kernel, u);
  double step = opts.step0;
  const double step_floor = 1e-14 * opts.step0;
  auto track = [&](const Field& v, const Evaluation& e) {
    s.max_mass_defect = std::max(s.max_mass_defect, std::abs(std::sqrt(e.mass_sq) - mass_target) / mass_target);
    s.max_cap_ratio = std::max(s.max_cap_ratio, std::sqrt(e.grad_sq) / r_cap);
    (void)v;
  };
  track(u, ev);
  if (opts.record_trace) s.trace.push_back(ev.energy.total);

  for (int it = 0; it < opts.max_iters; ++it) {
    Field g = l2_gradient(ev);
    const double lam = lambda_of(ev);
    Field force(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) force[i] = ev.potential[i] * ev.f_of_u[i];
    Field tangent = g;
    for (std::size_t i = 0; i < u.size(); ++i) tangent[i] += lam * u[i];
    const double scale = l2_norm(ev.neg_lap) + l2_norm(force);
    s.relative_residual = scale > 0.0 ? l2_norm(tangent) / scale : 0.0;
    s.iterations = it;
    if (s.relative_residual < opts.tol_grad) {
      s.converged = true;
      break;
    }

    Field dir = tangent;
    if (opts.precondition) {
      // Metric (c - Laplacian) with c the mean squared wavenumber of u; the
      // direction is then re-projected onto the L^2 tangent space.
      const double c = ev.grad_sq / ev.mass_sq;
      auto inv = [c](double k2) { return 1.0 / (c + k2); };
      const Field mg = apply_radial_multiplier(g, inv);
      const Field mu = apply_radial_multiplier(u, inv);
      const double beta = inner(mg, u) / inner(mu, u);
      for (std::size_t i = 0; i < u.size(); ++i) dir[i] = mg[i] - beta * mu[i];
      // Rescale so step sizes are comparable with the plain flow.
      dir *= c;
    }

    bool accepted = false;
    while (step >= step_floor) {
      Field v = u;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * dir[i];
      Evaluation ev_v(u.grid);
      try {
        v = retract(rescale_mass(v, mass_target), mass_target, r_cap);
        ev_v = evaluate(nl, kernel, v);
      } catch (const std::exception&) {
        step *= 0.5;
        continue;
      }
      if (ev_v.energy.total <= ev.energy.total) {
        u = std::move(v);
        ev = std::move(ev_v);
        step = std::min(step * 1.1, 1e6 * opts.step0);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      s.note = "step underflow";
      s.iterations = it + 1;
      break;
    }
    track(u, ev);
    if (opts.record_trace) s.trace.push_back(ev.energy.total);
    s.iterations = it + 1;
  }
  s.energy = ev.energy.total;
  if (!std::isfinite(s.energy)) {
    s.aborted = true;
    s.converged = false;
  }
  return {std::move(u), std::move(ev), std::move(s)};
}

}  // namespace detail

/// Multistart mass-projected gradient flow on { ||u||_2 = mass, ||grad u||_2 <= r_cap }.
inline SolveReport solve_at_mass(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                                 const ThresholdBundle& bundle, double mass_target, double r_cap,
                                 const SolveOptions& opts) {
  opts.check();
  const Grid& grid = kernel.grid();
  const int n = opts.n_starts;
  std::vector<std::optional<detail::FlowResult>> results(static_cast<std::size_t>(n));
  std::vector<StartSummary> failures(static_cast<std::size_t>(n));

  auto run_one = [&](int i) {
    std::string kind;
    try {
      Field u0 = start_field(grid, i, opts.seed, &kind);
      auto r = detail::run_flow(nl, kernel, std::move(u0), mass_target, r_cap, opts);
      r.summary.kind = kind;
      results[static_cast<std::size_t>(i)] = std::move(r);
    } catch (const std::exception& e) {
      StartSummary s;
      s.kind = kind;
      s.aborted = true;
      s.note = e.what();
      failures[static_cast<std::size_t>(i)] = s;
    }
  };

  const int threads = std::max(1, std::min(n, opts.threads > 0 ? opts.threads : thread_count_from_env()));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) run_one(i);
      });
    }
  }

  SolveReport report(grid);
  report.r_cap = r_cap;
  int best = -1;
  bool best_converged = false;
  double best_energy = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    if (!r) {
      report.starts.push_back(failures[static_cast<std::size_t>(i)]);
      continue;
    }
    report.starts.push_back(r->summary);
    const bool conv = r->summary.converged;
    // Converged starts win over unconverged ones; ties go to the lower index.
    if ((conv && !best_converged) || (conv == best_converged && r->summary.energy < best_energy)) {
      best = i;
      best_converged = conv;
      best_energy = r->summary.energy;
    }
  }
  report.best_start = best;
  if (best < 0) {
    report.failed_checks.push_back("no start produced a finite energy");
    return report;
  }
  const auto& win = *results[static_cast<std::size_t>(best)];
  report.u_star = win.u;
  report.residuals = detail::residuals_from(params, win.ev, win.u);
  if (params.b == 1) {
    report.residuals.energy.d_lower = pair_interaction(kernel, win.u, params.p_lower(), params.p_lower());
  }
  report.m_estimate = win.summary.energy;
  report.iterations = win.summary.iterations;
  report.converged = win.summary.converged;
  report.boundary_margin = r_cap - report.residuals.grad_norm;

  const double n_d = params.n();
  report.plateau = -0.5 * params.b * params.b * std::pow(bundle.s2, -(n_d + params.alpha) / n_d) *
                   std::pow(mass_target, 2.0 * (n_d + params.alpha) / n_d);
  report.below_plateau = report.residuals.energy.total < report.plateau;

  report.outside_theory = !(bundle.rho0.value > 0.0 && mass_target < bundle.rho0.value) ||
                          !validate(params, nl).all_satisfied();
  auto require = [&](bool ok, const char* what) {
    if (!ok) report.failed_checks.push_back(what);
  };
  require(report.converged, "not converged");
  require(report.residuals.lambda > 0.0, "lambda not positive");
  require(report.residuals.pohozaev < 1e-3, "pohozaev residual >= 1e-3");
  require(report.residuals.nehari_pohozaev < 1e-3, "nehari-pohozaev residual >= 1e-3");
  require(std::abs(report.residuals.mass - mass_target) <= 1e-8 * mass_target, "mass defect > 1e-8");
  require(report.boundary_margin > 0.05 * r_cap, "boundary margin <= 0.05 r_cap");
  require(report.below_plateau || params.b == 0, "energy not below the lower-critical plateau");
  report.certified = report.failed_checks.empty() && !report.outside_theory;
  return report;
}

/// R0 of the bundle, or the option override.
inline double resolve_cap(const ThresholdBundle& bundle, const SolveOptions& opts) {
  if (opts.r_cap) return *opts.r_cap;
  if (bundle.window) return bundle.window->r0;
  throw std::invalid_argument("solve: no r_cap given and the bundle has no barrier window (rho >= rho0)");
}

inline SolveReport solve(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                         const ThresholdBundle& bundle, const SolveOptions& opts) {
  check(params);
  return solve_at_mass(params, nl, kernel, bundle, params.rho, resolve_cap(bundle, opts), opts);
}

/// m_{R0}(a): best multistart energy at mass a with the ball fixed at R0(rho).
inline double m_estimate(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                         const ThresholdBundle& bundle, double a, const SolveOptions& opts,
                         SolveReport* full = nullptr) {
  if (!(a > 0.0)) throw std::invalid_argument("m_estimate: mass must be positive");
  SolveReport r = solve_at_mass(params, nl, kernel, bundle, a, resolve_cap(bundle, opts), opts);
  const double m = r.m_estimate;
  if (full != nullptr) *full = std::move(r);
  return m;
}

}  // namespace choquard
