#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "choquard/energy.hpp"
#include "choquard/grid.hpp"
#include "choquard/problem.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

/// phi(tau) = E(u_tau) sampled on a tau grid, with its components.
struct FiberCurve {
  std::vector<double> taus;
  std::vector<double> values;
  std::vector<double> kinetic;
  std::vector<double> interaction;
  std::vector<double> d_lower;
  /// Per-sample dilation diagnostics; unresolved samples are skipped by
  /// maxima detection.
  std::vector<DilationCheck> checks;
  std::vector<double> detected_maxima;
  double phi_at_1_slope = 0.0;

  std::size_t size() const { return taus.size(); }
};

struct FiberOptions {
  /// Half-width of the central difference for phi'(1).
  double slope_step = 1e-3;
  /// Also evaluate the lower-critical term at every tau (b = 1 only).
  bool with_d_lower = true;
};

/// n points log-spaced on [lo, hi].
inline std::vector<double> log_taus(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw std::invalid_argument("log_taus: need 0 < lo < hi and n >= 2");
  std::vector<double> t(static_cast<std::size_t>(n));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  return t;
}

inline std::vector<double> default_taus() { return log_taus(1e-2, 10.0, 200); }

/// Local maxima of a sampled curve by sign change of the discrete slope.
/// Flat runs between a rise and a fall count once, at their smallest tau.
inline std::vector<std::size_t> discrete_maxima(const std::vector<double>& y, const std::vector<bool>& use) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (use[i]) idx.push_back(i);
  }
  std::vector<std::size_t> out;
  int last_sign = 0;
  std::size_t rise_end = 0;
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    const double d = y[idx[k + 1]] - y[idx[k]];
    if (d == 0.0) continue;
    if (d > 0.0) {
      rise_end = idx[k + 1];
      last_sign = 1;
    } else {
      if (last_sign > 0) out.push_back(rise_end);
      last_sign = -1;
    }
  }
  return out;
}

inline FiberCurve fiber_curve(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                              const Field& u, std::vector<double> taus, const FiberOptions& opts = {}) {
  if (taus.empty()) throw std::invalid_argument("fiber_curve: empty tau list");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw std::invalid_argument("fiber_curve: tau must be positive");
    if (i > 0 && !(taus[i] > taus[i - 1])) throw std::invalid_argument("fiber_curve: taus must increase strictly");
  }
  FiberCurve c;
  c.taus = std::move(taus);
  const std::size_t n = c.taus.size();
  c.values.resize(n);
  c.kinetic.resize(n);
  c.interaction.resize(n);
  c.d_lower.assign(n, 0.0);
  c.checks.resize(n);
  const bool lower = params.b == 1 && opts.with_d_lower;
  for (std::size_t i = 0; i < n; ++i) {
    const Field v = dilate(u, c.taus[i], &c.checks[i]);
    const EnergyBreakdown e = evaluate(nl, kernel, v).energy;
    c.values[i] = e.total;
    c.kinetic[i] = e.kinetic;
    c.interaction[i] = e.interaction;
    if (lower) c.d_lower[i] = pair_interaction(kernel, v, params.p_lower(), params.p_lower());
  }
  std::vector<bool> use(n);
  for (std::size_t i = 0; i < n; ++i) use[i] = c.checks[i].resolved;
  for (std::size_t i : discrete_maxima(c.values, use)) c.detected_maxima.push_back(c.taus[i]);

  const double eta = opts.slope_step;
  const double up = evaluate(nl, kernel, dilate(u, 1.0 + eta)).energy.total;
  const double down = evaluate(nl, kernel, dilate(u, 1.0 - eta)).energy.total;
  c.phi_at_1_slope = (up - down) / (2.0 * eta);
  return c;
}

struct G4Report {
  int n_maxima = 0;
  bool decreasing_after_max = true;
  /// The sampled window does not cover a decade of tau on both sides of
  /// every detected maximum.
  bool inconclusive = false;
  /// max - min of phi over the resolved samples.
  double variation = 0.0;
};

/// Sampled (G4) diagnostic: at most one local maximum and strictly negative
/// discrete slopes after it. Not a proof of (G4).
inline G4Report g4_diagnose(const FiberCurve& c) {
  G4Report r;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.checks.empty() || c.checks[i].resolved) idx.push_back(i);
  }
  if (idx.size() < 3) {
    r.inconclusive = true;
    return r;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i : idx) {
    lo = std::min(lo, c.values[i]);
    hi = std::max(hi, c.values[i]);
  }
  r.variation = hi - lo;
  r.n_maxima = static_cast<int>(c.detected_maxima.size());
  const double t_first = c.taus[idx.front()];
  const double t_last = c.taus[idx.back()];
  for (double tm : c.detected_maxima) {
    if (tm / t_first < 10.0 || t_last / tm < 10.0) r.inconclusive = true;
  }
  if (!c.detected_maxima.empty()) {
    const double tm = c.detected_maxima.front();
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      if (c.taus[idx[k]] < tm) continue;
      if (!(c.values[idx[k + 1]] < c.values[idx[k]])) {
        r.decreasing_after_max = false;
        break;
      }
    }
  }
  return r;
}

}  // namespace choquard
