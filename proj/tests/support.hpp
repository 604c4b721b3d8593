#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "choquard/choquard.hpp"

namespace choquard::testing {

inline double radius_sq(const std::array<double, 3>& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }

/// exp(-|x - c|^2 / (2 sigma^2)).
inline Field gaussian_field(const Grid& g, double sigma, const std::array<double, 3>& c = {0.0, 0.0, 0.0}) {
  return sample(g, [&](const auto& x) {
    const std::array<double, 3> d{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    return std::exp(-radius_sq(d) / (2.0 * sigma * sigma));
  });
}

/// Low-pass filtered white noise with correlation length ell.
inline Field random_smooth_field(const Grid& g, std::uint64_t seed, double ell) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field u(g);
  for (double& v : u.values) v = nd(rng);
  return apply_radial_multiplier(u, [&](double k2) { return std::exp(-0.5 * k2 * ell * ell); });
}

/// Smooth, decaying, sign-changing test field: a random smooth field under a Gaussian window.
inline Field random_localized_field(const Grid& g, std::uint64_t seed, double ell, double window) {
  Field u = random_smooth_field(g, seed, ell);
  const Field w = gaussian_field(g, window);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] *= w[i];
  return u;
}

/// Coulomb potential of exp(-r^2/(2 sigma^2)) in R^3 (alpha = 2).
inline double coulomb_of_gaussian(double sigma, double r) {
  const double q = std::pow(2.0 * std::numbers::pi * sigma * sigma, 1.5);
  if (r == 0.0) return q / (4.0 * std::numbers::pi) * std::sqrt(2.0 / std::numbers::pi) / sigma;
  return q / (4.0 * std::numbers::pi * r) * std::erf(r / (std::sqrt(2.0) * sigma));
}

/// Largest relative error of convolve() against the radial oracle over the
/// nodes with |x| < r_limit, for a centered Gaussian of width sigma.
inline double oracle_max_rel_error(const RieszKernel& kernel, double sigma, double r_limit) {
  const Grid& g = kernel.grid();
  const Field f = gaussian_field(g, sigma);
  const Field v = convolve(kernel, f);
  const double h = g.spacing();
  const double r_max = 12.0 * sigma;
  auto profile = [&](double s) { return std::exp(-s * s / (2.0 * sigma * sigma)); };
  std::map<long, double> oracle;
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r2 = radius_sq(g.position(i));
    if (r2 >= r_limit * r_limit) continue;
    const long key = std::lround(r2 / (h * h));
    auto it = oracle.find(key);
    if (it == oracle.end()) {
      it = oracle.emplace(key, radial_oracle(kernel.alpha(), profile, r_max, std::sqrt(r2)).value).first;
    }
    worst = std::max(worst, std::abs(v[i] - it->second) / std::abs(it->second));
  }
  return worst;
}

/// Reference preset at a fraction of its rho0, with its nonlinearity and bundle.
struct PresetRun {
  ProblemParams params;
  Nonlinearity nl;
  ThresholdBundle bundle;
};

inline PresetRun preset_at(double rho_fraction, const BundleOptions& opts = {}) {
  const auto pre = reference_preset();
  ProblemParams p = pre.params;
  Nonlinearity nl(p, pre.terms);
  const ThresholdBundle probe = make_bundle(p, nl, opts);
  p.rho = rho_fraction * probe.rho0.value;
  ThresholdBundle b = make_bundle(p, nl, opts);
  return {p, std::move(nl), std::move(b)};
}

}  // namespace choquard::testing
