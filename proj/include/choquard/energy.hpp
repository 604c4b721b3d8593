#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "choquard/grid.hpp"
#include "choquard/problem.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

struct EnergyBreakdown {
  double kinetic = 0.0;      // (1/2) ||grad u||^2
  double interaction = 0.0;  // (1/2) int (I_a * F(u)) F(u)
  double total = 0.0;        // kinetic - interaction
  double d_lower = 0.0;      // int (I_a * |u|^p_lower) |u|^p_lower, only filled when b = 1
};

namespace detail {

inline void check_finite_powers(const Nonlinearity& nl, const Field& u) {
  double umax = 0.0;
  for (double v : u.values) {
    if (!std::isfinite(v)) throw std::domain_error("energy: field contains a non-finite value");
    umax = std::max(umax, std::abs(v));
  }
  if (nl.b() == 1 && !std::isfinite(std::pow(umax, nl.p_lower()))) {
    throw std::overflow_error("energy: b|t|^p_lower overflows at max|u|");
  }
  for (const auto& t : nl.terms()) {
    if (!std::isfinite(t.coef * std::pow(umax, t.exponent))) {
      std::ostringstream os;
      os << "energy: term " << t.coef << "*|t|^" << t.exponent << " overflows at max|u| = " << umax;
      throw std::overflow_error(os.str());
    }
  }
}

inline Field pointwise(const Field& u, auto&& fn) {
  Field out(u.grid);
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = fn(u[i]);
  return out;
}

}  // namespace detail

/// Everything the solver needs from one point u: a single convolution of F(u)
/// serves the energy, the gradient and lambda.
struct Evaluation {
  EnergyBreakdown energy;
  Field potential;  // I_a * F(u)
  Field f_of_u;     // f(u)
  Field neg_lap;    // -Laplacian u
  double grad_sq = 0.0;
  double mass_sq = 0.0;
  /// int (I_a * F(u)) f(u) u
  double coupling = 0.0;

  explicit Evaluation(const Grid& g) : potential(g), f_of_u(g), neg_lap(g) {}
};

inline Evaluation evaluate(const Nonlinearity& nl, const RieszKernel& kernel, const Field& u) {
  if (!(u.grid == kernel.grid())) throw std::invalid_argument("evaluate: field grid differs from kernel grid");
  detail::check_finite_powers(nl, u);
  Evaluation ev(u.grid);
  const Field big_f = detail::pointwise(u, [&](double t) { return nl.F(t); });
  ev.f_of_u = detail::pointwise(u, [&](double t) { return nl.f(t); });
  ev.potential = convolve(kernel, big_f);
  ev.neg_lap = neg_laplacian(u);
  ev.grad_sq = grad_norm_sq(u);
  ev.mass_sq = inner(u, u);
  double inter = 0.0;
  double coup = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    inter += ev.potential[i] * big_f[i];
    coup += ev.potential[i] * ev.f_of_u[i] * u[i];
  }
  const double vol = u.grid.cell_volume();
  ev.energy.kinetic = 0.5 * ev.grad_sq;
  ev.energy.interaction = 0.5 * inter * vol;
  ev.energy.total = ev.energy.kinetic - ev.energy.interaction;
  ev.coupling = coup * vol;
  if (!std::isfinite(ev.energy.total)) throw std::overflow_error("energy: non-finite total");
  return ev;
}

/// int (I_a * |u|^p) |u|^q.
inline double pair_interaction(const RieszKernel& kernel, const Field& u, double p, double q) {
  const Field up = detail::pointwise(u, [&](double t) { return std::pow(std::abs(t), p); });
  const Field uq = p == q ? up : detail::pointwise(u, [&](double t) { return std::pow(std::abs(t), q); });
  return inner(convolve(kernel, up), uq);
}

inline EnergyBreakdown energy(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                              const Field& u) {
  EnergyBreakdown e = evaluate(nl, kernel, u).energy;
  if (params.b == 1) e.d_lower = pair_interaction(kernel, u, params.p_lower(), params.p_lower());
  return e;
}

/// L^2 gradient -Laplacian u - (I_a * F(u)) f(u).
inline Field l2_gradient(const Evaluation& ev) {
  Field g = ev.neg_lap;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= ev.potential[i] * ev.f_of_u[i];
  return g;
}

inline Field l2_gradient(const ProblemParams&, const Nonlinearity& nl, const RieszKernel& kernel, const Field& u) {
  return l2_gradient(evaluate(nl, kernel, u));
}

inline double lambda_of(const Evaluation& ev) {
  if (!(ev.mass_sq > 0.0)) throw std::invalid_argument("lambda_of: zero field");
  return (ev.coupling - ev.grad_sq) / ev.mass_sq;
}

inline double lambda_of(const ProblemParams&, const Nonlinearity& nl, const RieszKernel& kernel, const Field& u) {
  return lambda_of(evaluate(nl, kernel, u));
}

/// |a + b + c| / (|a| + |b| + |c|), 0 when all vanish.
inline double normalized_sum(double a, double b, double c) {
  const double den = std::abs(a) + std::abs(b) + std::abs(c);
  return den == 0.0 ? 0.0 : std::abs(a + b + c) / den;
}

inline double pohozaev_residual(const ProblemParams& params, const Evaluation& ev, double lambda) {
  const double n = params.n();
  const double t1 = 0.5 * (n - 2.0) * ev.grad_sq;
  const double t2 = 0.5 * n * lambda * ev.mass_sq;
  const double t3 = -0.5 * (n + params.alpha) * 2.0 * ev.energy.interaction;
  return normalized_sum(t1, t2, t3);
}

inline double pohozaev_residual(const ProblemParams& params, const Nonlinearity& nl, const RieszKernel& kernel,
                                const Field& u, double lambda) {
  return pohozaev_residual(params, evaluate(nl, kernel, u), lambda);
}

/// Relative defect of ||grad u||^2 = (N/2) int (I_a * F(u)) (f(u)u - (N+a)/N F(u)).
inline double nehari_pohozaev_residual(const ProblemParams& params, const Evaluation& ev) {
  const double n = params.n();
  const double lhs = ev.grad_sq;
  const double rhs = 0.5 * n * (ev.coupling - params.p_lower() * 2.0 * ev.energy.interaction);
  const double den = std::abs(lhs) + std::abs(rhs);
  return den == 0.0 ? 0.0 : std::abs(lhs - rhs) / den;
}

inline double nehari_pohozaev_residual(const ProblemParams& params, const Nonlinearity& nl,
                                       const RieszKernel& kernel, const Field& u) {
  return nehari_pohozaev_residual(params, evaluate(nl, kernel, u));
}

/// The lambda implied by the Pohozaev identity, for cross-checking lambda_of.
inline double pohozaev_lambda(const ProblemParams& params, const Evaluation& ev) {
  const double n = params.n();
  return ((n + params.alpha) * ev.energy.interaction - 0.5 * (n - 2.0) * ev.grad_sq) / (0.5 * n * ev.mass_sq);
}

// ---------------------------------------------------------------------------
// Dilation u_tau(x) = tau^{N/2} u(tau x)

struct DilationCheck {
  /// tau < 1: L^2 fraction of u outside the sampled cube |y_d| <= tau L/2.
  double lost_mass_fraction = 0.0;
  /// tau > 1: spectral energy fraction above the compressed Nyquist limit.
  double aliased_fraction = 0.0;
  bool resolved = true;
};

namespace detail {

/// Row-major m x m matrix evaluating the trigonometric interpolant of axis
/// samples at tau * x_j. Rows for |tau x_j| > L/2 are zero (u vanishes
/// outside the box).
inline std::vector<double> dilation_matrix(const Grid& g, double tau) {
  const int m = g.points_per_axis();
  const double L = g.box();
  std::vector<double> t(static_cast<std::size_t>(m) * m, 0.0);
  for (int j = 0; j < m; ++j) {
    const double y = tau * g.coordinate(j);
    if (std::abs(y) > 0.5 * L) continue;
    for (int l = 0; l < m; ++l) {
      const double theta = 2.0 * std::numbers::pi * (y - g.coordinate(l)) / L;
      const double half = 0.5 * theta;
      const double s = std::sin(half);
      double w;
      if (std::abs(s) < 1e-14) {
        // theta is a multiple of 2 pi; the kernel is cos(m theta/2) there.
        w = std::cos(0.5 * m * theta);
      } else {
        w = std::sin(0.5 * m * theta) * std::cos(half) / (m * s);
      }
      t[static_cast<std::size_t>(j) * m + l] = w;
    }
  }
  return t;
}

inline void apply_along_axis(const Grid& g, std::vector<double>& data, const std::vector<double>& mat, int axis) {
  const int m = g.points_per_axis();
  const int dim = g.dim();
  std::size_t stride = 1;
  for (int d = dim - 1; d > axis; --d) stride *= static_cast<std::size_t>(m);
  const std::size_t block = stride * static_cast<std::size_t>(m);
  const std::size_t n_blocks = data.size() / block;
  std::vector<double> line(static_cast<std::size_t>(m));
  std::vector<double> out(static_cast<std::size_t>(m));
  for (std::size_t b = 0; b < n_blocks; ++b) {
    for (std::size_t s = 0; s < stride; ++s) {
      const std::size_t base = b * block + s;
      for (int l = 0; l < m; ++l) line[static_cast<std::size_t>(l)] = data[base + static_cast<std::size_t>(l) * stride];
      for (int j = 0; j < m; ++j) {
        const double* row = &mat[static_cast<std::size_t>(j) * m];
        double acc = 0.0;
        for (int l = 0; l < m; ++l) acc += row[l] * line[static_cast<std::size_t>(l)];
        out[static_cast<std::size_t>(j)] = acc;
      }
      for (int j = 0; j < m; ++j) data[base + static_cast<std::size_t>(j) * stride] = out[static_cast<std::size_t>(j)];
    }
  }
}

}  // namespace detail

inline DilationCheck dilation_check(const Field& u, double tau) {
  DilationCheck c;
  const Grid& g = u.grid;
  const double total = inner(u, u);
  if (total == 0.0) return c;
  if (tau < 1.0) {
    const double half = 0.5 * tau * g.box();
    double lost = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto x = g.position(i);
      bool inside = true;
      for (int d = 0; d < g.dim(); ++d) inside = inside && std::abs(x[static_cast<std::size_t>(d)]) <= half;
      if (!inside) lost += u[i] * u[i];
    }
    c.lost_mass_fraction = lost * g.cell_volume() / total;
  } else if (tau > 1.0) {
    const double limit = g.points_per_axis() / (2.0 * tau);
    auto& fft = g.workspace();
    std::copy(u.values.begin(), u.values.end(), fft.real().begin());
    fft.forward();
    const auto spec = fft.spectrum();
    double all = 0.0;
    double high = 0.0;
    for_each_mode(g, [&](std::size_t idx, const std::array<int, 3>& n, double w) {
      const double e = w * std::norm(spec[idx]);
      all += e;
      bool out = false;
      for (int d = 0; d < g.dim(); ++d) out = out || std::abs(n[static_cast<std::size_t>(d)]) > limit;
      if (out) high += e;
    });
    c.aliased_fraction = all > 0.0 ? high / all : 0.0;
  }
  // The alias bound is tighter because |u|^p with p < 2 carries more high
  // frequencies than u itself.
  c.resolved = c.lost_mass_fraction <= 1e-6 && c.aliased_fraction <= 1e-7;
  return c;
}

/// u_tau by separable trigonometric interpolation. When `check` is given it
/// receives the resolution diagnostics.
inline Field dilate(const Field& u, double tau, DilationCheck* check = nullptr) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("dilate: tau must be positive");
  if (check != nullptr) *check = dilation_check(u, tau);
  if (tau == 1.0) return u;
  const Grid& g = u.grid;
  const auto mat = detail::dilation_matrix(g, tau);
  std::vector<double> data = u.values;
  for (int axis = 0; axis < g.dim(); ++axis) detail::apply_along_axis(g, data, mat, axis);
  const double scale = std::pow(tau, 0.5 * g.dim());
  for (double& v : data) v *= scale;
  return Field(g, std::move(data));
}

}  // namespace choquard
