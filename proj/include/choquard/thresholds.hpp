#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "choquard/energy.hpp"
#include "choquard/grid.hpp"
#include "choquard/problem.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

/// Sharp HLS constant C_alpha(N) for p = r = 2N/(N+alpha), without A_alpha.
inline double hls_sharp_constant(int n, double alpha) {
  check_alpha(n, alpha, "hls_sharp_constant");
  const double nn = n;
  return std::pow(std::numbers::pi, 0.5 * (nn - alpha)) * std::tgamma(0.5 * alpha) /
         std::tgamma(0.5 * (nn + alpha)) * std::pow(std::tgamma(0.5 * nn) / std::tgamma(nn), -alpha / nn);
}

/// Best Sobolev constant inf ||grad u||^2 / ||u||_{2*}^2 (Aubin, Talenti).
inline double sobolev_constant(int n) {
  const double nn = n;
  return std::numbers::pi * nn * (nn - 2.0) * std::pow(std::tgamma(0.5 * nn) / std::tgamma(nn), 2.0 / nn);
}

/// Closed-form infima the trial quotients approximate. The lower-critical
/// quotient is attained by the HLS extremal, so its infimum is
/// (A C)^{-N/(N+alpha)}; the upper-critical one is attained by the
/// Aubin-Talenti profile, giving S3 (A C)^{-(N-2)/(N+alpha)}.
struct ExactS {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
};

inline ExactS exact_s(int n, double alpha) {
  const double ac = riesz_constant(n, alpha) * hls_sharp_constant(n, alpha);
  const double nn = n;
  ExactS s;
  s.s3 = sobolev_constant(n);
  s.s2 = std::pow(ac, -nn / (nn + alpha));
  s.s1 = s.s3 * std::pow(ac, -(nn - 2.0) / (nn + alpha));
  return s;
}

// ---------------------------------------------------------------------------
// Trial-function estimates on a grid

struct SEstimate {
  double value = 0.0;
  /// Quotient at the base scale delta and at 2 delta.
  double at_delta = 0.0;
  double at_2delta = 0.0;
  double delta = 0.0;
  /// max |u| on the box faces relative to max |u|, worst of the two scales.
  double boundary_ratio = 0.0;
  bool resolved = true;
  bool extrapolated = false;
};

namespace detail {

inline double face_ratio(const Field& u) {
  const Grid& g = u.grid;
  double umax = 0.0;
  double face = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    umax = std::max(umax, std::abs(u[i]));
    const auto ijk = g.unravel(i);
    for (int d = 0; d < g.dim(); ++d) {
      if (ijk[static_cast<std::size_t>(d)] == 0) face = std::max(face, std::abs(u[i]));
    }
  }
  return umax > 0.0 ? face / umax : 0.0;
}

/// radial(|x - center|^2) with minimum-image distances, so a recentered
/// profile is the periodic translate of the centered one.
inline Field centered_profile(const Grid& g, const std::array<double, 3>& center, auto&& radial) {
  const double box = g.box();
  return sample(g, [&](const std::array<double, 3>& x) {
    double r2 = 0.0;
    for (int d = 0; d < g.dim(); ++d) {
      double dx = x[static_cast<std::size_t>(d)] - center[static_cast<std::size_t>(d)];
      dx -= box * std::floor(dx / box + 0.5);
      r2 += dx * dx;
    }
    return radial(r2);
  });
}

}  // namespace detail

/// Lower-critical quotient ||u||^2 / D(u)^{N/(N+alpha)} with
/// D(u) = int (I_a * |u|^{(N+a)/N}) |u|^{(N+a)/N}.
inline double s2_quotient(const ProblemParams& params, const RieszKernel& kernel, const Field& u) {
  const double p = params.p_lower();
  const double d = pair_interaction(kernel, u, p, p);
  return inner(u, u) / std::pow(d, params.n() / (params.n() + params.alpha));
}

/// Upper-critical quotient ||grad u||^2 / D(u)^{(N-2)/(N+alpha)} with exponent (N+a)/(N-2).
inline double s1_quotient(const ProblemParams& params, const RieszKernel& kernel, const Field& u) {
  const double p = params.p_upper();
  const double d = pair_interaction(kernel, u, p, p);
  return grad_norm_sq(u) / std::pow(d, (params.n() - 2.0) / (params.n() + params.alpha));
}

/// Sobolev quotient ||grad u||^2 / ||u||_{2*}^2.
inline double s3_quotient(const Field& u) {
  const int n = u.grid.dim();
  const double two_star = 2.0 * n / (n - 2.0);
  double s = 0.0;
  for (double v : u.values) s += std::pow(std::abs(v), two_star);
  const double norm = std::pow(s * u.grid.cell_volume(), 1.0 / two_star);
  return grad_norm_sq(u) / (norm * norm);
}

/// Default scale for the lower-critical extremal: four grid cells. The
/// profile's tail mass outside the box grows like (delta/L)^3, so delta
/// must stay small next to L while still being resolved.
inline double default_s2_delta(const Grid& g) { return 4.0 * g.spacing(); }

/// Default Aubin-Talenti scale: L/48, so that 2 delta = L/24.
inline double default_talenti_delta(const Grid& g) { return g.box() / 48.0; }

/// The lower-critical extremal (delta/(delta^2+|x-y|^2))^{N/2}.
inline Field s2_extremal(const Grid& g, double delta, const std::array<double, 3>& center = {0.0, 0.0, 0.0}) {
  const double half_n = 0.5 * g.dim();
  return detail::centered_profile(g, center, [&](double r2) { return std::pow(delta / (delta * delta + r2), half_n); });
}

/// Aubin-Talenti profile (delta/(delta^2+r^2))^{(N-2)/2}, shifted down by its
/// value at r = L/2 and clipped at zero so it has compact support in the box.
inline Field talenti_profile(const Grid& g, double delta) {
  const double e = 0.5 * (g.dim() - 2.0);
  const double rc = 0.5 * g.box();
  const double floor = std::pow(delta / (delta * delta + rc * rc), e);
  return detail::centered_profile(
      g, {0.0, 0.0, 0.0}, [&](double r2) { return std::max(0.0, std::pow(delta / (delta * delta + r2), e) - floor); });
}

inline SEstimate estimate_s2(const ProblemParams& params, const RieszKernel& kernel, double delta = 0.0,
                             const std::array<double, 3>& center = {0.0, 0.0, 0.0}) {
  const Grid& g = kernel.grid();
  SEstimate est;
  est.delta = delta > 0.0 ? delta : default_s2_delta(g);
  const Field u1 = s2_extremal(g, est.delta, center);
  const Field u2 = s2_extremal(g, 2.0 * est.delta, center);
  est.at_delta = s2_quotient(params, kernel, u1);
  est.at_2delta = s2_quotient(params, kernel, u2);
  est.value = est.at_delta;
  est.boundary_ratio = detail::face_ratio(u1);
  est.resolved = est.boundary_ratio <= 1e-6;
  return est;
}

namespace detail {

// The hard cutoff costs a relative error linear in delta/R, so the two
// scales are combined as 2 Q(delta) - Q(2 delta).
inline SEstimate talenti_estimate(const Grid& g, double delta, bool richardson, auto&& quotient) {
  SEstimate est;
  est.delta = delta > 0.0 ? delta : default_talenti_delta(g);
  const Field u1 = talenti_profile(g, est.delta);
  const Field u2 = talenti_profile(g, 2.0 * est.delta);
  est.at_delta = quotient(u1);
  est.at_2delta = quotient(u2);
  est.extrapolated = richardson;
  est.value = richardson ? 2.0 * est.at_delta - est.at_2delta : est.at_delta;
  est.boundary_ratio = std::max(face_ratio(u1), face_ratio(u2));
  est.resolved = est.boundary_ratio <= 1e-6;
  return est;
}

}  // namespace detail

inline SEstimate estimate_s1(const ProblemParams& params, const RieszKernel& kernel, double delta = 0.0,
                             bool richardson = true) {
  return detail::talenti_estimate(kernel.grid(), delta, richardson,
                                  [&](const Field& u) { return s1_quotient(params, kernel, u); });
}

inline SEstimate estimate_s3(const Grid& grid, double delta = 0.0, bool richardson = true) {
  return detail::talenti_estimate(grid, delta, richardson, [](const Field& u) { return s3_quotient(u); });
}

// ---------------------------------------------------------------------------
// Barrier geometry

struct BarrierConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

struct BarrierInputs {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double a_alpha = 0.0;
  double c_alpha = 0.0;
  double c0 = 0.0;
  int b = 0;
};

inline BarrierConstants c1_c2(const ProblemParams& params, const BarrierInputs& in) {
  const double n = params.n();
  const double al = params.alpha;
  const double mixed =
      0.5 * in.c0 * (in.b + in.c0) * in.a_alpha * in.c_alpha * std::pow(in.s3, -0.5 * (n + al) / (n - 2.0));
  BarrierConstants c;
  c.c1 = 0.5 * in.c0 * (2.0 * in.b + in.c0) * std::pow(in.s2, -(n + al) / n) + mixed;
  c.c2 = 0.5 * in.c0 * in.c0 * std::pow(in.s1, -(n + al) / (n - 2.0)) + mixed;
  return c;
}

/// h(a,t) = 1/2 - C1 a^{2(N+a)/N} t^{-2} - C2 t^{2(N+a)/(N-2) - 2}.
inline double h_value(double a, double t, const BarrierConstants& c, const ProblemParams& params) {
  const double n = params.n();
  const double al = params.alpha;
  return 0.5 - c.c1 * std::pow(a, 2.0 * (n + al) / n) / (t * t) - c.c2 * std::pow(t, 2.0 * (n + al) / (n - 2.0) - 2.0);
}

/// Unique critical point of t -> h(a, t).
inline double h_argmax(double a, const BarrierConstants& c, const ProblemParams& params) {
  const double n = params.n();
  const double al = params.alpha;
  return std::pow(c.c1 * (n - 2.0) * std::pow(a, 2.0 * (n + al) / n) / (c.c2 * (2.0 + al)),
                  (n - 2.0) / (2.0 * (n + al)));
}

/// Closed-form maximum value h(a, t0).
inline double h_max(double a, const BarrierConstants& c, const ProblemParams& params) {
  const double n = params.n();
  const double al = params.alpha;
  const double x = c.c1 * (n - 2.0) * std::pow(a, 2.0 * (n + al) / n) / (c.c2 * (2.0 + al));
  return 0.5 - c.c2 * (n + al) / (n - 2.0) * std::pow(x, (2.0 + al) / (n + al));
}

namespace detail {

inline void require_positive(const BarrierConstants& c) {
  if (!(c.c1 > 0.0) || !(c.c2 > 0.0)) {
    throw std::domain_error("rho_zero: C1 and C2 must be positive (threshold is unconstrained)");
  }
}

/// Bisection on a sign change of fn over [lo, hi] in log space until the
/// bracket stops shrinking.
template <class Fn>
double bisect_log(Fn&& fn, double lo, double hi) {
  double flo = fn(lo);
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (!(mid > lo && mid < hi)) break;
    const double fm = fn(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

}  // namespace detail

/// rho0 from the maximizer condition h(rho, t0(rho)) = 0, solved numerically.
inline double rho_zero_by_maximizer(const BarrierConstants& c, const ProblemParams& params) {
  detail::require_positive(c);
  auto w = [&](double a) { return h_value(a, h_argmax(a, c, params), c, params); };
  double lo = 1.0;
  double hi = 1.0;
  while (w(lo) <= 0.0) {
    lo *= 0.5;
    if (lo < 1e-300) throw std::domain_error("rho_zero: no positive barrier at any mass");
  }
  while (w(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e300) throw std::domain_error("rho_zero: barrier positive at every mass");
  }
  return detail::bisect_log(w, lo, hi);
}

/// rho0 from the explicit threshold
///   rho^{2(N+a)/N} = ((N-2)/(2 C2 (N+a)))^{(N+a)/(2+a)} (C2/C1) (2+a)/(N-2).
inline double rho_zero_printed(const BarrierConstants& c, const ProblemParams& params) {
  detail::require_positive(c);
  const double n = params.n();
  const double al = params.alpha;
  const double x = std::pow((n - 2.0) / (2.0 * c.c2 * (n + al)), (n + al) / (2.0 + al)) * (c.c2 / c.c1) *
                   (2.0 + al) / (n - 2.0);
  return std::pow(x, n / (2.0 * (n + al)));
}

struct RhoZero {
  double value = 0.0;
  double by_maximizer = 0.0;
  double printed = 0.0;
  double relative_gap = 0.0;
  /// False if the two routes disagree beyond 1e-10; the printed reading is
  /// then suspect and the maximizer value is kept.
  bool consistent = true;
};

inline RhoZero rho_zero(const BarrierConstants& c, const ProblemParams& params) {
  RhoZero r;
  r.by_maximizer = rho_zero_by_maximizer(c, params);
  r.printed = rho_zero_printed(c, params);
  r.relative_gap = std::abs(r.by_maximizer - r.printed) / r.printed;
  r.consistent = r.relative_gap <= 1e-10;
  r.value = r.by_maximizer;
  return r;
}

struct BarrierWindow {
  double t0 = 0.0;
  double hmax = 0.0;
  double r0 = 0.0;
  double r1 = 0.0;
};

class NoPositiveWindow : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Roots R0 < t0 < R1 of t -> h(rho, t).
inline BarrierWindow h_roots(double rho, const BarrierConstants& c, const ProblemParams& params) {
  detail::require_positive(c);
  BarrierWindow w;
  w.t0 = h_argmax(rho, c, params);
  w.hmax = h_value(rho, w.t0, c, params);
  if (!(w.hmax > 0.0)) throw NoPositiveWindow("no positive window: rho is not below rho0");
  auto h = [&](double t) { return h_value(rho, t, c, params); };
  double lo = w.t0;
  while (h(lo) > 0.0) lo *= 0.5;
  double hi = w.t0;
  while (h(hi) > 0.0) hi *= 2.0;
  w.r0 = detail::bisect_log(h, lo, w.t0);
  w.r1 = detail::bisect_log(h, w.t0, hi);
  return w;
}

// ---------------------------------------------------------------------------
// Bundle

enum class SSource {
  /// Quotients of the known extremals evaluated on a grid.
  trial,
  /// Closed-form infima.
  exact,
};

struct BundleOptions {
  SSource source = SSource::trial;
  int m = 128;
  double box = 24.0;
};

struct ThresholdBundle {
  double a_alpha = 0.0;
  double c_alpha = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  ExactS s_exact;
  std::string s1_provenance;
  std::string s2_provenance;
  std::string s3_provenance;
  double c0 = 0.0;
  BarrierConstants c;
  RhoZero rho0;
  /// Present when the bundle was built for a mass below rho0.
  std::optional<double> rho;
  std::optional<BarrierWindow> window;

  BarrierInputs inputs(int b) const { return {s1, s2, s3, a_alpha, c_alpha, c0, b}; }
};

inline ThresholdBundle make_bundle(const ProblemParams& params, const Nonlinearity& nl,
                                   const BundleOptions& opts = {}) {
  check(params);
  ThresholdBundle bundle;
  bundle.a_alpha = riesz_constant(params.dim, params.alpha);
  bundle.c_alpha = hls_sharp_constant(params.dim, params.alpha);
  bundle.s_exact = exact_s(params.dim, params.alpha);
  if (opts.source == SSource::exact) {
    bundle.s1 = bundle.s_exact.s1;
    bundle.s2 = bundle.s_exact.s2;
    bundle.s3 = bundle.s_exact.s3;
    bundle.s1_provenance = bundle.s2_provenance = bundle.s3_provenance = "exact-formula";
  } else {
    const Grid grid(params.dim, opts.m, opts.box);
    const auto kernel = cached_kernel(grid, params.alpha);
    bundle.s1 = estimate_s1(params, *kernel).value;
    bundle.s2 = estimate_s2(params, *kernel).value;
    bundle.s3 = estimate_s3(grid).value;
    bundle.s1_provenance = bundle.s2_provenance = bundle.s3_provenance = "trial-estimate";
  }
  bundle.c0 = nl.c0();
  bundle.c = c1_c2(params, bundle.inputs(params.b));
  if (bundle.c.c1 > 0.0 && bundle.c.c2 > 0.0) {
    bundle.rho0 = rho_zero(bundle.c, params);
    if (params.rho < bundle.rho0.value) {
      bundle.rho = params.rho;
      bundle.window = h_roots(params.rho, bundle.c, params);
    }
  }
  return bundle;
}

}  // namespace choquard
