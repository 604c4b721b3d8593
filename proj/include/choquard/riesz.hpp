#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "choquard/grid.hpp"

namespace choquard {

inline void check_alpha(int n, double alpha, const char* where) {
  if (n < 1 || !(alpha > 0.0) || !(alpha < n)) {
    std::ostringstream os;
    os << where << ": need 0 < alpha < N (got N=" << n << ", alpha=" << alpha << ")";
    throw std::invalid_argument(os.str());
  }
}

/// A_alpha(N) = Gamma((N-alpha)/2) / (Gamma(alpha/2) pi^{N/2} 2^alpha).
inline double riesz_constant(int n, double alpha) {
  check_alpha(n, alpha, "riesz_constant");
  const double nn = n;
  return std::tgamma(0.5 * (nn - alpha)) /
         (std::tgamma(0.5 * alpha) * std::pow(std::numbers::pi, 0.5 * nn) * std::pow(2.0, alpha));
}

/// Epstein zeta Z_d(s) = sum over nonzero n in Z^d of |n|^{-s}, analytically
/// continued to 0 < s < d by Crandall's incomplete-gamma splitting.
inline double epstein_zeta(int d, double s) {
  if (d < 1 || d > 3) throw std::invalid_argument("epstein_zeta: d must be 1, 2 or 3");
  if (!(s > 0.0) || !(s < d)) throw std::invalid_argument("epstein_zeta: need 0 < s < d");
  const double pi = std::numbers::pi;
  const double phi = 0.5 * s;
  const double psi = 0.5 * d - phi;
  // Terms decay like exp(-pi |n|^2); |n_i| <= 6 leaves a tail below 1e-40.
  const int reach = 6;
  const int r1 = d >= 2 ? reach : 0;
  const int r2 = d >= 3 ? reach : 0;
  double sum = 0.0;
  for (int i = -reach; i <= reach; ++i) {
    for (int j = -r1; j <= r1; ++j) {
      for (int k = -r2; k <= r2; ++k) {
        const int n2 = i * i + j * j + k * k;
        if (n2 == 0) continue;
        const double x = pi * n2;
        sum += boost::math::tgamma(phi, x) * std::pow(x, -phi);
        sum += boost::math::tgamma(psi, x) * std::pow(x, -psi);
      }
    }
  }
  sum -= 1.0 / phi + 1.0 / psi;
  return sum * std::pow(pi, phi) / std::tgamma(phi);
}

/// How the singular x = 0 sample of the kernel is replaced.
enum class OriginRule {
  /// Lattice-sum correction: makes the punctured rectangle rule exact to
  /// leading order for |x|^{-gamma} times a smooth function.
  lattice_zeta,
  /// Kernel averaged over the ball whose volume equals one cell.
  ball_average,
};

/// Free-space Riesz kernel A_alpha / |x|^{N-alpha} sampled on the
/// minimum-image torus and transformed once.
class RieszKernel {
 public:
  RieszKernel(const Grid& grid, double alpha, OriginRule rule = OriginRule::lattice_zeta)
      : grid_(grid), alpha_(alpha), rule_(rule) {
    const int n = grid.dim();
    check_alpha(n, alpha, "build_kernel");
    const double a = riesz_constant(n, alpha);
    const double gamma = n - alpha;
    const double h = grid.spacing();
    trunc_radius_ = 0.5 * grid.box() * std::sqrt(static_cast<double>(n));

    auto& fft = grid.workspace();
    auto real = fft.real();
    const int m = grid.points_per_axis();
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      const auto ijk = grid.unravel(idx);
      double r2 = 0.0;
      for (int d = 0; d < n; ++d) {
        const int j = ijk[static_cast<std::size_t>(d)];
        const double x = (j <= m / 2 ? j : j - m) * h;
        r2 += x * x;
      }
      const double r = std::sqrt(r2);
      real[idx] = (r == 0.0 || r > trunc_radius_) ? 0.0 : a * std::pow(r, -gamma);
    }
    real[0] = origin_value(n, gamma, h) * a;

    fft.forward();
    const auto spec = fft.spectrum();
    symbol_.resize(spec.size());
    const double vol = grid.cell_volume();
    min_symbol_ = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spec.size(); ++k) {
      symbol_[k] = spec[k].real() * vol;
      if (!std::isfinite(symbol_[k])) throw std::runtime_error("build_kernel: non-finite symbol");
      min_symbol_ = std::min(min_symbol_, symbol_[k]);
    }
    if (min_symbol_ < 0.0) {
      // For alpha > 2 the torus-truncated kernel has slightly negative modes
      // (about 2e-4 of the DC value at m=128). They are clipped so the
      // quadratic form stays positive; anything larger means the grid cannot
      // represent this kernel.
      if (-min_symbol_ > 1e-2 * symbol_[0]) {
        std::ostringstream os;
        os << "build_kernel: symbol has a negative mode " << min_symbol_ << " (DC " << symbol_[0]
           << ") at alpha=" << alpha;
        throw std::runtime_error(os.str());
      }
      for (double& s : symbol_) {
        if (s < 0.0) {
          s = 0.0;
          ++clipped_modes_;
        }
      }
    }
  }

  const Grid& grid() const { return grid_; }
  double alpha() const { return alpha_; }
  OriginRule origin_rule() const { return rule_; }
  double trunc_radius() const { return trunc_radius_; }
  /// Half-spectrum symbol in the layout of RealFft::spectrum().
  const std::vector<double>& symbol() const { return symbol_; }
  /// Smallest symbol entry before clipping.
  double min_symbol() const { return min_symbol_; }
  std::size_t clipped_modes() const { return clipped_modes_; }

 private:
  double origin_value(int n, double gamma, double h) const {
    if (rule_ == OriginRule::lattice_zeta) return -epstein_zeta(n, gamma) * std::pow(h, -gamma);
    const double unit_ball = std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
    const double rb = h * std::pow(1.0 / unit_ball, 1.0 / n);
    return n / (n - gamma) * std::pow(rb, -gamma);
  }

  Grid grid_;
  double alpha_;
  OriginRule rule_;
  double trunc_radius_ = 0.0;
  double min_symbol_ = 0.0;
  std::size_t clipped_modes_ = 0;
  std::vector<double> symbol_;
};

inline RieszKernel build_kernel(const Grid& grid, double alpha, OriginRule rule = OriginRule::lattice_zeta) {
  return RieszKernel(grid, alpha, rule);
}

/// Process-wide read-only kernel cache keyed by (dim, m, L, alpha, rule).
inline std::shared_ptr<const RieszKernel> cached_kernel(const Grid& grid, double alpha,
                                                        OriginRule rule = OriginRule::lattice_zeta) {
  using Key = std::tuple<int, int, double, double, int>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const RieszKernel>> cache;
  const Key key{grid.dim(), grid.points_per_axis(), grid.box(), alpha, static_cast<int>(rule)};
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const RieszKernel>(grid, alpha, rule);
  std::lock_guard lock(mu);
  return cache.emplace(key, std::move(built)).first->second;
}

/// (I_alpha * g) sampled at the grid nodes.
inline Field convolve(const RieszKernel& kernel, const Field& g) {
  if (!(g.grid == kernel.grid())) throw std::invalid_argument("convolve: field grid differs from kernel grid");
  auto& fft = g.grid.workspace();
  std::copy(g.values.begin(), g.values.end(), fft.real().begin());
  fft.forward();
  auto spec = fft.spectrum();
  const auto& sym = kernel.symbol();
  const double norm = 1.0 / static_cast<double>(g.size());
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= sym[k] * norm;
  fft.backward();
  Field out(g.grid);
  std::copy(fft.real().begin(), fft.real().end(), out.values.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Radial quadrature oracle, N = 3

struct RadialValue {
  double value = 0.0;
  /// False when the profile at R_max exceeds 1e-10 of its value at 0.
  bool decayed = true;
};

/// (I_alpha * g)(r) for a radial g on R^3 with support treated as [0, r_max].
///
/// Spherical averaging of |r e - s w|^{-(3-alpha)} gives
///   2 pi / (r s (alpha-1)) [(r+s)^{alpha-1} - |r-s|^{alpha-1}],
/// which for alpha = 2 is 4 pi / max(r, s).
inline RadialValue radial_oracle(double alpha, const std::function<double(double)>& g, double r_max, double r) {
  check_alpha(3, alpha, "radial_oracle");
  if (!(r_max > 0.0) || !(r >= 0.0)) throw std::invalid_argument("radial_oracle: need r_max > 0 and r >= 0");
  const double a = riesz_constant(3, alpha);
  const double pi = std::numbers::pi;
  // tanh-sinh copes with the |r - s|^{alpha-1} endpoint singularity that
  // stalls Gauss-Kronrod for alpha < 2.
  thread_local boost::math::quadrature::tanh_sinh<double> quad(15);
  const double tol = 1e-13;

  RadialValue out;
  const double g0 = std::abs(g(0.0));
  out.decayed = std::abs(g(r_max)) <= 1e-10 * std::max(g0, std::numeric_limits<double>::min());

  if (r == 0.0) {
    auto f = [&](double s, double) { return s <= 0.0 ? 0.0 : std::pow(s, alpha - 1.0) * g(s); };
    out.value = 4.0 * pi * a * quad.integrate(f, 0.0, r_max, tol);
    return out;
  }

  // [(r+s)^{alpha-1} - d^{alpha-1}] / (alpha-1) with d = |r-s|, written
  // through expm1 so it stays accurate near alpha = 1, where it tends to
  // log((r+s)/d).
  const double e = alpha - 1.0;
  auto term = [&](double s, double d) {
    if (!(d > 0.0) || s <= 0.0) return 0.0;
    const double lr = std::log((r + s) / d);
    double bracket = lr;
    if (e != 0.0) {
      bracket = std::abs(e * lr) < 1.0 ? std::pow(d, e) * std::expm1(e * lr) / e
                                       : (std::pow(r + s, e) - std::pow(d, e)) / e;
    }
    return s * g(s) * bracket;
  };
  // tanh-sinh hands over xc, the signed distance to the nearer endpoint, so
  // d is exact next to the singular point s = r.
  const bool singular_inside = r <= r_max;
  auto inner_part = [&](double s, double xc) { return term(s, xc > 0.0 && singular_inside ? xc : r - s); };
  auto outer_part = [&](double s, double xc) { return term(s, xc < 0.0 ? -xc : s - r); };
  double total = quad.integrate(inner_part, 0.0, std::min(r, r_max), tol);
  if (r < r_max) total += quad.integrate(outer_part, r, r_max, tol);
  out.value = a * 2.0 * pi / r * total;
  return out;
}

/// Same oracle for a profile sampled uniformly on [0, r_max] (samples[0] at
/// s = 0, samples.back() at s = r_max), interpolated by a cubic B-spline with
/// zero slope at the origin.
inline RadialValue radial_oracle(double alpha, const std::vector<double>& samples, double r_max, double r) {
  if (samples.size() < 4) throw std::invalid_argument("radial_oracle: need at least 4 samples");
  const double ds = r_max / static_cast<double>(samples.size() - 1);
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline(samples.begin(), samples.end(), 0.0, ds, 0.0);
  return radial_oracle(alpha, [&](double s) { return s >= r_max ? samples.back() : spline(s); }, r_max, r);
}

}  // namespace choquard
