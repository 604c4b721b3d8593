#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace choquard;
using namespace choquard::testing;

namespace {

constexpr double pi = std::numbers::pi;

const ProblemParams& p32() {
  static const ProblemParams p{3, 2.0, 1, 1.0};
  return p;
}

BarrierConstants preset_constants() { return preset_at(0.5, BundleOptions{SSource::exact}).bundle.c; }

}  // namespace

TEST(Constants, HlsSharpConstantExamples) {
  EXPECT_NEAR(hls_sharp_constant(3, 2.0), 4.0 / 3.0 * std::pow(4.0 / std::sqrt(pi), 2.0 / 3.0), 1e-13);
  EXPECT_NEAR(hls_sharp_constant(3, 2.0), 2.2940107035415990009, 1e-13);
  EXPECT_NEAR(hls_sharp_constant(4, 2.0), 0.5 * pi * std::sqrt(6.0), 1e-13);
  double prev = hls_sharp_constant(3, 0.1);
  // C grows like 2/alpha near 0, so the sweep step is fine enough for that.
  for (int i = 1; i <= 2800; ++i) {
    const double a = 0.1 + 2.8 * i / 2800.0;
    const double c = hls_sharp_constant(3, a);
    EXPECT_GT(c, 0.0);
    EXPECT_LT(std::abs(c - prev), 0.05 * std::max(c, prev)) << "alpha=" << a;
    prev = c;
  }
}

TEST(Constants, ClosedFormInfima) {
  // Best Sobolev constant for N = 3: 3 (pi/2)^{4/3}.
  EXPECT_NEAR(sobolev_constant(3), 3.0 * std::pow(pi / 2.0, 4.0 / 3.0), 1e-12);
  const ExactS s = exact_s(3, 2.0);
  const double ac = riesz_constant(3, 2.0) * hls_sharp_constant(3, 2.0);
  EXPECT_NEAR(s.s2, std::pow(ac, -0.6), 1e-14);
  EXPECT_NEAR(s.s1, s.s3 * std::pow(ac, -0.2), 1e-13);
}

TEST(Estimates, LowerCriticalExtremal) {
  const Grid g(3, 64, 24.0);
  const auto k = cached_kernel(g, 2.0);
  const SEstimate e = estimate_s2(p32(), *k);
  EXPECT_NEAR(e.at_delta / e.at_2delta, 1.0, 1e-3);
  // Periodic translate by whole cells, and an arbitrary recentering.
  const double h = g.spacing();
  const SEstimate lattice = estimate_s2(p32(), *k, 0.0, {7 * h, -5 * h, 3 * h});
  const SEstimate off = estimate_s2(p32(), *k, 0.0, {1.7, -0.9, 0.4});
  EXPECT_NEAR(lattice.value / e.value, 1.0, 1e-12);
  EXPECT_NEAR(off.value / e.value, 1.0, 1e-6);
  // Sharp HLS bounds the quotient from below.
  EXPECT_GE(e.value, exact_s(3, 2.0).s2 * (1.0 - 1e-6));
  EXPECT_FALSE(e.resolved);
  EXPECT_GT(e.boundary_ratio, 1e-6);
}

TEST(Estimates, TalentiProfileValues) {
  const Grid g(3, 64, 24.0);
  const auto k = cached_kernel(g, 2.0);
  const ExactS ex = exact_s(3, 2.0);
  const SEstimate s3 = estimate_s3(g);
  EXPECT_NEAR(s3.value / ex.s3, 1.0, 1e-2);
  const SEstimate s1 = estimate_s1(p32(), *k);
  EXPECT_GT(s1.value, 0.0);
  EXPECT_NEAR(s1.value / ex.s1, 1.0, 1e-2);
  EXPECT_TRUE(s1.extrapolated);
  EXPECT_DOUBLE_EQ(s1.value, 2.0 * s1.at_delta - s1.at_2delta);
}

TEST(Estimates, UpperCriticalDeltaInvariance) {
  // Extrapolated values at delta and 2 delta; the hard cutoff leaves a
  // residual drift of a few 1e-3 at m = 128.
  const Grid g(3, 128, 24.0);
  const auto k = cached_kernel(g, 2.0);
  const double d = 0.375;
  const double a = estimate_s1(p32(), *k, d).value;
  const double b = estimate_s1(p32(), *k, 2.0 * d).value;
  EXPECT_NEAR(a / b, 1.0, 5e-3);
}

TEST(Estimates, MonotoneGridRefinement) {
  std::vector<double> s1, s2, s3;
  for (int m : {32, 64, 128}) {
    const Grid g(3, m, 24.0);
    const auto k = cached_kernel(g, 2.0);
    s1.push_back(estimate_s1(p32(), *k).value);
    s2.push_back(estimate_s2(p32(), *k).value);
    s3.push_back(estimate_s3(g).value);
  }
  for (const auto* v : {&s1, &s2, &s3}) {
    EXPECT_LT(std::abs((*v)[2] - (*v)[1]), std::abs((*v)[1] - (*v)[0]));
  }
}

TEST(Barrier, C1C2Formulas) {
  BarrierInputs in{7.7, 2.77, 5.49, 1.0 / (4.0 * pi), hls_sharp_constant(3, 2.0), 185.5, 1};
  const BarrierConstants c = c1_c2(p32(), in);
  // Independent high-precision evaluation of the two formulas.
  EXPECT_NEAR(c.c1, 3227.8043356997450454, 1e-9 * c.c1);
  EXPECT_NEAR(c.c2, 45.350036085246894619, 1e-9 * c.c2);
  in.c0 = 0.0;
  const BarrierConstants zero = c1_c2(p32(), in);
  EXPECT_EQ(zero.c1, 0.0);
  EXPECT_EQ(zero.c2, 0.0);
  in.c0 = 3.0;
  in.b = 0;
  const double c1_b0 = c1_c2(p32(), in).c1;
  in.b = 1;
  EXPECT_GT(c1_c2(p32(), in).c1, c1_b0);
}

TEST(Barrier, HShape) {
  const BarrierConstants c = preset_constants();
  const double a = 0.02;
  EXPECT_LT(h_value(a, 1e-8, c, p32()), -1e6);
  EXPECT_LT(h_value(a, 1e8, c, p32()), -1e6);
  const double t0 = h_argmax(a, c, p32());
  EXPECT_NEAR(h_value(a, t0, c, p32()), h_max(a, c, p32()), 1e-12);
  // (g1): one sign change of the discrete slope on a dense grid.
  const auto ts = log_taus(1e-4, 1e2, 20000);
  int changes = 0;
  int last = 0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double d = h_value(a, ts[i + 1], c, p32()) - h_value(a, ts[i], c, p32());
    const int sgn = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (sgn != 0 && last != 0 && sgn != last) ++changes;
    if (sgn != 0) last = sgn;
  }
  EXPECT_EQ(changes, 1);
}

TEST(Barrier, G3ComparisonLattice) {
  const BarrierConstants c = preset_constants();
  const double rho0 = rho_zero(c, p32()).value;
  const auto as = log_taus(1e-3 * rho0, rho0, 10);
  const auto ts = log_taus(1e-3, 10.0, 10);
  long violations = 0;
  long tuples = 0;
  for (double a1 : as) {
    for (double a2 : as) {
      if (a2 > a1) continue;
      for (double t : ts) {
        for (int j = 0; j < 10; ++j) {
          const double lo = t * a2 / a1;
          const double s = lo + (t - lo) * j / 9.0;
          ++tuples;
          const double lhs = h_value(a2, s, c, p32());
          const double rhs = h_value(a1, t, c, p32());
          if (lhs < rhs - 1e-13 * std::max(1.0, std::abs(rhs))) ++violations;
        }
      }
    }
  }
  EXPECT_GT(tuples, 5000);
  EXPECT_EQ(violations, 0);
}

TEST(RhoZero, TwoRoutesAgreeOnRandomDraws) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const int n = 3 + static_cast<int>(3.0 * u(rng)) % 3;
    const double alpha = 0.1 + (n - 0.2) * u(rng);
    const ProblemParams p{n, alpha, 1, 1.0};
    const BarrierConstants c{std::pow(10.0, -3.0 + 6.0 * u(rng)), std::pow(10.0, -3.0 + 6.0 * u(rng))};
    const RhoZero r = rho_zero(c, p);
    EXPECT_NEAR(r.by_maximizer / r.printed, 1.0, 1e-10) << "draw " << i;
    EXPECT_TRUE(r.consistent);
  }
}

TEST(RhoZero, SignChangeAtThreshold) {
  const BarrierConstants c = preset_constants();
  const double rho0 = rho_zero(c, p32()).value;
  EXPECT_GT(h_max(rho0 * (1.0 - 1e-6), c, p32()), 0.0);
  EXPECT_LT(h_max(rho0 * (1.0 + 1e-6), c, p32()), 0.0);
  EXPECT_THROW(rho_zero(BarrierConstants{0.0, 1.0}, p32()), std::domain_error);
  EXPECT_THROW(rho_zero(BarrierConstants{1.0, 0.0}, p32()), std::domain_error);
}

TEST(Roots, WindowProperties) {
  const BarrierConstants c = preset_constants();
  const double rho0 = rho_zero(c, p32()).value;
  const BarrierWindow w = h_roots(0.9 * rho0, c, p32());
  EXPECT_LT(std::abs(h_value(0.9 * rho0, w.r0, c, p32())), 1e-10);
  EXPECT_LT(std::abs(h_value(0.9 * rho0, w.r1, c, p32())), 1e-10);
  EXPECT_LT(w.r0, w.t0);
  EXPECT_LT(w.t0, w.r1);
  for (int i = 1; i < 1000; ++i) {
    const double t = w.r0 + (w.r1 - w.r0) * i / 1000.0;
    EXPECT_GT(h_value(0.9 * rho0, t, c, p32()), 0.0) << t;
  }
  EXPECT_LT(h_value(0.9 * rho0, 0.99 * w.r0, c, p32()), 0.0);
  EXPECT_LT(h_value(0.9 * rho0, 1.01 * w.r1, c, p32()), 0.0);
  EXPECT_THROW(h_roots(rho0 * 1.001, c, p32()), NoPositiveWindow);

  double width = std::numeric_limits<double>::infinity();
  for (double f : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
    const BarrierWindow wf = h_roots(f * rho0, c, p32());
    EXPECT_LT(wf.r1 - wf.r0, width) << f;
    width = wf.r1 - wf.r0;
  }
}

TEST(Bundle, PresetExactSource) {
  const auto run = preset_at(0.5, BundleOptions{SSource::exact});
  const auto& b = run.bundle;
  EXPECT_EQ(b.s1_provenance, "exact-formula");
  EXPECT_EQ(b.s1, b.s_exact.s1);
  EXPECT_TRUE(b.rho0.consistent);
  ASSERT_TRUE(b.window.has_value());
  EXPECT_NEAR(*b.rho / b.rho0.value, 0.5, 1e-15);
  EXPECT_LT(b.window->r0, b.window->r1);
}

TEST(Bundle, PresetTrialSourceRegression) {
  const auto run = preset_at(0.5);
  const auto& b = run.bundle;
  EXPECT_EQ(b.s2_provenance, "trial-estimate");
  EXPECT_NEAR(b.c0, 185.49453728224734, 1e-9 * b.c0);
  EXPECT_NEAR(b.rho0.value, 0.042567057211235236, 1e-8 * b.rho0.value);
  EXPECT_LT(b.rho0.relative_gap, 1e-10);
  ASSERT_TRUE(b.window.has_value());
  EXPECT_NEAR(b.window->r0, 0.1311572566198487, 1e-8);
  EXPECT_NEAR(b.window->r1, 0.565366931847823, 1e-8);
}

TEST(Bundle, ZeroNonlinearityIsUnconstrained) {
  const ProblemParams p{3, 2.0, 1, 0.3};
  const ThresholdBundle b = make_bundle(p, Nonlinearity(p, {}), BundleOptions{SSource::exact});
  EXPECT_EQ(b.c0, 0.0);
  EXPECT_EQ(b.c.c1, 0.0);
  EXPECT_FALSE(b.window.has_value());
}
