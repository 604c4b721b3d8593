#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "choquard/problem.hpp"

using namespace choquard;

namespace {

ProblemParams params(int b) { return ProblemParams{3, 2.0, b, 1.0}; }

// Brute-force max of t^p / (t^lo + t^hi) over a dense log grid.
double scan_sup(double p, double lo, double hi) {
  double best = 0.0;
  const int n = 400000;
  for (int i = 0; i <= n; ++i) {
    const double t = std::pow(10.0, -8.0 + 16.0 * i / n);
    best = std::max(best, std::pow(t, p) / (std::pow(t, lo) + std::pow(t, hi)));
  }
  return best;
}

}  // namespace

TEST(Params, CriticalExponents) {
  const auto p = params(1);
  EXPECT_DOUBLE_EQ(p.p_lower(), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(p.p_upper(), 5.0);
  EXPECT_DOUBLE_EQ(p.p_l2crit(), 7.0 / 3.0);
  EXPECT_DOUBLE_EQ(p.p_small_t_crit(), 3.0);
  EXPECT_DOUBLE_EQ(params(0).p_small_t_crit(), 7.0 / 3.0);
}

TEST(Params, RangeChecks) {
  EXPECT_THROW(check(ProblemParams{3, 3.0, 1, 1.0}), std::invalid_argument);
  EXPECT_THROW(check(ProblemParams{3, 0.0, 1, 1.0}), std::invalid_argument);
  EXPECT_THROW(check(ProblemParams{3, 2.0, 2, 1.0}), std::invalid_argument);
  EXPECT_THROW(check(ProblemParams{3, 2.0, 1, -1.0}), std::invalid_argument);
  EXPECT_NO_THROW(check(ProblemParams{3, 2.0, 0, 0.5}));
}

TEST(Validate, SinglePowerPassesAll) {
  const auto p = params(1);
  const Nonlinearity nl(p, {{1.0, 2.5}});
  const auto rep = validate(p, nl);
  EXPECT_TRUE(rep["G1"].satisfied);
  EXPECT_TRUE(rep["G2"].satisfied);
  EXPECT_TRUE(rep["G3"].satisfied);
  EXPECT_TRUE(rep.all_satisfied());
}

TEST(Validate, ExponentAtLowerCriticalFailsG3) {
  const auto p = params(0);
  const Nonlinearity nl(p, {{1.0, 5.0 / 3.0}});
  const auto rep = validate(p, nl);
  EXPECT_FALSE(rep["G3"].satisfied);
  ASSERT_TRUE(rep["G3"].offending_exponent.has_value());
  EXPECT_DOUBLE_EQ(*rep["G3"].offending_exponent, 5.0 / 3.0);
}

TEST(Validate, NegativeLeadingCoefficientFailsG2) {
  const auto p = params(0);
  const Nonlinearity nl(p, parse_terms("-|t|^2"));
  EXPECT_FALSE(validate(p, nl)["G2"].satisfied);
}

TEST(Validate, TwoPowerPresetFamilyPasses) {
  const auto pre = reference_preset();
  EXPECT_TRUE(is_two_power_family(pre.params, pre.terms[0].exponent, pre.terms[1].exponent));
  EXPECT_TRUE(validate(pre.params, Nonlinearity(pre.params, pre.terms)).all_satisfied());
  // Other members: p + q = 2(N + alpha + 2)/N = 14/3 for N=3, alpha=2.
  for (double pe : {1.8, 2.0, 2.2, 2.3}) {
    const double q = 14.0 / 3.0 - pe;
    if (q > pre.params.p_upper()) continue;
    ASSERT_TRUE(is_two_power_family(pre.params, pe, q)) << pe;
    const Nonlinearity nl(pre.params, {{0.7, pe}, {3.0, q}});
    EXPECT_TRUE(validate(pre.params, nl).all_satisfied()) << pe;
  }
}

TEST(Eval, Examples) {
  const Nonlinearity zero_b(params(0), {{1.0, 2.0}});
  EXPECT_DOUBLE_EQ(zero_b.F(0.0), 0.0);
  EXPECT_DOUBLE_EQ(zero_b.f(0.0), 0.0);
  EXPECT_DOUBLE_EQ(eval_F(zero_b, 2.0), 4.0);
  EXPECT_DOUBLE_EQ(eval_f(zero_b, 2.0), 4.0);
  const Nonlinearity pure(params(1), {});
  EXPECT_DOUBLE_EQ(pure.F(-1.0), 1.0);
  EXPECT_DOUBLE_EQ(pure.f(-1.0), -5.0 / 3.0);
  EXPECT_DOUBLE_EQ(pure.F(0.0), 0.0);
  EXPECT_DOUBLE_EQ(pure.f(0.0), 0.0);
}

TEST(Eval, ParityAndDerivative) {
  const auto pre = reference_preset();
  const Nonlinearity nl(pre.params, pre.terms);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(-3.0, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (int i = 0; i < 100; ++i) {
    const double t = (sign(rng) ? -1.0 : 1.0) * std::pow(10.0, mag(rng));
    EXPECT_EQ(nl.F(t), nl.F(-t));
    EXPECT_EQ(nl.f(t), -nl.f(-t));
    const double h = std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(t)) * 1e-2;
    const double fd = (nl.F(t + h) - nl.F(t - h)) / (2.0 * h);
    EXPECT_NEAR(fd, nl.f(t), 1e-6 * std::abs(nl.f(t))) << "t=" << t;
  }
}

TEST(CZero, UpperCriticalTermGivesCoefficient) {
  const auto p = params(1);
  EXPECT_NEAR(Nonlinearity(p, {{-2.5, 5.0}}).c0(), 2.5, 1e-12);
}

TEST(CZero, MidpointMatchesDenseScan) {
  const auto p = params(1);
  const double mid = 0.5 * (p.p_lower() + p.p_upper());
  const double c0 = Nonlinearity(p, {{1.0, mid}}).c0();
  const double scan = scan_sup(mid, p.p_lower(), p.p_upper());
  EXPECT_GE(c0, scan);
  EXPECT_NEAR(c0, scan, 1e-8);
  // Closed form: with x = (p-lo)/(hi-lo), sup = x^x (1-x)^(1-x).
  const double x = (mid - p.p_lower()) / (p.p_upper() - p.p_lower());
  EXPECT_NEAR(c0, std::pow(x, x) * std::pow(1.0 - x, 1.0 - x), 1e-12);
}

TEST(CZero, AdditiveOverTerms) {
  const auto p = params(1);
  const double a = Nonlinearity(p, {{256.0, 2.0}}).c0();
  const double b = Nonlinearity(p, {{1.0, 8.0 / 3.0}}).c0();
  EXPECT_NEAR(Nonlinearity(p, {{256.0, 2.0}, {1.0, 8.0 / 3.0}}).c0(), a + b, 1e-12 * (a + b));
}

TEST(CZero, InadmissibleExponentThrows) {
  const auto p = params(1);
  EXPECT_THROW(Nonlinearity(p, {{1.0, 1.5}}).c0(), std::invalid_argument);
  EXPECT_THROW(Nonlinearity(p, {{1.0, 6.0}}).c0(), std::invalid_argument);
}

TEST(CZero, EnvelopeHoldsOnLogGrid) {
  const auto pre = reference_preset();
  const Nonlinearity nl(pre.params, pre.terms);
  const double c0 = nl.c0();
  const double lo = pre.params.p_lower();
  const double hi = pre.params.p_upper();
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double t = std::pow(10.0, -8.0 + 16.0 * i / 9999.0);
    if (std::abs(nl.G(t)) > c0 * (std::pow(t, lo) + std::pow(t, hi))) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Parse, TextForms) {
  auto t = parse_terms("256*|t|^2 + |t|^(8/3)");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(t[0].coef, 256.0);
  EXPECT_DOUBLE_EQ(t[0].exponent, 2.0);
  EXPECT_DOUBLE_EQ(t[1].coef, 1.0);
  EXPECT_DOUBLE_EQ(t[1].exponent, 8.0 / 3.0);
  t = parse_terms("-0.5*|t|^2.5 - 2*|t|^3");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(t[0].coef, -0.5);
  EXPECT_DOUBLE_EQ(t[1].coef, -2.0);
  EXPECT_TRUE(parse_terms("0").empty());
  EXPECT_TRUE(parse_terms("").empty());
  EXPECT_THROW(parse_terms("|t|^"), std::invalid_argument);
  EXPECT_THROW(parse_terms("2*|x|^2"), std::invalid_argument);
}

TEST(Parse, FormatRoundTrip) {
  const std::vector<PowerTerm> terms{{256.0, 2.0}, {-1.25, 8.0 / 3.0}};
  const auto back = parse_terms(format_terms(terms));
  ASSERT_EQ(back.size(), terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    EXPECT_EQ(back[i].coef, terms[i].coef);
    EXPECT_EQ(back[i].exponent, terms[i].exponent);
  }
}

TEST(Nonlinearity, RejectsBadTerms) {
  const auto p = params(0);
  EXPECT_THROW(Nonlinearity(p, {{1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(Nonlinearity(p, {{NAN, 2.0}}), std::invalid_argument);
  // F = 0 is allowed (pure kinetic energy) but fails G2.
  EXPECT_FALSE(validate(p, Nonlinearity(p, {}))["G2"].satisfied);
}
