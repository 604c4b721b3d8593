#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "choquard/grid.hpp"

using namespace choquard;

namespace {

constexpr double pi = std::numbers::pi;

Field random_field(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field u(g);
  for (double& v : u.values) v = nd(rng);
  return u;
}

double r2(const std::array<double, 3>& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }

}  // namespace

TEST(Grid, ConstructionRules) {
  EXPECT_THROW(Grid(3, 12, 1.0), std::invalid_argument);
  EXPECT_THROW(Grid(3, 4, 1.0), std::invalid_argument);
  EXPECT_THROW(Grid(4, 8, 1.0), std::invalid_argument);
  EXPECT_THROW(Grid(3, 8, 0.0), std::invalid_argument);
  EXPECT_THROW(Grid(3, 512, 1.0), std::invalid_argument);
  const Grid g(3, 16, 8.0);
  EXPECT_EQ(g.size(), 4096u);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.5);
  EXPECT_DOUBLE_EQ(g.coordinate(8), 0.0);
}

TEST(Field, LengthMustMatch) {
  const Grid g(2, 8, 1.0);
  EXPECT_THROW(Field(g, std::vector<double>(63)), std::invalid_argument);
}

TEST(Integrate, ConstantField) {
  const Grid g(3, 16, 5.0);
  const Field u = sample(g, [](const auto&) { return 2.5; });
  EXPECT_NEAR(integrate(u), 2.5 * 125.0, 1e-12);
}

TEST(Integrate, Gaussian) {
  const Grid g(3, 64, 20.0);
  const Field u = sample(g, [](const auto& x) { return std::exp(-r2(x)); });
  EXPECT_NEAR(integrate(u) / std::pow(pi, 1.5), 1.0, 1e-8);
}

TEST(Integrate, OddFunctionVanishes) {
  const double box = 10.0;
  const Grid g(3, 32, box);
  // sin(2 pi x/L) vanishes on the unpaired node x = -L/2.
  const Field u = sample(g, [&](const auto& x) { return std::sin(2.0 * pi * x[0] / box) * std::exp(-r2(x)); });
  EXPECT_NEAR(integrate(u), 0.0, 1e-14);
}

TEST(Integrate, Linear) {
  const Grid g(3, 16, 4.0);
  const Field u = random_field(g, 1);
  const Field v = random_field(g, 2);
  Field w(g);
  for (std::size_t i = 0; i < g.size(); ++i) w[i] = 1.5 * u[i] - 0.25 * v[i];
  const double lhs = integrate(w);
  const double rhs = 1.5 * integrate(u) - 0.25 * integrate(v);
  EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(1.5 * integrate(u)) + std::abs(0.25 * integrate(v))));
}

TEST(Norms, ZeroField) {
  const Field u(Grid(3, 8, 1.0));
  EXPECT_EQ(mass(u), 0.0);
  EXPECT_EQ(grad_norm_sq(u), 0.0);
}

TEST(Norms, SingleMode) {
  const double box = 7.0;
  const Grid g(3, 16, box);
  const Field u = sample(g, [&](const auto& x) { return std::sin(2.0 * pi * x[0] / box); });
  const double k = 2.0 * pi / box;
  EXPECT_NEAR(grad_norm_sq(u), k * k * mass(u) * mass(u), 1e-12 * grad_norm_sq(u));
}

TEST(Norms, GaussianMoments) {
  const Grid g(3, 64, 20.0);
  const Field u = sample(g, [](const auto& x) { return std::exp(-0.5 * r2(x)); });
  EXPECT_NEAR(mass(u) * mass(u) / std::pow(pi, 1.5), 1.0, 1e-6);
  EXPECT_NEAR(grad_norm_sq(u) / (1.5 * std::pow(pi, 1.5)), 1.0, 1e-6);
}

TEST(Norms, Parseval) {
  for (int dim : {1, 2, 3}) {
    const Grid g(dim, 16, 3.0);
    const Field u = random_field(g, 10 + static_cast<std::uint64_t>(dim));
    EXPECT_NEAR(spectral_norm_sq(u) / (mass(u) * mass(u)), 1.0, 1e-10) << "dim=" << dim;
  }
}

TEST(Norms, GradientQuadraticInScale) {
  const Grid g(3, 16, 4.0);
  const Field u = random_field(g, 3);
  Field v = u;
  v *= 3.0;
  EXPECT_NEAR(grad_norm_sq(v), 9.0 * grad_norm_sq(u), 1e-12 * grad_norm_sq(v));
}

TEST(Norms, LaplacianConsistentWithGradient) {
  const Grid g(3, 16, 4.0);
  const Field u = random_field(g, 4);
  EXPECT_NEAR(inner(u, neg_laplacian(u)), grad_norm_sq(u), 1e-10 * grad_norm_sq(u));
}

TEST(RescaleMass, Examples) {
  const Grid g(3, 16, 4.0);
  const Field u = random_field(g, 5);
  const Field same = rescale_mass(u, mass(u));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(same[i], u[i], 1e-15 * std::abs(u[i]) + 1e-300);

  Field two = rescale_mass(u, 2.0);
  const Field one = rescale_mass(two, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(one[i], 0.5 * two[i], 1e-15 * std::abs(two[i]));

  const Field r = rescale_mass(u, 0.0371);
  EXPECT_NEAR(mass(r), 0.0371, 1e-12 * 0.0371);
  EXPECT_THROW(rescale_mass(Field(g), 1.0), std::invalid_argument);
}

TEST(Inner, GridMismatchThrows) {
  EXPECT_THROW(inner(Field(Grid(3, 8, 1.0)), Field(Grid(3, 8, 2.0))), std::invalid_argument);
}
