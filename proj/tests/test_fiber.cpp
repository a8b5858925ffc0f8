#include <gtest/gtest.h>

#include <cmath>

#include "iwatsuka/bands.hpp"
#include "iwatsuka/fiber.hpp"

using namespace iwatsuka;

namespace {
FiberOptions margin(double m) {
  FiberOptions o;
  o.margin_widths = m;
  return o;
}
}  // namespace

TEST(SelectDomain, SymmetricCaseCoversHull) {
  const auto g = select_domain(FieldProfile::sharp(1.0, 2.0), 0.0, 1, margin(8));
  const double w = 8.0 * std::sqrt(3.0);
  EXPECT_LE(g.x_min(), -w);
  EXPECT_GE(g.x_max(), w);
  EXPECT_LE(g.x_min(), -13.8);
  EXPECT_GE(g.x_max(), 13.8);
}

TEST(SelectDomain, ContainsGuidingCentreAndOrigin) {
  const auto p = FieldProfile::constant(1.0);
  const auto g = select_domain(p, 10.0, 1, margin(8));
  EXPECT_LE(g.x_min(), 0.0);
  EXPECT_GE(g.x_max(), 10.0 + 8.0 * std::sqrt(3.0));
  EXPECT_TRUE(g.contains_origin());
}

TEST(SelectDomain, NegativeMomentumHigherLevels) {
  const auto g = select_domain(FieldProfile::sharp(1.0, 2.0), -4.0, 3, margin(6));
  EXPECT_LE(g.x_min(), -4.0 - 6.0 * std::sqrt(7.0));
  EXPECT_GE(g.x_max(), 6.0 * std::sqrt(7.0));
}

TEST(SelectDomain, GridInvariants) {
  for (const auto& p : {FieldProfile::sharp(1.0, 2.0), FieldProfile::sharp(16.0, 24.0),
                        FieldProfile::smooth_cubic(1.0, 1.5, 0.1)}) {
    for (double k : {-20.0, -1.0, 0.0, 3.0, 25.0}) {
      const auto g = select_domain(p, k, 2);
      EXPECT_GE(g.n, 64u);
      EXPECT_LE(g.h, 0.2 / std::sqrt(p.b_plus()));
      EXPECT_TRUE(g.contains_origin());
      EXPECT_NEAR(g.x(g.origin_index()), 0.0, 1e-15);
      const double w = 8.0 / std::sqrt(p.b_minus());
      EXPECT_LE(g.x_min(), beta_inverse(p, k) - w);
      EXPECT_GE(g.x_max(), beta_inverse(p, k) + w);
    }
  }
}

TEST(BuildFiberOperator, ConstantFieldIsHarmonicOscillator) {
  const auto p = FieldProfile::constant(1.0);
  const auto g = select_domain(p, 0.0, 1);
  const auto t = build_fiber_operator(p, 0.0, g);
  ASSERT_EQ(t.size(), g.n);
  for (std::size_t i = 0; i < g.n; i += 97) {
    const double x = g.x(i);
    EXPECT_NEAR(t.diag[i], 2.0 / (g.h * g.h) + x * x, 1e-9);
  }
  for (std::size_t i = 0; i + 1 < g.n; i += 97) EXPECT_DOUBLE_EQ(t.offdiag[i], -1.0 / (g.h * g.h));
}

TEST(BuildFiberOperator, SharpPotential) {
  const auto p = FieldProfile::sharp(1.0, 2.0);
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.0}) {
    const double v = fiber_potential(p, 0.0, x);
    EXPECT_DOUBLE_EQ(v, x < 0 ? x * x : 4.0 * x * x);
  }
  EXPECT_DOUBLE_EQ(fiber_potential(p, 1.0, 0.0), 1.0);
  const auto g = select_domain(p, 1.0, 1);
  const auto t = build_fiber_operator(p, 1.0, g);
  EXPECT_NEAR(t.diag[g.origin_index()] - 2.0 / (g.h * g.h), 1.0, 1e-9);
}

// For k <= 0: V_-(x,k) <= V(x,k) <= V_+(x, k b_+/b_-).
TEST(BuildFiberOperator, PotentialComparison) {
  const auto p = FieldProfile::sharp(1.0, 1.5);
  const double r = p.ratio();
  for (int ik = 0; ik <= 40; ++ik) {
    const double k = -10.0 + 0.25 * ik;
    for (int ix = -200; ix <= 200; ++ix) {
      const double x = 0.07 * ix;
      const double v = fiber_potential(p, k, x);
      const double vm = (k - x) * (k - x);
      const double vp = (r * k - 1.5 * x) * (r * k - 1.5 * x);
      EXPECT_LE(vm, v * (1 + 1e-14) + 1e-14);
      EXPECT_LE(v, vp * (1 + 1e-14) + 1e-14);
    }
  }
}

TEST(BuildFiberOperator, SecondOrderConvergence) {
  const auto p = FieldProfile::sharp(1.0, 2.0);
  auto omega = [&](double s) {
    BandOptions o;
    o.fiber.spacing = s;
    return solve_fiber(p, 0.0, 1, o).modes[0].omega;
  };
  const double a = omega(0.08), b = omega(0.04), c = omega(0.02);
  const double order = std::log2((a - b) / (b - c));
  EXPECT_GE(order, 1.9) << a << " " << b << " " << c;
}
