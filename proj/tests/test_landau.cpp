#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "iwatsuka/bands.hpp"
#include "iwatsuka/landau.hpp"
#include "oracles/hermite_moments.hpp"

using namespace iwatsuka;

TEST(Hermite, Values) {
  EXPECT_EQ(hermite(0, 3.7), 1.0);
  EXPECT_EQ(hermite(2, 1.0), 2.0);
  EXPECT_EQ(hermite(3, 1.0), -4.0);
  for (double u : {-2.0, 0.3, 5.0}) EXPECT_NEAR(hermite(2, u), 4 * u * u - 2, 1e-12);
  EXPECT_TRUE(std::isfinite(hermite(12, 30.0)));
  EXPECT_THROW(hermite(13, 0.0), ParameterError);
  EXPECT_THROW(hermite(-1, 0.0), ParameterError);
}

TEST(LandauEigenfunction, GroundStateGaussian) {
  for (double x : {-2.0, 0.0, 0.5, 3.0})
    EXPECT_NEAR(landau_eigenfunction(1.0, 1, 0.0, x), std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x),
                1e-15);
}

TEST(LandauEigenfunction, PeakAtGuidingCentre) {
  const double b = 2.0, k = 3.0;
  double best = -1, arg = 0;
  for (int i = -4000; i <= 4000; ++i) {
    const double x = k / b + i * 1e-4;
    const double v = std::abs(landau_eigenfunction(b, 1, k, x));
    if (v > best) best = v, arg = x;
  }
  EXPECT_NEAR(arg, k / b, 1e-4);
}

TEST(LandauEigenfunction, NormalizedAndEnergy) {
  for (double b : {1.0, 2.5})
    for (int l = 1; l <= 6; ++l) {
      const double k = 0.7;
      const double c = k / b, w = 14.0 / std::sqrt(b);
      auto psi = [&](double x) { return landau_eigenfunction(b, l, k, x); };
      const double n = integrate_composite([&](double x) { return psi(x) * psi(x); }, c - w, c + w);
      EXPECT_NEAR(n, 1.0, 1e-10);
      const double d = 1e-3;
      auto hpsi = [&](double x) {
        const double lap = (-psi(x + 2 * d) + 16 * psi(x + d) - 30 * psi(x) + 16 * psi(x - d) - psi(x - 2 * d)) /
                           (12 * d * d);
        return -lap + (k - b * x) * (k - b * x) * psi(x);
      };
      const double e = integrate_composite([&](double x) { return psi(x) * hpsi(x); }, c - w, c + w);
      EXPECT_NEAR(e, (2.0 * l - 1.0) * b, 1e-8) << "b=" << b << " l=" << l;
    }
}

TEST(MomentConstants, AgreeWithExactPolynomialMoments) {
  for (int l = 1; l <= 8; ++l) EXPECT_NEAR(tilde_c(l), oracle::tilde_c_exact(l), 1e-12 * oracle::tilde_c_exact(l));
  EXPECT_NEAR(tilde_c(1), std::pow(std::numbers::pi, -0.25) * std::sqrt(0.5), 1e-14);
  EXPECT_NEAR(tilde_c(1), 0.5312, 1e-4);
}

TEST(MomentConstants, DerivedConstants) {
  const auto c = derivative_bound_constants(8);
  for (int j = 1; j <= 8; ++j) {
    EXPECT_GT(c.c_tilde[j], 0.0);
    EXPECT_GT(c.c[j], 0.0);
    double m = 0;
    for (int l = 1; l <= j; ++l) m = std::max(m, oracle::tilde_c_exact(l));
    EXPECT_NEAR(c.c_neg[j], 1.0 / (m * m) / j, 1e-12);
    EXPECT_NEAR(c.c_pos[j], 1.0 / (m * m) / (2.0 * j - 1.0), 1e-12);
    EXPECT_EQ(c.c[j], std::min(c.c_neg[j], c.c_pos[j]));
  }
  EXPECT_EQ(c.c_neg[1], c.c_pos[1]);
  EXPECT_THROW(derivative_bound_constants(9), ParameterError);
}

TEST(HalfLineMoment, EqualsConstantAtZeroAndSmallerBeyond) {
  for (double b : {1.0, 1.5, 24.0})
    for (int l = 1; l <= 4; ++l) {
      const double ref = tilde_c(l) * std::pow(b, 0.75);
      EXPECT_NEAR(half_line_cubic_moment(b, l, 0.0), ref, 1e-6 * ref);
      for (double k : {0.1, 1.0, 3.0}) EXPECT_LE(half_line_cubic_moment(b, l, k), ref * (1 + 1e-12));
    }
}

TEST(Overlaps, ConstantFieldIsIdentity) {
  const auto p = FieldProfile::constant(1.0);
  const double k = 0.8;
  const auto s = solve_fiber(p, k, 3);
  for (int j = 1; j <= 3; ++j) {
    const auto a = landau_overlaps(s.pairs[j - 1].vector, s.grid, 1.0, k, 6);
    double total = 0.0;
    for (int l = 1; l <= 6; ++l) {
      total += a[l] * a[l];
      if (l == j) EXPECT_NEAR(std::abs(a[l]), 1.0, 1e-6);
      // the discrete eigenvector differs from the Hermite function by O(h^2)
      else EXPECT_NEAR(a[l], 0.0, 1e-5) << "j=" << j << " l=" << l;
    }
    EXPECT_LE(total, 1.0 + 1e-6);
  }
}

TEST(Overlaps, SharpEdgeNegativePreimage) {
  const auto p = FieldProfile::sharp(1.0, 1.5);
  BandOptions o;
  const auto w = make_window_unchecked(p, o, 1, 0.1, -8.0, 8.0);
  ASSERT_LT(w.k_lo, 0.0);
  for (int i = 0; i <= 8; ++i) {
    const double k = w.k_lo + (std::min(w.k_hi, -1e-9) - w.k_lo) * i / 8.0;
    if (k >= 0.0) continue;
    const auto s = solve_fiber(p, k, 1);
    const auto a = landau_overlaps(s.pairs[0].vector, s.grid, 1.0, k, 1);
    EXPECT_GT(a[1] * a[1], 0.5) << "k=" << k;
  }
}

TEST(Overlaps, RejectsNarrowGrid) {
  const auto p = FieldProfile::constant(1.0);
  const auto s = solve_fiber(p, 0.0, 1);
  EXPECT_THROW(landau_overlaps(s.pairs[0].vector, s.grid, 1.0, s.grid.x_max() - 1.0, 1), ParameterError);
}
