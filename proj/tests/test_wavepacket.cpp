#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "iwatsuka/wavepacket.hpp"

using namespace iwatsuka;

namespace {

SpectralWindow window_for(double bm, double bp, int j = 1, double delta = 0.1) {
  const auto p = FieldProfile::sharp(bm, bp);
  const double K = 8.0 * std::sqrt(bp);
  return make_window_unchecked(p, {}, j, delta, -K, K);
}

const SpectralWindow& win15() {
  static const SpectralWindow w = window_for(1.0, 1.5);
  return w;
}

const WavePacket& packet(EnvelopeKind kind) {
  static const WavePacket ind = build_packet(win15(), EnvelopeKind::Indicator, 64);
  static const WavePacket gau = build_packet(win15(), EnvelopeKind::Gaussian, 64);
  static const WavePacket han = build_packet(win15(), EnvelopeKind::Hann, 64);
  switch (kind) {
    case EnvelopeKind::Indicator: return ind;
    case EnvelopeKind::Gaussian: return gau;
    case EnvelopeKind::Hann: break;
  }
  return han;
}

double gap_constant(const SpectralWindow& w) {
  const auto c = derivative_bound_constants(w.j);
  const double r = w.r();
  return c.c[w.j] * std::pow(w.delta, 3) * (r - 1.0) / (r * r * r);
}

const EnvelopeKind kKinds[] = {EnvelopeKind::Indicator, EnvelopeKind::Gaussian, EnvelopeKind::Hann};

}  // namespace

TEST(BuildPacket, IndicatorIsFlat) {
  const auto& w = packet(EnvelopeKind::Indicator);
  const double L = win15().k_hi - win15().k_lo;
  for (double e : w.envelope) EXPECT_NEAR(e, 1.0 / std::sqrt(L), 1e-12);
}

TEST(BuildPacket, NormalizedAndSupportedInPreimage) {
  for (auto kind : kKinds) {
    const auto& w = packet(kind);
    double n = 0.0;
    for (double e : w.envelope) n += w.dk * e * e;
    EXPECT_NEAR(n, 1.0, 1e-10);
    for (double k : w.nodes) {
      EXPECT_GT(k, win15().k_lo);
      EXPECT_LT(k, win15().k_hi);
    }
  }
  EXPECT_EQ(envelope_shape(EnvelopeKind::Gaussian, 0.0, 1.0, 1.5), 0.0);
  EXPECT_EQ(envelope_shape(EnvelopeKind::Indicator, 0.0, 1.0, -0.1), 0.0);
  EXPECT_THROW(build_packet_on(FieldProfile::sharp(1.0, 1.5), {}, 1, 1.0, 1.0, EnvelopeKind::Hann), ParameterError);
}

TEST(EdgeCurrent, LowerBoundForEveryEnvelope) {
  const double bound = gap_constant(win15());
  const auto c = derivative_bound_constants(1);
  for (auto kind : kKinds) {
    const auto rep = check_current_lower_bound(packet(kind), c);
    EXPECT_EQ(rep.status, CheckStatus::Pass) << to_string(kind);
    EXPECT_NEAR(rep.bound, bound, 1e-15);
    EXPECT_GT(rep.observed, bound);
  }
}

TEST(EdgeCurrent, CauchySchwarzUpperBound) {
  for (auto kind : kKinds) {
    const auto rep = check_current_upper_bound(packet(kind));
    EXPECT_EQ(rep.status, CheckStatus::Pass);
    EXPECT_NEAR(rep.bound, std::sqrt(1.35), 1e-15);
  }
}

TEST(EdgeCurrent, ConstantFieldCarriesNoCurrent) {
  const auto w = build_packet_on(FieldProfile::constant(1.0), {}, 1, -1.0, 1.0, EnvelopeKind::Hann, 16);
  EXPECT_NEAR(edge_current(w), 0.0, 1e-6);
}

TEST(Localization, WindowFormula) {
  const auto loc = make_localization_window(FieldProfile::sharp(16.0, 24.0), 1, 1.0, 0.25);
  EXPECT_NEAR(loc.lo, -2.0 * 0.5, 1e-15);
  EXPECT_NEAR(loc.hi, 2.0 * std::pow(24.0, -0.25), 1e-15);
  EXPECT_NEAR(loc.eta, 2.0 * std::sqrt(std::numbers::pi), 1e-15);
  EXPECT_NEAR(loc.bound, 1.0 - loc.eta * std::exp(-0.5), 1e-15);
  EXPECT_THROW(make_localization_window(FieldProfile::sharp(1.0, 2.0), 1, 1.0, 0.5), ParameterError);
}

TEST(Localization, WholeLineHoldsAllMass) {
  LocalizationWindow all;
  all.lo = -1e9;
  all.hi = 1e9;
  EXPECT_NEAR(localization_mass(packet(EnvelopeKind::Hann), all), 1.0, 1e-10);
}

TEST(Localization, MassGrowsWithEps1) {
  const auto& w = packet(EnvelopeKind::Indicator);
  double prev = 0.0;
  for (double e1 : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double m = localization_mass(w, make_localization_window(w.profile, 1, e1, 0.25));
    EXPECT_GE(m, prev);
    prev = m;
  }
}

TEST(Localization, SixteenIsVacuousLargeFieldPasses) {
  const auto w16 = build_packet(window_for(16.0, 24.0), EnvelopeKind::Indicator, 64);
  const auto r16 = check_localization(w16, make_localization_window(w16.profile, 1, 1.0, 0.25));
  EXPECT_EQ(r16.status, CheckStatus::Vacuous);
  EXPECT_LT(r16.bound, 0.0);

  const auto w128 = build_packet(window_for(128.0, 192.0), EnvelopeKind::Indicator, 64);
  const auto r128 = check_localization(w128, make_localization_window(w128.profile, 1, 1.0, 0.25));
  EXPECT_EQ(r128.status, CheckStatus::Pass) << r128.observed << " vs " << r128.bound;
  EXPECT_GT(r128.bound, 0.0);
}

TEST(Containment, PreimageInsideScaledInterval) {
  const auto rep = preimage_containment_check(window_for(16.0, 24.0), 0.25);
  EXPECT_EQ(rep.status, CheckStatus::Pass) << rep.note;
}

TEST(DecayEnvelope, HoldsOnPacketNodes) {
  const auto rep = decay_envelope_check(packet(EnvelopeKind::Indicator), 0.25);
  EXPECT_EQ(rep.status, CheckStatus::Pass) << rep.note;
  const auto cw = build_packet_on(FieldProfile::constant(1.0), {}, 1, -0.5, 0.5, EnvelopeKind::Hann, 8);
  EXPECT_EQ(decay_envelope_check(cw, 0.25).status, CheckStatus::Pass);
}

TEST(DecayEnvelope, FarTailIsTiny) {
  const auto& w = packet(EnvelopeKind::Indicator);
  const double xp = std::pow(1.5, -0.25) + std::sqrt(1.5) / 1.5;
  const double xm = -(1.0 + std::sqrt(1.5));
  for (std::size_t i = 0; i < w.nodes.size(); i += 8) {
    const auto& g = w.modes.grids[i];
    const auto& psi = w.modes.vector(1, i);
    for (std::size_t n = 0; n < g.n; ++n) {
      const double x = g.x(n);
      if (x >= xp + 6.0 / std::sqrt(1.5) || x <= xm - 6.0) {
        EXPECT_LE(std::abs(psi[n]), 1e-8) << "x=" << x;
      }
    }
  }
}

TEST(BandEdgeProbe, FindsSlowRegionWithPositiveCurrent) {
  const auto p = FieldProfile::sharp(1.0, 1.5);
  const auto t = compute_bands(p, default_k_grid(p, 1, 129), 1);
  const auto pr = band_edge_probe(t, 1, gap_constant(win15()));
  ASSERT_TRUE(pr.found);
  EXPECT_LT(pr.k_center, 0.0);
  EXPECT_GT(pr.current, 0.0);
  EXPECT_LT(pr.current, pr.threshold);
}

TEST(BandEdgeProbe, NarrowIndicatorCurrentIsHalfDerivative) {
  const auto p = FieldProfile::sharp(1.0, 1.5);
  const double k = -1.0, kappa = 1e-3;
  const auto w = build_packet_on(p, {}, 1, k - kappa, k + kappa, EnvelopeKind::Indicator, 8);
  const double d = solve_fiber(p, k, 1).modes[0].fh;
  EXPECT_NEAR(edge_current(w), 0.5 * d, 1e-5 * d);
}

TEST(FiberedTransport, SlopeIsGroupVelocity) {
  for (auto kind : {EnvelopeKind::Gaussian, EnvelopeKind::Hann}) {
    const auto& w = packet(kind);
    const auto fit = fibered_transport(w, 10.0);
    const double v = 2.0 * edge_current(w);
    EXPECT_NEAR(fit.slope, v, 1e-3 * v) << to_string(kind);
    EXPECT_LE(fit.max_rel_dev, 1e-3);
    const auto vw = velocity_window(win15());
    EXPECT_GT(vw.rho, 0.0);
    EXPECT_GE(fit.slope, vw.rho);
    EXPECT_LE(fit.slope, vw.theta);
  }
}

TEST(FiberedTransport, ConstantFieldDoesNotMove) {
  const auto w = build_packet_on(FieldProfile::constant(1.0), {}, 1, -1.0, 1.0, EnvelopeKind::Hann, 32);
  FiberedTransport ft(w);
  const double y0 = ft.position(0.0);
  EXPECT_NEAR(ft.position(5.0), y0, 1e-6);
  EXPECT_NEAR(ft.group_velocity(), 0.0, 1e-6);
}
