#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "iwatsuka/evolve2d.hpp"

using namespace iwatsuka;

namespace {

struct Setup {
  SpectralWindow window;
  WavePacket packet;
  Grid2D grid;
  Embedding emb;
};

const Setup& setup() {
  static const Setup s = [] {
    const auto p = FieldProfile::sharp(1.0, 1.5);
    auto w = make_window_unchecked(p, {}, 1, 0.1, -10.0, 10.0);
    auto pk = build_packet(w, EnvelopeKind::Hann, 64);
    auto g = default_grid_for(w, 192, 512, 64.0);
    auto e = embed_packet(pk, g, 0.0);
    return Setup{w, std::move(pk), g, std::move(e)};
  }();
  return s;
}

PerturbationSpec constant_perturbation(double a2, double q) {
  PerturbationSpec s = zero_perturbation();
  s.a2 = [a2](double, double) { return a2; };
  s.q = [q](double, double) { return q; };
  s.a_sup = s.a2_sup = std::abs(a2);
  s.q_sup = std::abs(q);
  s.support_halfwidth = std::numeric_limits<double>::infinity();
  return s;
}

PropagatorOptions opts(double dt) {
  PropagatorOptions o;
  o.dt = dt;
  return o;
}

// Plain O(n^2) DFT along y on every x row, e^{-2 pi i m n / N} forward.
std::vector<cplx> dft_rows(const std::vector<cplx>& a, std::size_t nx, std::size_t ny, int sign) {
  std::vector<cplx> out(a.size());
  std::vector<cplx> tw(ny);
  for (std::size_t n = 0; n < ny; ++n) tw[n] = std::polar(1.0, sign * 2.0 * std::numbers::pi * n / ny);
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t m = 0; m < ny; ++m) {
      cplx s = 0.0;
      for (std::size_t n = 0; n < ny; ++n) s += a[ix * ny + n] * tw[(m * n) % ny];
      out[ix * ny + m] = sign < 0 ? s / static_cast<double>(ny) : s;
    }
  return out;
}

double l2_diff(const EvolutionState& a, const std::vector<cplx>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += std::norm(a.psi[i] - b[i]);
  return std::sqrt(s * a.grid.x.h * a.grid.hy);
}

}  // namespace

TEST(EmbedPacket, NormalizedWithFiberCurrent) {
  const auto& s = setup();
  EXPECT_NEAR(state_norm(s.emb.state), 1.0, 1e-12);
  EXPECT_GT(s.emb.modes, 4u);
  const double raw = std::abs(s.emb.raw_norm - 1.0);
  EXPECT_LE(raw, 1e-2);
  Propagator prop(s.window.profile, s.grid, zero_perturbation(), opts(0.02));
  const double J = current_2d(s.emb.state, prop.y_links());
  EXPECT_NEAR(J, s.emb.expected_current, 1e-3 * s.emb.expected_current);
  // lattice symbol in y versus the continuum fiber: O(h_y^2) apart
  EXPECT_NEAR(J, edge_current(s.packet), 2e-2 * edge_current(s.packet));
}

TEST(EmbedPacket, RejectsUnresolvedSupport) {
  const auto& s = setup();
  const auto g = make_grid_2d(-20.0, 20.0, 256, -4.0, 8.0, 64);
  EXPECT_THROW(embed_packet(s.packet, g, 0.0), ParameterError);
}

TEST(EmbedPacket, StaysAwayFromBoundaries) {
  const auto& s = setup();
  EXPECT_LE(boundary_mass(s.emb.state, 2.0), 1e-6);
  EvolutionState edge = s.emb.state;
  std::fill(edge.psi.begin(), edge.psi.end(), cplx(0.0));
  edge.psi[3 * edge.grid.ny + 7] = 1.0 / std::sqrt(edge.grid.x.h * edge.grid.hy);
  EXPECT_NEAR(boundary_mass(edge, 2.0), 1.0, 1e-12);
}

TEST(Propagator, OneStepMatchesModePhases) {
  const auto& s = setup();
  const double dt = 0.02;
  Propagator prop(s.window.profile, s.grid, zero_perturbation(), opts(dt));
  const std::size_t nx = s.grid.nx(), ny = s.grid.ny;
  auto rows = dft_rows(s.emb.state.psi, nx, ny, -1);
  for (std::size_t m = 0; m < ny; ++m) {
    double mass = 0.0;
    for (std::size_t ix = 0; ix < nx; ++ix) mass += std::norm(rows[ix * ny + m]);
    if (mass == 0.0) continue;
    const double om = solve_fiber_on(s.window.profile, s.grid.k_of(m), 1, s.grid.x, s.grid.hy).modes[0].omega;
    const cplx ph = std::polar(1.0, -om * dt);
    for (std::size_t ix = 0; ix < nx; ++ix) rows[ix * ny + m] *= ph;
  }
  const auto expect = dft_rows(rows, nx, ny, +1);
  EvolutionState st = s.emb.state;
  prop.step(st);
  EXPECT_LE(l2_diff(st, expect), 1e-4);
  EXPECT_NEAR(st.t, dt, 1e-15);
}

TEST(Propagator, NormDriftOverThousandSteps) {
  const auto& s = setup();
  Propagator prop(s.window.profile, s.grid, zero_perturbation(), opts(0.02));
  EvolutionRequest rq;
  rq.t_final = 20.0;
  rq.sample_every = 100;
  rq.boundary_limit = 1.0;
  const auto run = run_evolution(s.emb.state, prop, s.window.profile, rq);
  EXPECT_LE(run.max_norm_drift, 1e-7);
  EXPECT_GE(run.series.size(), 11u);
  double jmax = 0.0;
  for (const auto& smp : run.series) jmax = std::max(jmax, std::abs(smp.current - run.series[0].current));
  EXPECT_LE(jmax, 1e-4 * run.series[0].current);
}

TEST(Propagator, PerturbedStepIsUnitary) {
  const auto& s = setup();
  const auto pert = make_bump_perturbation(0.05, 0.1, 0.05, 2.0, 4.0);
  Propagator prop(s.window.profile, s.grid, pert, opts(0.02));
  EvolutionState st = s.emb.state;
  for (int i = 0; i < 50; ++i) prop.step(st);
  EXPECT_NEAR(state_norm(st), 1.0, 1e-8);
  EXPECT_GT(prop.last_iterations(), 1);
  EXPECT_LE(prop.last_residual(), 1e-10);
}

TEST(Propagator, ConstantPotentialIsAPhase) {
  const auto& s = setup();
  Propagator p0(s.window.profile, s.grid, zero_perturbation(), opts(0.02));
  Propagator pq(s.window.profile, s.grid, constant_perturbation(0.0, 0.3), opts(0.02));
  EvolutionState a = s.emb.state, b = s.emb.state;
  for (int i = 0; i < 20; ++i) {
    p0.step(a);
    pq.step(b);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.psi.size(); ++i) worst = std::max(worst, std::abs(std::abs(a.psi[i]) - std::abs(b.psi[i])));
  EXPECT_LE(worst, 1e-6);
}

TEST(Current2D, ConstantVectorPotentialShiftsCurrent) {
  const auto& s = setup();
  const double c = 0.01;
  Propagator p0(s.window.profile, s.grid, zero_perturbation(), opts(0.02));
  Propagator pc(s.window.profile, s.grid, constant_perturbation(c, 0.0), opts(0.02));
  const double j0 = current_2d(s.emb.state, p0.y_links());
  const double jc = current_2d(s.emb.state, pc.y_links());
  // lattice velocity: the shift is -c <cos((k - beta) h_y)>, within h_y^2 of -c
  EXPECT_NEAR(jc - j0, -c, 2e-2 * c);
}

TEST(Propagator, RejectsUnstableOrCoarseSetups) {
  const auto& s = setup();
  EXPECT_THROW(Propagator(s.window.profile, s.grid, zero_perturbation(), opts(1.0)), ParameterError);
  const auto coarse = make_grid_2d(-20.0, 20.0, 64, -32.0, 64.0, 128);
  EXPECT_THROW(Propagator(s.window.profile, coarse, zero_perturbation(), opts(0.01)), ParameterError);
  Propagator p(s.window.profile, s.grid, zero_perturbation(), opts(0.02));
  EvolutionState wrong;
  wrong.psi.resize(10);
  EXPECT_THROW(p.step(wrong), ParameterError);
}

TEST(Snapshot, HeaderAndLayout) {
  const auto& s = setup();
  std::ostringstream os;
  EvolutionState st = s.emb.state;
  st.t = 1.25;
  write_snapshot(os, st);
  const std::string buf = os.str();
  ASSERT_EQ(buf.size(), 24 + 8 * st.psi.size());
  std::uint64_t nx, ny;
  double t, v;
  std::memcpy(&nx, buf.data(), 8);
  std::memcpy(&ny, buf.data() + 8, 8);
  std::memcpy(&t, buf.data() + 16, 8);
  EXPECT_EQ(nx, st.grid.nx());
  EXPECT_EQ(ny, st.grid.ny);
  EXPECT_EQ(t, 1.25);
  const std::size_t i = (nx / 2) * ny + 5;
  std::memcpy(&v, buf.data() + 24 + 8 * i, 8);
  EXPECT_EQ(v, std::norm(st.psi[i]));
}

TEST(RunEvolution, AbortsOnBoundaryMass) {
  const auto& s = setup();
  Propagator prop(s.window.profile, s.grid, zero_perturbation(), opts(0.02));
  EvolutionRequest rq;
  rq.t_final = 1.0;
  rq.sample_every = 5;
  rq.boundary_width = 40.0;
  const auto run = run_evolution(s.emb.state, prop, s.window.profile, rq);
  EXPECT_TRUE(run.aborted);
  EXPECT_FALSE(run.note.empty());
}
