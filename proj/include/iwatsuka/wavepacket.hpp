#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "iwatsuka/bands.hpp"
#include "iwatsuka/landau.hpp"
#include "iwatsuka/report.hpp"

namespace iwatsuka {

enum class EnvelopeKind { Indicator, Gaussian, Hann };

inline const char* to_string(EnvelopeKind k) {
  switch (k) {
    case EnvelopeKind::Indicator: return "indicator";
    case EnvelopeKind::Gaussian: return "gaussian";
    case EnvelopeKind::Hann: return "hann";
  }
  return "unknown";
}

inline EnvelopeKind envelope_kind_from_string(const std::string& s) {
  if (s == "indicator") return EnvelopeKind::Indicator;
  if (s == "gaussian") return EnvelopeKind::Gaussian;
  if (s == "hann") return EnvelopeKind::Hann;
  throw ParameterError("unknown envelope kind '" + s + "'");
}

// Unnormalized envelope on the open interval (lo, hi), zero elsewhere. The
// Gaussian has standard deviation (hi - lo)/10.
inline double envelope_shape(EnvelopeKind kind, double lo, double hi, double k) {
  if (!(k > lo && k < hi)) return 0.0;
  const double L = hi - lo;
  switch (kind) {
    case EnvelopeKind::Indicator: return 1.0;
    case EnvelopeKind::Gaussian: {
      const double z = (k - 0.5 * (lo + hi)) / (0.1 * L);
      return std::exp(-0.5 * z * z);
    }
    case EnvelopeKind::Hann: {
      const double s = std::sin(std::numbers::pi * (k - lo) / L);
      return s * s;
    }
  }
  return 0.0;
}

// Fibered wave packet  int beta(k) e^{iky} psi_j(x, k) dk / sqrt(2 pi)  sampled
// at the midpoints of n equal cells of the support; sum dk beta^2 = 1.
struct WavePacket {
  FieldProfile profile;
  int j = 1;
  EnvelopeKind kind = EnvelopeKind::Hann;
  double support_lo = 0.0;
  double support_hi = 0.0;
  double dk = 0.0;
  std::vector<double> nodes;
  std::vector<double> envelope;
  BandTable modes;  // band data and eigenvectors of level j at the nodes
  std::optional<SpectralWindow> window;
};

inline WavePacket build_packet_on(const FieldProfile& p, const BandOptions& o, int j, double lo, double hi,
                                  EnvelopeKind kind, std::size_t n_nodes = 256) {
  if (!(hi > lo)) throw ParameterError("packet support must have positive length");
  if (n_nodes < 8) throw ParameterError("packet needs at least 8 nodes");
  WavePacket w;
  w.profile = p;
  w.j = j;
  w.kind = kind;
  w.support_lo = lo;
  w.support_hi = hi;
  w.dk = (hi - lo) / static_cast<double>(n_nodes);
  w.nodes.resize(n_nodes);
  w.envelope.resize(n_nodes);
  double norm = 0.0;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    w.nodes[i] = lo + (static_cast<double>(i) + 0.5) * w.dk;
    w.envelope[i] = envelope_shape(kind, lo, hi, w.nodes[i]);
    norm += w.dk * w.envelope[i] * w.envelope[i];
  }
  for (double& e : w.envelope) e /= std::sqrt(norm);
  BandOptions oo = o;
  oo.keep_vectors = true;
  if (!oo.grid) oo.common_grid = true;
  w.modes = compute_bands(p, w.nodes, j, oo);
  return w;
}

// Packet whose support is the whole preimage of the window.
inline WavePacket build_packet(const SpectralWindow& win, EnvelopeKind kind, std::size_t n_nodes = 256) {
  auto w = build_packet_on(win.profile, win.options, win.j, win.k_lo, win.k_hi, kind, n_nodes);
  w.window = win;
  return w;
}

// Expected value of p_y - beta:  (1/2) int omega_j'(k) beta(k)^2 dk.
inline double edge_current(const WavePacket& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.nodes.size(); ++i)
    s += w.dk * w.modes.mode(w.j, i).fh * w.envelope[i] * w.envelope[i];
  return 0.5 * s;
}

// Asserts the bound in its stated form; the fiber identity for J by itself
// only yields half of it.
inline CheckReport check_current_lower_bound(const WavePacket& w, const DerivativeBoundConstants& c) {
  if (!w.window) throw ParameterError("packet has no spectral window");
  CheckReport r;
  r.id = "thm41_current";
  r.anchor = "edge current lower bound for states in the spectral window";
  r.observed = edge_current(w);
  r.bound = derivative_lower_bound(*w.window, c);
  r.ratio = r.observed / r.bound;
  r.status = r.ratio >= 1.0 ? CheckStatus::Pass : CheckStatus::Fail;
  r.note = std::string(to_string(w.kind)) + " envelope";
  return r;
}

// |J| <= <(p_y - beta)^2>^{1/2} <= (sup of the window)^{1/2}.
inline CheckReport check_current_upper_bound(const WavePacket& w) {
  if (!w.window) throw ParameterError("packet has no spectral window");
  CheckReport r;
  r.id = "current_upper";
  r.anchor = "Cauchy-Schwarz upper bound for the edge current";
  r.observed = edge_current(w);
  r.bound = std::sqrt(w.window->hi);
  r.ratio = r.bound / std::abs(r.observed);
  r.status = std::abs(r.observed) <= r.bound ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

struct LocalizationWindow {
  double eps1 = 1.0;
  double eps2 = 0.25;
  double lo = 0.0;
  double hi = 0.0;
  double eta = 0.0;
  double bound = 0.0;
};

inline LocalizationWindow make_localization_window(const FieldProfile& p, int j, double eps1, double eps2) {
  if (!(eps1 > 0.0)) throw ParameterError("eps1 must be positive");
  if (!(eps2 > 0.0 && eps2 < 0.5)) throw ParameterError("eps2 must lie in (0, 1/2)");
  LocalizationWindow w;
  w.eps1 = eps1;
  w.eps2 = eps2;
  w.lo = -(1.0 + eps1) * std::pow(p.b_minus(), -0.5 + eps2);
  w.hi = (1.0 + eps1) * std::pow(p.b_plus(), -0.5 + eps2);
  w.eta = 2.0 * std::sqrt(std::numbers::pi * (2.0 * j - 1.0));
  w.bound = 1.0 - w.eta * std::exp(-eps1 * eps1 * std::pow(p.b_minus(), 2.0 * eps2) / 8.0);
  return w;
}

namespace detail {
// int_a^b f over the piecewise-linear interpolant of samples f_i on g.
inline double interval_integral(const FiberGrid& g, const std::vector<double>& f, double a, double b) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < g.n; ++i) {
    const double x0 = g.x(i), x1 = g.x(i + 1);
    const double lo = std::max(a, x0), hi = std::min(b, x1);
    if (hi <= lo) continue;
    auto at = [&](double x) { return f[i] + (f[i + 1] - f[i]) * (x - x0) / (x1 - x0); };
    s += 0.5 * (at(lo) + at(hi)) * (hi - lo);
  }
  return s;
}
}  // namespace detail

inline double localization_mass(const WavePacket& w, const LocalizationWindow& loc) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.nodes.size(); ++i) {
    const auto& psi = w.modes.vector(w.j, i);
    std::vector<double> dens(psi.size());
    for (std::size_t n = 0; n < psi.size(); ++n) dens[n] = psi[n] * psi[n];
    s += w.dk * w.envelope[i] * w.envelope[i] * detail::interval_integral(w.modes.grids[i], dens, loc.lo, loc.hi);
  }
  return s;
}

inline CheckReport check_localization(const WavePacket& w, const LocalizationWindow& loc) {
  CheckReport r;
  r.id = "thm44_localization";
  r.anchor = "localization of the current-carrying packet near the edge";
  r.observed = localization_mass(w, loc);
  r.bound = loc.bound;
  r.ratio = r.bound > 0.0 ? r.observed / r.bound : NAN;
  if (r.observed < r.bound) r.status = CheckStatus::Fail;
  else r.status = r.bound > 0.0 ? CheckStatus::Pass : CheckStatus::Vacuous;
  std::ostringstream os;
  os << "b_-=" << w.profile.b_minus() << " eps1=" << loc.eps1 << " eps2=" << loc.eps2 << " I=[" << loc.lo << ", "
     << loc.hi << "]";
  r.note = os.str();
  return r;
}

// The preimage of the window must sit inside (-b_-^{1/2+eps2}, b_+^{1/2+eps2}).
inline CheckReport preimage_containment_check(const SpectralWindow& win, double eps2) {
  CheckReport r;
  r.id = "a25_containment";
  r.anchor = "window preimage inside the scaled k interval";
  const double lo = -std::pow(win.profile.b_minus(), 0.5 + eps2);
  const double hi = std::pow(win.profile.b_plus(), 0.5 + eps2);
  const double slack = std::min(win.k_lo - lo, hi - win.k_hi);
  r.observed = slack;
  r.bound = 0.0;
  r.ratio = NAN;
  r.status = slack > 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "preimage [" << win.k_lo << ", " << win.k_hi << "] vs (" << lo << ", " << hi << ")";
  r.note = os.str();
  return r;
}

// Gaussian envelope bound on |psi_j(x, k)| beyond x_j^-, x_j^+ for every node
// of the packet. observed = max |psi| / envelope over the tails.
inline CheckReport decay_envelope_check(const WavePacket& w, double eps2) {
  CheckReport r;
  r.id = "a30_decay_envelope";
  r.anchor = "Gaussian decay of the band eigenfunctions away from the edge";
  const double bm = w.profile.b_minus(), bp = w.profile.b_plus();
  const double s = std::sqrt(2.0 * w.j - 1.0);
  const double xp = std::pow(bp, -0.5 + eps2) + s * std::sqrt(bp) / bp;
  const double xm = -(std::pow(bm, -0.5 + eps2) + s * std::sqrt(bp) / bm);
  const double amp = std::sqrt(2.0) * std::sqrt(s) * std::pow(bp, 0.25);
  double worst = 0.0;
  for (std::size_t i = 0; i < w.nodes.size(); ++i) {
    const auto& psi = w.modes.vector(w.j, i);
    const auto& g = w.modes.grids[i];
    for (std::size_t n = 0; n < g.n; ++n) {
      const double x = g.x(n);
      double env;
      if (x >= xp) env = amp * std::exp(-0.5 * bp * (x - xp) * (x - xp));
      else if (x <= xm) env = amp * std::exp(-0.5 * bm * (x - xm) * (x - xm));
      else continue;
      if (env == 0.0) {
        if (psi[n] != 0.0) worst = std::max(worst, std::numeric_limits<double>::infinity());
        continue;
      }
      worst = std::max(worst, std::abs(psi[n]) / env);
    }
  }
  r.observed = worst;
  r.bound = 1.0;
  r.ratio = 1.0 / worst;
  r.status = worst <= 1.0 ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "x_j^- = " << xm << ", x_j^+ = " << xp;
  r.note = os.str();
  return r;
}

struct VelocityWindow {
  double rho = 0.0;
  double theta = 0.0;
};

// Infimum and supremum of omega_j' over the closed window preimage.
inline VelocityWindow velocity_window(const SpectralWindow& win, std::size_t samples = 65) {
  const auto t = compute_bands(win.profile, uniform_grid(win.k_lo, win.k_hi, samples), win.j, win.options);
  VelocityWindow v{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < t.size(); ++i) {
    v.rho = std::min(v.rho, t.mode(win.j, i).fh);
    v.theta = std::max(v.theta, t.mode(win.j, i).fh);
  }
  return v;
}

struct BandEdgeProbe {
  bool found = false;
  double k_center = 0.0;
  double kappa = 0.0;
  double threshold = 0.0;
  double current = 0.0;
  double derivative_at_center = 0.0;
};

// Locates, on the left flank of band j, the interval of two adjacent samples
// closest to the band centre on which omega_j' < C b_-^{1/2}, and evaluates
// the current of an indicator packet there.
inline BandEdgeProbe band_edge_probe(const BandTable& t, int j, double c_target, std::size_t n_nodes = 64) {
  BandEdgeProbe p;
  p.threshold = c_target * std::sqrt(t.profile.b_minus());
  std::size_t best = t.size();
  for (std::size_t ik = 1; ik < t.size(); ++ik) {
    if (t.k[ik] >= 0.0) break;
    if (t.mode(j, ik).fh < p.threshold && t.mode(j, ik - 1).fh < p.threshold) best = ik;
  }
  if (best == t.size()) return p;
  p.found = true;
  p.kappa = 0.5 * (t.k[best] - t.k[best - 1]);
  p.k_center = t.k[best] - p.kappa;
  BandOptions o = t.options;
  o.grid.reset();
  const auto w = build_packet_on(t.profile, o, j, p.k_center - p.kappa, p.k_center + p.kappa,
                                 EnvelopeKind::Indicator, n_nodes);
  p.current = edge_current(w);
  p.derivative_at_center = solve_fiber(t.profile, p.k_center, j, o).modes.back().fh;
  return p;
}

// <y>(t) of the fibered evolution beta(k) -> beta(k) e^{-i t omega_j(k)}; y acts
// as i d/dk, discretised by fourth-order centred differences across nodes.
class FiberedTransport {
 public:
  explicit FiberedTransport(const WavePacket& w) : w_(w) {
    const std::size_t n = w.nodes.size();
    overlap1_.assign(n, 0.0);
    overlap2_.assign(n, 0.0);
    const auto& g = w.modes.grids;
    for (std::size_t i = 0; i < n; ++i) {
      if (i + 1 < n)
        overlap1_[i] = detail::aligned_dot(g[i], w.modes.vector(w.j, i), g[i + 1], w.modes.vector(w.j, i + 1)) * g[i].h;
      if (i + 2 < n)
        overlap2_[i] = detail::aligned_dot(g[i], w.modes.vector(w.j, i), g[i + 2], w.modes.vector(w.j, i + 2)) * g[i].h;
    }
  }

  double position(double t) const {
    const std::size_t n = w_.nodes.size();
    std::vector<std::complex<double>> c(n);
    for (std::size_t i = 0; i < n; ++i)
      c[i] = w_.envelope[i] * std::exp(std::complex<double>(0.0, -t * w_.modes.omega(w_.j, i)));
    auto at = [&](long i) { return (i < 0 || i >= static_cast<long>(n)) ? std::complex<double>(0.0) : c[static_cast<std::size_t>(i)]; };
    auto s = [&](long i, long l) -> double {
      if (l < 0 || l >= static_cast<long>(n)) return 0.0;
      const long a = std::min(i, l);
      const long d = std::abs(i - l);
      if (d == 1) return overlap1_[static_cast<std::size_t>(a)];
      return overlap2_[static_cast<std::size_t>(a)];
    };
    std::complex<double> sum = 0.0;
    for (long i = 0; i < static_cast<long>(n); ++i) {
      const std::complex<double> d = (-at(i + 2) * s(i, i + 2) + 8.0 * at(i + 1) * s(i, i + 1) -
                                      8.0 * at(i - 1) * s(i, i - 1) + at(i - 2) * s(i, i - 2)) /
                                     (12.0 * w_.dk);
      sum += std::conj(c[static_cast<std::size_t>(i)]) * std::complex<double>(0.0, 1.0) * d;
    }
    return sum.real() * w_.dk;
  }

  // Group velocity int omega' beta^2 = 2 J.
  double group_velocity() const { return 2.0 * edge_current(w_); }

 private:
  const WavePacket& w_;
  std::vector<double> overlap1_, overlap2_;
};

struct TransportFit {
  std::vector<double> t;
  std::vector<double> y;
  double slope = 0.0;
  double max_rel_dev = 0.0;  // max_t |y(t) - y(0) - v t| / (v t) over t > 0
};

inline TransportFit fibered_transport(const WavePacket& w, double t_max, std::size_t samples = 21) {
  FiberedTransport ft(w);
  TransportFit f;
  const double v = ft.group_velocity();
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = t_max * static_cast<double>(i) / static_cast<double>(samples - 1);
    f.t.push_back(t);
    f.y.push_back(ft.position(t));
  }
  for (std::size_t i = 0; i < samples; ++i) {
    const double dy = f.y[i] - f.y[0];
    stt += f.t[i] * f.t[i];
    sty += f.t[i] * dy;
    if (f.t[i] > 0.0) f.max_rel_dev = std::max(f.max_rel_dev, std::abs(dy - v * f.t[i]) / std::abs(v * f.t[i]));
  }
  f.slope = sty / stt;
  return f;
}

}  // namespace iwatsuka
