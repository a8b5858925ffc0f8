#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "iwatsuka/eigensolve.hpp"
#include "iwatsuka/fiber.hpp"
#include "iwatsuka/landau.hpp"
#include "iwatsuka/parallel.hpp"
#include "iwatsuka/profiles.hpp"
#include "iwatsuka/report.hpp"

namespace iwatsuka {

enum class Side { Left, Right };

struct BandOptions {
  FiberOptions fiber;
  double y_spacing = 0.0;   // > 0 switches the fiber to the y-lattice symbol
  bool keep_vectors = false;
  bool common_grid = false;  // one grid for the whole k range
  std::optional<FiberGrid> grid;  // explicit grid, overrides the two above
};

// Per (j, k) band data. Derivative routes that do not apply to the profile
// are NaN.
struct ModeSample {
  double omega = 0.0;
  double fh = 0.0;         // 2 int (k - beta) psi^2
  double boundary = NAN;   // (1/b_- - 1/b_+)((omega - k^2) psi(0)^2 + psi'(0)^2)
  double left = NAN;       // 2 (1 - b_-/b_+) int_{x<0} (k - b_- x) psi^2
  double right = NAN;      // 2 (b_+/b_- - 1) int_{x>0} (b_+ x - k) psi^2
  double smooth_left = NAN;   // 2 int (1 - b/b_+)(k - beta) psi^2
  double smooth_right = NAN;  // 2 int (b/b_- - 1)(beta - k) psi^2
  double ramp = NAN;          // int ((omega - V) psi^2 + psi'^2) b'/b^2
  double psi0 = NAN;
  double dpsi0 = NAN;
};

namespace detail {

inline bool sharp_like(const FieldProfile& p) { return !p.has_ramp(); }

inline ModeSample analyze_mode(const FieldProfile& p, double k, const FiberGrid& g, const EigenPair& pair,
                               double y_spacing) {
  const auto& psi = pair.vector;
  const double h = g.h;
  ModeSample m;
  m.omega = pair.value;
  double fh = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double u = k - beta_at(p, g.x(i));
    const double dv = y_spacing > 0.0 ? 2.0 * std::sin(u * y_spacing) / y_spacing : 2.0 * u;
    fh += dv * psi[i] * psi[i];
  }
  m.fh = fh * h;
  if (y_spacing > 0.0) return m;

  const double bm = p.b_minus();
  const double bp = p.b_plus();
  if (sharp_like(p)) {
    if (!g.contains_origin() || g.origin_index() < 3 || g.origin_index() + 3 >= g.n)
      throw ParameterError("fiber grid must contain x = 0 with three nodes on each side");
    const std::size_t o = g.origin_index();
    m.psi0 = psi[o];
    const double dl = (11.0 * psi[o] - 18.0 * psi[o - 1] + 9.0 * psi[o - 2] - 2.0 * psi[o - 3]) / (6.0 * h);
    const double dr = (-11.0 * psi[o] + 18.0 * psi[o + 1] - 9.0 * psi[o + 2] + 2.0 * psi[o + 3]) / (6.0 * h);
    m.dpsi0 = 0.5 * (dl + dr);
    m.boundary = (1.0 / bm - 1.0 / bp) * ((m.omega - k * k) * m.psi0 * m.psi0 + m.dpsi0 * m.dpsi0);
    double sl = 0.0, sr = 0.0;
    for (std::size_t i = 0; i <= o; ++i) {
      const double w = (i == o) ? 0.5 : 1.0;
      sl += w * (k - bm * g.x(i)) * psi[i] * psi[i];
    }
    for (std::size_t i = o; i < g.n; ++i) {
      const double w = (i == o) ? 0.5 : 1.0;
      sr += w * (bp * g.x(i) - k) * psi[i] * psi[i];
    }
    m.left = 2.0 * (1.0 - bm / bp) * sl * h;
    m.right = 2.0 * (bp / bm - 1.0) * sr * h;
    return m;
  }

  double sl = 0.0, sr = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    const double b = field_at(p, x);
    const double u = k - beta_at(p, x);
    const double w = psi[i] * psi[i];
    sl += (1.0 - b / bp) * u * w;
    sr += (b / bm - 1.0) * (-u) * w;
  }
  m.smooth_left = 2.0 * sl * h;
  m.smooth_right = 2.0 * sr * h;

  // Ramp route: F = (omega - V) psi^2 + psi'^2 interpolated linearly between
  // nodes, b'/b^2 integrated exactly by Gauss nodes on the part of each cell
  // inside the ramp (b' may jump at the ramp ends).
  const double e = p.epsilon();
  auto F = [&](std::size_t i) {
    const double u = k - beta_at(p, g.x(i));
    const double d = (psi[i + 1] - psi[i - 1]) / (2.0 * h);
    return (m.omega - u * u) * psi[i] * psi[i] + d * d;
  };
  static constexpr double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                   0.8611363115940526};
  static constexpr double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                   0.3478548451374538};
  double ramp = 0.0;
  for (std::size_t i = 1; i + 2 < g.n; ++i) {
    const double x0 = g.x(i), x1 = g.x(i + 1);
    const double a = std::max(x0, -e), c = std::min(x1, e);
    if (c <= a) continue;
    const double f0 = F(i), f1 = F(i + 1);
    double s = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double x = 0.5 * (a + c) + 0.5 * (c - a) * gx[q];
      const double b = field_at(p, x);
      s += gw[q] * (f0 + (f1 - f0) * (x - x0) / h) * field_slope_at(p, x) / (b * b);
    }
    ramp += 0.5 * (c - a) * s;
  }
  m.ramp = ramp;
  return m;
}

}  // namespace detail

struct FiberSolution {
  double k = 0.0;
  FiberGrid grid;
  std::vector<EigenPair> pairs;
  std::vector<ModeSample> modes;
};

inline FiberGrid grid_for(const FieldProfile& p, double k, int j_max, const BandOptions& o) {
  if (o.grid) return *o.grid;
  return select_domain(p, k, j_max, o.fiber);
}

inline FiberSolution solve_fiber_on(const FieldProfile& p, double k, int j_max, const FiberGrid& g,
                                    double y_spacing) {
  FiberSolution s;
  s.k = k;
  s.grid = g;
  const auto t = build_fiber_operator(p, k, g, y_spacing);
  s.pairs = lowest_eigenpairs(t, static_cast<std::size_t>(j_max), g.h);
  for (const auto& pr : s.pairs) s.modes.push_back(detail::analyze_mode(p, k, g, pr, y_spacing));
  return s;
}

inline FiberSolution solve_fiber(const FieldProfile& p, double k, int j_max, const BandOptions& o = {}) {
  return solve_fiber_on(p, k, j_max, grid_for(p, k, j_max, o), o.y_spacing);
}

struct BandTable {
  FieldProfile profile;
  BandOptions options;
  int j_max = 0;
  std::vector<double> k;
  std::vector<FiberGrid> grids;
  std::vector<ModeSample> modes;              // [ik * j_max + (j - 1)]
  std::vector<std::vector<double>> vectors;  // same layout, only with keep_vectors

  std::size_t size() const { return k.size(); }
  const ModeSample& mode(int j, std::size_t ik) const {
    if (j < 1 || j > j_max || ik >= k.size()) throw ParameterError("band index out of range");
    return modes[ik * static_cast<std::size_t>(j_max) + static_cast<std::size_t>(j - 1)];
  }
  double omega(int j, std::size_t ik) const { return mode(j, ik).omega; }
  const std::vector<double>& vector(int j, std::size_t ik) const {
    if (vectors.empty()) throw ParameterError("band table was built without eigenvectors");
    mode(j, ik);
    return vectors[ik * static_cast<std::size_t>(j_max) + static_cast<std::size_t>(j - 1)];
  }
  std::optional<std::size_t> find_k(double kv) const {
    auto it = std::lower_bound(k.begin(), k.end(), kv - 1e-12 * std::max(1.0, std::abs(kv)));
    if (it != k.end() && std::abs(*it - kv) <= 1e-12 * std::max(1.0, std::abs(kv)))
      return static_cast<std::size_t>(it - k.begin());
    return std::nullopt;
  }
};

inline double default_k_extent(const FieldProfile& p, int j_max) {
  return 8.0 * std::sqrt(p.b_plus()) * std::max(1.0, std::sqrt(2.0 * j_max - 1.0));
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ParameterError("uniform grid needs n >= 2 and hi > lo");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

inline std::vector<double> default_k_grid(const FieldProfile& p, int j_max, std::size_t points = 512) {
  const double K = default_k_extent(p, j_max);
  return uniform_grid(-K, K, points);
}

namespace detail {
// Inner product of two lattice-aligned vectors over their common support.
inline double aligned_dot(const FiberGrid& ga, const std::vector<double>& a, const FiberGrid& gb,
                          const std::vector<double>& b) {
  const long lo = std::max(ga.first, gb.first);
  const long hi = std::min(ga.last(), gb.last());
  double s = 0.0;
  for (long i = lo; i <= hi; ++i) s += a[static_cast<std::size_t>(i - ga.first)] * b[static_cast<std::size_t>(i - gb.first)];
  return s;
}
}  // namespace detail

inline BandTable compute_bands(const FieldProfile& p, const std::vector<double>& k_grid, int j_max,
                               const BandOptions& o = {}) {
  if (j_max < 1) throw ParameterError("j_max must be >= 1");
  if (k_grid.empty()) throw ParameterError("empty k grid");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    if (!std::isfinite(k_grid[i])) throw ParameterError("k grid must be finite");
    if (i > 0 && !(k_grid[i] > k_grid[i - 1])) throw ParameterError("k grid must be strictly increasing");
  }
  BandTable t;
  t.profile = p;
  t.options = o;
  t.j_max = j_max;
  t.k = k_grid;
  const std::size_t nk = k_grid.size();
  const std::size_t jm = static_cast<std::size_t>(j_max);
  std::optional<FiberGrid> shared = o.grid;
  if (!shared && o.common_grid) shared = select_domain(p, k_grid.front(), k_grid.back(), j_max, o.fiber);
  t.grids.resize(nk);
  t.modes.resize(nk * jm);
  if (o.keep_vectors) t.vectors.resize(nk * jm);
  parallel_for(nk, [&](std::size_t ik) {
    const double kv = k_grid[ik];
    const FiberGrid g = shared ? *shared : select_domain(p, kv, j_max, o.fiber);
    auto sol = solve_fiber_on(p, kv, j_max, g, o.y_spacing);
    t.grids[ik] = g;
    for (std::size_t j = 0; j < jm; ++j) {
      t.modes[ik * jm + j] = sol.modes[j];
      if (o.keep_vectors) t.vectors[ik * jm + j] = std::move(sol.pairs[j].vector);
    }
  });
  if (o.keep_vectors) {
    for (std::size_t ik = 1; ik < nk; ++ik)
      for (std::size_t j = 1; j < jm; ++j) {
        auto& cur = t.vectors[ik * jm + j];
        const auto& prev = t.vectors[(ik - 1) * jm + j];
        if (detail::aligned_dot(t.grids[ik], cur, t.grids[ik - 1], prev) < 0.0)
          for (double& v : cur) v = -v;
      }
  }
  return t;
}

namespace detail {
inline ModeSample mode_at(const BandTable& t, int j, double k) {
  if (auto ik = t.find_k(k)) return t.mode(j, *ik);
  return solve_fiber(t.profile, k, t.j_max, t.options).modes.at(static_cast<std::size_t>(j - 1));
}
}  // namespace detail

inline double derivative_fh(const BandTable& t, int j, double k) { return detail::mode_at(t, j, k).fh; }

inline double derivative_boundary(const BandTable& t, int j, double k) {
  if (t.profile.has_ramp()) throw ParameterError("boundary derivative needs a sharp profile");
  if (t.options.y_spacing > 0.0) throw ParameterError("boundary derivative needs the continuum fiber");
  return detail::mode_at(t, j, k).boundary;
}

inline double derivative_halfline(const BandTable& t, int j, double k, Side side) {
  if (t.profile.has_ramp()) throw ParameterError("half-line derivative needs a sharp profile");
  if (t.options.y_spacing > 0.0) throw ParameterError("half-line derivative needs the continuum fiber");
  const auto m = detail::mode_at(t, j, k);
  return side == Side::Left ? m.left : m.right;
}

inline double derivative_smooth(const BandTable& t, int j, double k, Side side) {
  if (!t.profile.has_ramp()) throw ParameterError("smooth derivative needs a ramp profile");
  if (t.options.y_spacing > 0.0) throw ParameterError("smooth derivative needs the continuum fiber");
  const auto m = detail::mode_at(t, j, k);
  return side == Side::Left ? m.smooth_left : m.smooth_right;
}

// Derivative that is a sum of nonnegative terms on the given side of k = 0:
// the right half-line form for k < 0, the left one for k >= 0 (outside the
// ramp for smooth profiles).
inline double positive_route_derivative(const FieldProfile& p, double k, const ModeSample& m) {
  if (p.has_ramp()) return k >= 0.0 ? m.smooth_left : m.smooth_right;
  return k >= 0.0 ? m.left : m.right;
}

// Centered difference of omega_j with fresh fiber solves at k +- dk.
inline double finite_difference_derivative(const FieldProfile& p, double k, int j, const BandOptions& o,
                                           double dk = 1e-3) {
  auto f = [&](double kk) {
    BandOptions oo = o;
    if (!oo.grid) oo.grid = select_domain(p, k - dk, k + dk, j, o.fiber);
    return solve_fiber(p, kk, j, oo).modes.back().omega;
  };
  return (f(k + dk) - f(k - dk)) / (2.0 * dk);
}

// Largest n with ((2n+3)/(2n+1))^{1/2} < r <= ((2n+1)/(2n-1))^{1/2}.
inline int admissible_n(double r) {
  if (!(r > 1.0) || r > std::sqrt(3.0) * (1.0 + 1e-15)) throw ParameterError("ratio must lie in (1, sqrt(3)]");
  const double r2 = r * r;
  auto upper_ok = [r2](long n) { return r2 * (2.0 * n - 1.0) <= 2.0 * n + 1.0 + 1e-14; };
  auto lower_ok = [r2](long n) { return r2 * (2.0 * n + 1.0) > 2.0 * n + 3.0; };
  long n = static_cast<long>(std::floor((r2 + 1.0) / (2.0 * (r2 - 1.0))));
  n = std::max(1L, n);
  while (n > 1 && !upper_ok(n)) --n;
  while (!lower_ok(n)) ++n;
  if (!upper_ok(n)) throw NumericError("could not determine the admissible level count");
  return static_cast<int>(n);
}

struct SpectralWindow {
  FieldProfile profile;
  BandOptions options;
  int j = 1;
  double delta = 0.0;
  int n_admissible = 0;
  double lo = 0.0;
  double hi = 0.0;
  double k_lo = 0.0;
  double k_hi = 0.0;

  double r() const { return profile.ratio(); }
  double midpoint() const { return 0.5 * (lo + hi); }
  double length() const { return hi - lo; }
  double b_minus() const { return profile.b_minus(); }
};

inline double delta_cap(int j, double r) { return (2.0 * j - 1.0) * (r - 1.0) / (r + 1.0); }

namespace detail {
// Solves omega_j(k) = target on a monotone band by bisection.
inline double band_preimage(const FieldProfile& p, int j, double target, const BandOptions& o, double k0,
                            double k1) {
  BandOptions oo = o;
  oo.common_grid = false;
  auto f = [&](double k) { return solve_fiber(p, k, j, oo).modes.back().omega - target; };
  double flo = f(k0);
  for (int it = 0; flo > 0.0 && it < 60; ++it) {
    k0 = k0 - std::max(1.0, std::abs(k0));
    flo = f(k0);
  }
  double fhi = f(k1);
  for (int it = 0; fhi < 0.0 && it < 60; ++it) {
    k1 = k1 + std::max(1.0, std::abs(k1));
    fhi = f(k1);
  }
  if (flo > 0.0 || fhi < 0.0) throw NumericError("could not bracket the band preimage", j);
  while (k1 - k0 > 1e-9) {
    const double mid = 0.5 * (k0 + k1);
    if (f(mid) < 0.0) k0 = mid;
    else k1 = mid;
  }
  return 0.5 * (k0 + k1);
}
}  // namespace detail

inline SpectralWindow make_window_unchecked(const FieldProfile& p, const BandOptions& o, int j, double delta,
                                            double k_guess_lo, double k_guess_hi) {
  if (p.has_ramp() || p.kind() == ProfileKind::Constant)
    throw ParameterError("spectral windows are defined for sharp profiles");
  const double r = p.ratio();
  const int n = admissible_n(r);
  if (j < 1 || j > n) {
    std::ostringstream os;
    os << "level " << j << " is not admissible for r = " << r << " (n = " << n << ")";
    throw ParameterError(os.str());
  }
  if (!(delta > 0.0) || !(delta < delta_cap(j, r))) throw ParameterError("delta outside (0, (2j-1)(r-1)/(r+1))");
  SpectralWindow w;
  w.profile = p;
  w.options = o;
  w.options.keep_vectors = false;
  w.options.grid.reset();
  w.options.common_grid = false;
  w.j = j;
  w.delta = delta;
  w.n_admissible = n;
  w.lo = (2.0 * j - 1.0 + delta) * p.b_minus();
  w.hi = (2.0 * j - 1.0 - delta) * p.b_plus();
  w.k_lo = detail::band_preimage(p, j, w.lo, w.options, k_guess_lo, k_guess_hi);
  w.k_hi = detail::band_preimage(p, j, w.hi, w.options, w.k_lo, k_guess_hi);
  return w;
}

// Other bands must avoid the window on every sampled k.
inline CheckReport check_window_disjoint(const SpectralWindow& w, const BandTable& t) {
  CheckReport r;
  r.id = "a14_disjoint";
  r.anchor = "isolated band window";
  double margin = std::numeric_limits<double>::infinity();
  int others = 0;
  for (int l = 1; l <= t.j_max; ++l) {
    if (l == w.j) continue;
    ++others;
    for (std::size_t ik = 0; ik < t.size(); ++ik) {
      const double om = t.omega(l, ik);
      margin = std::min(margin, l < w.j ? w.lo - om : om - w.hi);
    }
  }
  r.observed = margin;
  r.bound = 0.0;
  r.ratio = NAN;
  if (others == 0) {
    r.status = CheckStatus::Skipped;
    r.note = "no other band in table";
    return r;
  }
  r.status = margin > 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
  r.note = "min distance of other bands to the window";
  if (t.j_max < w.j + 1) r.note += " (band j+1 not in table)";
  return r;
}

inline SpectralWindow make_window(const BandTable& t, int j, double delta) {
  if (j > t.j_max) throw ParameterError("window level exceeds table j_max");
  auto w = make_window_unchecked(t.profile, t.options, j, delta, t.k.front(), t.k.back());
  const auto rep = check_window_disjoint(w, t);
  if (rep.status == CheckStatus::Fail) throw TheoremCheckFailure(rep);
  return w;
}

inline double derivative_lower_bound(const SpectralWindow& w, const DerivativeBoundConstants& c) {
  if (w.j > c.j_max) throw ParameterError("constants do not cover the window level");
  const double r = w.r();
  return c.c[w.j] * std::pow(w.delta, 3) * (r - 1.0) / (r * r * r) * std::sqrt(w.b_minus());
}

inline CheckReport check_derivative_lower_bound(const SpectralWindow& w, const BandTable& t,
                                                const DerivativeBoundConstants& c) {
  CheckReport r;
  r.id = "a14_lower_bound";
  r.anchor = "band derivative lower bound on the window preimage";
  r.bound = derivative_lower_bound(w, c);
  double min_d = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t ik = 0; ik < t.size(); ++ik) {
    if (t.k[ik] < w.k_lo || t.k[ik] > w.k_hi) continue;
    min_d = std::min(min_d, t.mode(w.j, ik).fh);
    ++count;
  }
  if (count == 0) throw ParameterError("table has no k sample inside the window preimage");
  r.observed = min_d;
  r.ratio = min_d / r.bound;
  r.status = r.ratio >= 1.0 ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "min over " << count << " k samples in [" << w.k_lo << ", " << w.k_hi << "]";
  r.note = os.str();
  return r;
}

inline double smooth_comparison_bound(const FieldProfile& smooth, int j) {
  const double r = smooth.ratio();
  const double a = (r - 1.0) * std::sqrt(smooth.b_minus()) * smooth.epsilon();
  return a * (a + 2.0 * std::sqrt(2.0 * j - 1.0) * std::sqrt(r)) * smooth.b_minus();
}

inline CheckReport compare_sharp_smooth(const BandTable& sharp, const BandTable& smooth, int j) {
  if (sharp.k != smooth.k) throw ParameterError("tables must share their k grid");
  if (sharp.profile.has_ramp()) throw ParameterError("first table must be sharp");
  CheckReport r;
  r.id = "b10_comparison";
  r.anchor = "sharp versus smoothed band functions";
  double mx = 0.0;
  for (std::size_t ik = 0; ik < sharp.size(); ++ik)
    mx = std::max(mx, std::abs(smooth.omega(j, ik) - sharp.omega(j, ik)));
  r.observed = mx;
  r.bound = smooth_comparison_bound(smooth.profile, j);
  r.ratio = r.bound / mx;
  r.status = mx <= r.bound ? CheckStatus::Pass : CheckStatus::Fail;
  r.note = profile_id(smooth.profile);
  return r;
}

// (2j-1) b_- <= omega_j <= (2j-1) b_+ on every sample, within tol.
inline CheckReport check_sandwich(const BandTable& t, double tol = 1e-4) {
  CheckReport r;
  r.id = "a9_sandwich";
  r.anchor = "band functions between the asymptotic Landau levels";
  double worst = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= t.j_max; ++j)
    for (std::size_t ik = 0; ik < t.size(); ++ik) {
      const double om = t.omega(j, ik);
      worst = std::min(worst, om - (2.0 * j - 1.0) * t.profile.b_minus());
      worst = std::min(worst, (2.0 * j - 1.0) * t.profile.b_plus() - om);
    }
  r.observed = worst;
  r.bound = -tol;
  r.ratio = NAN;
  r.status = worst >= -tol ? CheckStatus::Pass : CheckStatus::Fail;
  r.note = "min slack to the sandwich over all samples";
  return r;
}

// Strict increase along the k grid. Steps that move omega by more than the
// eigenvalue resolution are checked directly; flatter steps (far tails) are
// certified by a derivative route that is a sum of nonnegative terms.
inline CheckReport check_monotone(const BandTable& t) {
  CheckReport r;
  r.id = "lemma31_monotone";
  r.anchor = "strictly increasing band functions";
  if (t.profile.kind() == ProfileKind::Constant || t.profile.ratio() == 1.0) {
    r.status = CheckStatus::Skipped;
    r.note = "flat bands for a constant field";
    return r;
  }
  std::size_t direct = 0, certified = 0, violations = 0;
  for (int j = 1; j <= t.j_max; ++j) {
    for (std::size_t ik = 0; ik + 1 < t.size(); ++ik) {
      const double a = t.omega(j, ik), b = t.omega(j, ik + 1);
      const double h = std::min(t.grids[ik].h, t.grids[ik + 1].h);
      const double tau = 64.0 * std::numeric_limits<double>::epsilon() * 4.0 / (h * h);
      if (b - a > tau) {
        ++direct;
        continue;
      }
      const double da = positive_route_derivative(t.profile, t.k[ik], t.mode(j, ik));
      const double db = positive_route_derivative(t.profile, t.k[ik + 1], t.mode(j, ik + 1));
      if (b - a >= -tau && da > 0.0 && db > 0.0) ++certified;
      else ++violations;
    }
  }
  r.observed = static_cast<double>(violations);
  r.bound = 0.0;
  r.ratio = NAN;
  r.status = violations == 0 ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << direct << " steps increase directly, " << certified << " certified by a positive derivative, "
     << violations << " violations";
  r.note = os.str();
  return r;
}

// omega_j(-K) and omega_j(K) against (2j-1) b_- and (2j-1) b_+.
inline CheckReport check_band_limits(const BandTable& t, double tol = 1e-3) {
  CheckReport r;
  r.id = "bflimit";
  r.anchor = "band limits at k -> -inf and k -> +inf";
  double worst = 0.0;
  for (int j = 1; j <= t.j_max; ++j) {
    worst = std::max(worst, std::abs(t.omega(j, 0) - (2.0 * j - 1.0) * t.profile.b_minus()));
    worst = std::max(worst, std::abs(t.omega(j, t.size() - 1) - (2.0 * j - 1.0) * t.profile.b_plus()));
  }
  r.observed = worst;
  r.bound = tol;
  r.ratio = tol / worst;
  r.status = worst <= tol ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "at k = " << t.k.front() << " and k = " << t.k.back();
  r.note = os.str();
  return r;
}

// Maximal relative disagreement of the alternative derivative routes with the
// Feynman-Hellmann value, on samples where the band is not numerically flat
// (omega' >= active_fraction * max omega').
struct DerivativeAgreement {
  double boundary = 0.0;
  double halfline = 0.0;
  double smooth = 0.0;
  double ramp = 0.0;
  std::size_t samples = 0;
};

inline DerivativeAgreement derivative_agreement(const BandTable& t, int j, double active_fraction = 1e-2) {
  DerivativeAgreement a;
  double peak = 0.0;
  for (std::size_t ik = 0; ik < t.size(); ++ik) peak = std::max(peak, t.mode(j, ik).fh);
  auto rel = [](double x, double ref) { return std::isnan(x) ? 0.0 : std::abs(x - ref) / std::abs(ref); };
  for (std::size_t ik = 0; ik < t.size(); ++ik) {
    const auto& m = t.mode(j, ik);
    if (m.fh < active_fraction * peak) continue;
    ++a.samples;
    a.boundary = std::max(a.boundary, rel(m.boundary, m.fh));
    a.halfline = std::max({a.halfline, rel(m.left, m.fh), rel(m.right, m.fh)});
    a.smooth = std::max({a.smooth, rel(m.smooth_left, m.fh), rel(m.smooth_right, m.fh)});
    a.ramp = std::max(a.ramp, rel(m.ramp, m.fh));
  }
  return a;
}

inline CheckReport check_derivative_routes(const BandTable& t, int j, double tol_boundary = 1e-3,
                                           double tol_integral = 1e-4) {
  CheckReport r;
  r.id = "derivative_crosscheck";
  r.anchor = "Feynman-Hellmann, boundary and half-line derivative identities";
  const auto a = derivative_agreement(t, j);
  const double worst = std::max({a.boundary / tol_boundary, a.halfline / tol_integral, a.smooth / tol_integral,
                                 a.ramp / tol_boundary});
  r.observed = worst;
  r.bound = 1.0;
  r.ratio = 1.0 / worst;
  r.status = worst <= 1.0 ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "j=" << j << " samples=" << a.samples << " boundary=" << a.boundary << " halfline=" << a.halfline
     << " smooth=" << a.smooth << " ramp=" << a.ramp;
  r.note = os.str();
  return r;
}

// Positivity of omega_j' for a ramp profile. With all_k = false only
// |k| > b_+ epsilon is examined; otherwise every sample.
inline CheckReport check_smooth_positivity(const BandTable& t, int j, bool all_k) {
  if (!t.profile.has_ramp()) throw ParameterError("positivity check needs a ramp profile");
  CheckReport r;
  r.id = all_k ? "remark53_positive" : "lemma52_positivity";
  r.anchor = all_k ? "positivity of the smoothed band derivative for every k"
                   : "positivity of the smoothed band derivative away from the ramp";
  const double edge = t.profile.b_plus() * t.profile.epsilon();
  double mn = std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  for (std::size_t ik = 0; ik < t.size(); ++ik) {
    const double k = t.k[ik];
    const auto& m = t.mode(j, ik);
    double d;
    if (k > edge) d = m.smooth_left;
    else if (k < -edge) d = m.smooth_right;
    else if (all_k) d = m.fh;
    else continue;
    mn = std::min(mn, d);
    ++used;
  }
  r.observed = mn;
  r.bound = 0.0;
  r.ratio = NAN;
  r.status = (used > 0 && mn > 0.0) ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << used << " samples, " << profile_id(t.profile);
  r.note = os.str();
  return r;
}

}  // namespace iwatsuka
