#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "iwatsuka/profiles.hpp"
#include "iwatsuka/report.hpp"

namespace iwatsuka {

// Uniform grid x_i = (first + i) h, i = 0..n-1. Every grid lives on the lattice
// h*Z, so x = 0 is representable and grids with equal h can be aligned.
struct FiberGrid {
  long first = 0;
  std::size_t n = 0;
  double h = 0.0;

  double x(std::size_t i) const { return static_cast<double>(first + static_cast<long>(i)) * h; }
  double x_min() const { return x(0); }
  double x_max() const { return x(n - 1); }
  long last() const { return first + static_cast<long>(n) - 1; }
  bool contains_origin() const { return first <= 0 && last() >= 0; }
  std::size_t origin_index() const { return static_cast<std::size_t>(-first); }
};

inline FiberGrid grid_on_lattice(double h, double lo, double hi, std::size_t min_points = 64) {
  if (!(h > 0.0) || !(hi > lo)) throw ParameterError("invalid lattice grid request");
  long a = static_cast<long>(std::floor(lo / h));
  long b = static_cast<long>(std::ceil(hi / h));
  while (b - a + 1 < static_cast<long>(min_points)) {
    --a;
    ++b;
  }
  return FiberGrid{a, static_cast<std::size_t>(b - a + 1), h};
}

struct FiberOptions {
  double margin_widths = 8.0;
  // Grid spacing in units of the smallest magnetic length b_+^{-1/2}.
  double spacing = 0.003;
  std::size_t min_points = 64;
};

inline double fiber_spacing(const FieldProfile& p, const FiberOptions& o) {
  if (!(o.spacing > 0.0) || o.spacing > 0.2)
    throw ParameterError("fiber spacing must lie in (0, 0.2] magnetic lengths");
  return o.spacing / std::sqrt(p.b_plus());
}

inline double fiber_halfwidth(const FieldProfile& p, int j_max, double margin_widths) {
  return margin_widths * std::sqrt((2.0 * j_max + 1.0) / p.b_minus());
}

// Hull of beta^{-1}(k) +- W and +-W over k in [k_lo, k_hi].
inline FiberGrid select_domain(const FieldProfile& p, double k_lo, double k_hi, int j_max,
                               const FiberOptions& o = {}) {
  if (j_max < 1) throw ParameterError("j_max must be >= 1");
  if (!(o.margin_widths > 0.0)) throw ParameterError("margin must be positive");
  if (!std::isfinite(k_lo) || !std::isfinite(k_hi) || k_hi < k_lo)
    throw ParameterError("invalid k range");
  const double w = fiber_halfwidth(p, j_max, o.margin_widths);
  const double lo = std::min(beta_inverse(p, k_lo) - w, -w);
  const double hi = std::max(beta_inverse(p, k_hi) + w, w);
  return grid_on_lattice(fiber_spacing(p, o), lo, hi, o.min_points);
}

inline FiberGrid select_domain(const FieldProfile& p, double k, int j_max, const FiberOptions& o = {}) {
  return select_domain(p, k, k, j_max, o);
}

// Symmetric tridiagonal matrix: diag[0..n-1], offdiag[0..n-2].
struct TridiagonalOperator {
  std::vector<double> diag;
  std::vector<double> offdiag;

  std::size_t size() const { return diag.size(); }
  double norm_inf() const {
    double m = 0.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
      double s = std::abs(diag[i]);
      if (i > 0) s += std::abs(offdiag[i - 1]);
      if (i + 1 < diag.size()) s += std::abs(offdiag[i]);
      m = std::max(m, s);
    }
    return m;
  }
  // Gershgorin enclosure of the spectrum.
  std::pair<double, double> gershgorin() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < diag.size(); ++i) {
      double r = 0.0;
      if (i > 0) r += std::abs(offdiag[i - 1]);
      if (i + 1 < diag.size()) r += std::abs(offdiag[i]);
      lo = std::min(lo, diag[i] - r);
      hi = std::max(hi, diag[i] + r);
    }
    return {lo, hi};
  }
  void apply(const std::vector<double>& v, std::vector<double>& out) const {
    const std::size_t n = size();
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * v[i];
      if (i > 0) s += offdiag[i - 1] * v[i - 1];
      if (i + 1 < n) s += offdiag[i] * v[i + 1];
      out[i] = s;
    }
  }
};

// y-direction kinetic term of the fiber. y_spacing = 0 gives (k - beta)^2;
// y_spacing = h_y > 0 gives the lattice symbol (2 - 2 cos((k - beta) h_y)) / h_y^2
// used by the two-dimensional propagator.
inline double fiber_potential(const FieldProfile& p, double k, double x, double y_spacing = 0.0) {
  const double u = k - beta_at(p, x);
  if (y_spacing <= 0.0) return u * u;
  const double s = std::sin(0.5 * u * y_spacing);
  return 4.0 * s * s / (y_spacing * y_spacing);
}

inline TridiagonalOperator build_fiber_operator(const FieldProfile& p, double k, const FiberGrid& g,
                                                double y_spacing = 0.0) {
  if (g.n < 3 || !(g.h > 0.0)) throw ParameterError("fiber grid too small");
  TridiagonalOperator t;
  const double inv = 1.0 / (g.h * g.h);
  t.diag.resize(g.n);
  t.offdiag.assign(g.n - 1, -inv);
  for (std::size_t i = 0; i < g.n; ++i) t.diag[i] = 2.0 * inv + fiber_potential(p, k, g.x(i), y_spacing);
  return t;
}

}  // namespace iwatsuka
