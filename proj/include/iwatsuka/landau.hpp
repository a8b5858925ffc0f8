#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "iwatsuka/fiber.hpp"
#include "iwatsuka/report.hpp"

namespace iwatsuka {

// Physicists' Hermite polynomial H_n(u), 0 <= n <= 12.
inline double hermite(int n, double u) {
  if (n < 0 || n > 12) throw ParameterError("hermite degree must lie in [0, 12]");
  double h0 = 1.0;
  if (n == 0) return h0;
  double h1 = 2.0 * u;
  for (int m = 1; m < n; ++m) {
    const double h2 = 2.0 * u * h1 - 2.0 * m * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

// l-th normalized eigenfunction (l >= 1, energy (2l-1) b) of
// p_x^2 + (k - b x)^2, centred at k/b. Level l carries H_{l-1}.
inline double landau_eigenfunction(double b, int l, double k, double x) {
  if (l < 1 || l > 12) throw ParameterError("Landau level must lie in [1, 12]");
  if (!(b > 0.0)) throw ParameterError("field strength must be positive");
  const int d = l - 1;
  const double u = std::sqrt(b) * (x - k / b);
  const double norm = std::pow(b / std::numbers::pi, 0.25) /
                      std::sqrt(std::ldexp(std::tgamma(d + 1.0), d));
  return norm * std::exp(-0.5 * u * u) * hermite(d, u);
}

// Composite 8-point Gauss-Legendre rule with 8 panels per unit length
// (64 nodes per unit).
template <class F>
double integrate_composite(F&& f, double a, double b, int panels_per_unit = 8) {
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) * panels_per_unit)));
  const double w = (b - a) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * w;
    s += boost::math::quadrature::gauss<double, 8>::integrate(f, lo, lo + w);
  }
  return s;
}

// tilde c_l = (2^d d!)^{-1/2} pi^{-1/4} (int_0^inf u^3 e^{-u^2} H_d(u)^2 du)^{1/2},
// d = l - 1. Equal to the L^2 norm of (k - b x)^{3/2} psi_l over the half line
// behind the centre, divided by b^{3/4}.
inline double tilde_c(int l) {
  if (l < 1 || l > 12) throw ParameterError("level must lie in [1, 12]");
  const int d = l - 1;
  auto f = [d](double u) {
    const double h = hermite(d, u);
    return u * u * u * std::exp(-u * u) * h * h;
  };
  const double coarse = integrate_composite(f, 0.0, 30.0, 4);
  const double fine = integrate_composite(f, 0.0, 30.0, 8);
  if (std::abs(fine - coarse) > 1e-12 * std::max(1.0, std::abs(fine)))
    throw NumericError("moment quadrature did not converge", l);
  return std::sqrt(fine / std::ldexp(std::tgamma(d + 1.0), d)) * std::pow(std::numbers::pi, -0.25);
}

// Constants of the band-derivative lower bound, indexed 1..j_max (entry 0 unused).
struct DerivativeBoundConstants {
  int j_max = 0;
  std::vector<double> c_tilde;
  std::vector<double> c_neg;
  std::vector<double> c_pos;
  std::vector<double> c;
};

inline DerivativeBoundConstants derivative_bound_constants(int j_max) {
  if (j_max < 1 || j_max > 8) throw ParameterError("j_max must lie in [1, 8]");
  DerivativeBoundConstants out;
  out.j_max = j_max;
  out.c_tilde.assign(j_max + 1, 0.0);
  out.c_neg.assign(j_max + 1, 0.0);
  out.c_pos.assign(j_max + 1, 0.0);
  out.c.assign(j_max + 1, 0.0);
  double running_max = 0.0;
  for (int j = 1; j <= j_max; ++j) {
    out.c_tilde[j] = tilde_c(j);
    running_max = std::max(running_max, out.c_tilde[j]);
    const double base = 1.0 / (running_max * running_max);
    out.c_neg[j] = base / j;
    out.c_pos[j] = base / (2.0 * j - 1.0);
    out.c[j] = std::min(out.c_neg[j], out.c_pos[j]);
  }
  return out;
}

// L^2 norm over x < 0 of (k - b x)^{3/2} psi_l(x, k) for the field b, by
// quadrature in u = sqrt(b)(x - k/b).
inline double half_line_cubic_moment(double b, int l, double k) {
  const double u0 = -k / std::sqrt(b);
  const double lo = std::min(u0, 0.0) - 30.0;
  auto f = [&](double u) {
    const double x = u / std::sqrt(b) + k / b;
    if (x >= 0.0) return 0.0;
    const double w = k - b * x;
    const double psi = landau_eigenfunction(b, l, k, x);
    return w * w * w * psi * psi / std::sqrt(b);
  };
  const double s = integrate_composite(f, lo, std::min(u0, 30.0));
  return std::sqrt(std::max(s, 0.0));
}

// alpha_l = <psi, psi_l^{b}(k)> for l = 1..l_max on the fiber grid.
inline std::vector<double> landau_overlaps(const std::vector<double>& psi, const FiberGrid& g, double b,
                                           double k, int l_max) {
  if (psi.size() != g.n) throw ParameterError("vector and grid disagree");
  std::vector<double> out(static_cast<std::size_t>(l_max) + 1, 0.0);
  for (int l = 1; l <= l_max; ++l) {
    const double edge = std::max(std::abs(landau_eigenfunction(b, l, k, g.x_min())),
                                 std::abs(landau_eigenfunction(b, l, k, g.x_max())));
    if (edge > 1e-12) throw ParameterError("fiber grid too narrow for the Landau reference functions");
    double s = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) s += psi[i] * landau_eigenfunction(b, l, k, g.x(i));
    out[l] = s * g.h;
  }
  return out;
}

}  // namespace iwatsuka
