#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "iwatsuka/fiber.hpp"
#include "iwatsuka/report.hpp"

namespace iwatsuka {

// Number of eigenvalues of t strictly below x (Sturm sequence / LDL^T inertia).
inline std::size_t sturm_count(const TridiagonalOperator& t, double x) {
  const std::size_t n = t.size();
  const double tiny = std::numeric_limits<double>::min() * 4.0;
  std::size_t count = 0;
  double q = t.diag[0] - x;
  if (std::abs(q) < tiny) q = -tiny;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    const double e = t.offdiag[i - 1];
    q = (t.diag[i] - x) - e * e / q;
    if (std::abs(q) < tiny) q = -tiny;
    if (q < 0.0) ++count;
  }
  return count;
}

namespace detail {
// Sturm counts at four shifts in one sweep; the independent divisions overlap.
inline void sturm_count4(const TridiagonalOperator& t, const double* x, std::size_t* out) {
  const std::size_t n = t.size();
  const double tiny = std::numeric_limits<double>::min() * 4.0;
  double q[4];
  std::size_t c[4] = {0, 0, 0, 0};
  for (int s = 0; s < 4; ++s) {
    q[s] = t.diag[0] - x[s];
    if (std::abs(q[s]) < tiny) q[s] = -tiny;
    c[s] += q[s] < 0.0;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double e2 = t.offdiag[i - 1] * t.offdiag[i - 1];
    const double d = t.diag[i];
    for (int s = 0; s < 4; ++s) {
      q[s] = (d - x[s]) - e2 / q[s];
      if (std::abs(q[s]) < tiny) q[s] = -tiny;
      c[s] += q[s] < 0.0;
    }
  }
  for (int s = 0; s < 4; ++s) out[s] = c[s];
}
}  // namespace detail

// The m smallest eigenvalues in ascending order, by multisection on Sturm
// counts (four interior points per sweep). Brackets are shrunk to a few ulps,
// well inside 1e-10 of the Gershgorin radius.
inline std::vector<double> lowest_eigenvalues(const TridiagonalOperator& t, std::size_t m) {
  const std::size_t n = t.size();
  if (m == 0 || 4 * m > n) throw ParameterError("lowest_eigenvalues needs 1 <= m <= n/4");
  auto [glo, ghi] = t.gershgorin();
  const double radius = std::max(std::abs(glo), std::abs(ghi));
  const double eps = std::numeric_limits<double>::epsilon();
  std::vector<double> lo(m, glo), hi(m, ghi);
  auto record = [&](std::size_t from, double x, std::size_t c) {
    for (std::size_t l = from; l < m; ++l) {
      if (c <= l) lo[l] = std::max(lo[l], x);
      else hi[l] = std::min(hi[l], x);
    }
  };
  // Cheap upper brackets: grow a step from the lower bound until it holds m values.
  for (double step = 1.0; step < 2.0 * (ghi - glo); step *= 4.0) {
    const double x = glo + step;
    if (x >= ghi) break;
    const std::size_t c = sturm_count(t, x);
    record(0, x, c);
    if (c >= m) break;
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) lo[i] = std::max(lo[i], out[i - 1]);
    int it = 0;
    while (hi[i] - lo[i] > 2.0 * eps * std::max(std::abs(lo[i]), std::abs(hi[i])) + 1e-300) {
      double xs[4];
      std::size_t cs[4];
      const double w = hi[i] - lo[i];
      for (int s = 0; s < 4; ++s) xs[s] = lo[i] + w * (s + 1) / 5.0;
      if (xs[0] <= lo[i] || xs[3] >= hi[i]) break;
      detail::sturm_count4(t, xs, cs);
      for (int s = 0; s < 4; ++s) record(i, xs[s], cs[s]);
      if (++it > 200) break;
    }
    if (hi[i] - lo[i] > 1e-10 * radius)
      throw NumericError("eigenvalue bisection did not converge", static_cast<long>(i));
    out[i] = 0.5 * (lo[i] + hi[i]);
  }
  return out;
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

struct EigenvectorRequest {
  int index = 1;         // 1-based position in the spectrum; index 1 is made positive
  double spacing = 1.0;  // grid spacing h; the result satisfies h * sum psi^2 = 1
  std::span<const std::vector<double>> orthogonalize_against = {};
  const std::vector<double>* continuity_ref = nullptr;
};

// One step of inverse iteration at a converged eigenvalue estimate, started
// from the unit vector e_t at the twist index t of the LDL^T / UDU^T pair
// (the index minimising |gamma_t|). Then (T - lambda) x = gamma_t e_t, and x
// is built outward from t as products of pivot ratios, which keeps the
// exponentially small tails accurate to high relative precision.
inline std::vector<double> eigenvector(const TridiagonalOperator& t, double lambda,
                                       const EigenvectorRequest& req = {}) {
  const std::size_t n = t.size();
  if (req.continuity_ref && req.continuity_ref->size() != n)
    throw ParameterError("continuity reference has the wrong length");
  const double tnorm = t.norm_inf();
  const double tiny = std::numeric_limits<double>::epsilon() * std::max(1.0, tnorm) * 1e-8;
  auto guard = [tiny](double v) { return std::abs(v) < tiny ? (v < 0.0 ? -tiny : tiny) : v; };
  std::vector<double> dp(n), dm(n);
  dp[0] = guard(t.diag[0] - lambda);
  for (std::size_t i = 1; i < n; ++i) {
    const double e = t.offdiag[i - 1];
    dp[i] = guard((t.diag[i] - lambda) - e * e / dp[i - 1]);
  }
  dm[n - 1] = guard(t.diag[n - 1] - lambda);
  for (std::size_t i = n - 1; i-- > 0;) {
    const double e = t.offdiag[i];
    dm[i] = guard((t.diag[i] - lambda) - e * e / dm[i + 1]);
  }
  std::size_t twist = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = std::abs(dp[i] + dm[i] - (t.diag[i] - lambda));
    if (g < best) {
      best = g;
      twist = i;
    }
  }
  std::vector<double> v(n, 0.0);
  v[twist] = 1.0;
  for (std::size_t i = twist; i-- > 0;) v[i] = -(t.offdiag[i] / dp[i]) * v[i + 1];
  for (std::size_t i = twist + 1; i < n; ++i) v[i] = -(t.offdiag[i - 1] / dm[i]) * v[i - 1];
  for (const auto& p : req.orthogonalize_against) {
    const double c = detail::dot(v, p) / detail::dot(p, p);
    for (std::size_t i = 0; i < n; ++i) v[i] -= c * p[i];
  }
  const double nv = std::sqrt(detail::dot(v, v));
  if (!(nv > 0.0) || !std::isfinite(nv)) throw NumericError("inverse iteration broke down", req.index);
  for (double& x : v) x /= nv;
  std::vector<double> tv;
  t.apply(v, tv);
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r += (tv[i] - lambda * v[i]) * (tv[i] - lambda * v[i]);
  if (!(std::sqrt(r) <= 1e-8 * tnorm))
    throw NumericError("inverse iteration did not reach the residual tolerance", req.index);

  double sign = 1.0;
  if (req.index == 1) {
    double s = 0.0;
    for (double x : v) s += x;
    sign = s < 0.0 ? -1.0 : 1.0;
  } else if (req.continuity_ref) {
    sign = detail::dot(v, *req.continuity_ref) < 0.0 ? -1.0 : 1.0;
  } else {
    double vmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    for (double x : v)
      if (std::abs(x) > 1e-3 * vmax) {
        sign = x < 0.0 ? -1.0 : 1.0;
        break;
      }
  }
  const double scale = sign / std::sqrt(req.spacing);
  for (double& x : v) x *= scale;
  return v;
}

struct EigenPair {
  int index = 1;
  double value = 0.0;
  std::vector<double> vector;
};

inline std::vector<EigenPair> lowest_eigenpairs(const TridiagonalOperator& t, std::size_t m, double spacing) {
  const auto values = lowest_eigenvalues(t, m);
  std::vector<EigenPair> pairs;
  std::vector<std::vector<double>> done;
  for (std::size_t i = 0; i < m; ++i) {
    EigenvectorRequest req;
    req.index = static_cast<int>(i) + 1;
    req.spacing = spacing;
    req.orthogonalize_against = done;
    auto v = eigenvector(t, values[i], req);
    done.push_back(v);
    pairs.push_back({req.index, values[i], std::move(v)});
  }
  return pairs;
}

}  // namespace iwatsuka
