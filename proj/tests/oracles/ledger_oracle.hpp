#pragma once

#include <cmath>

namespace oracle {

// The half-condition of the constant ledger, written out term by term from
// its definition: c_{j,N}, tilde c_{j,N} = c_{j,N}/d_j and
//   tilde c^2 + k c_j^{-1} delta^{-3} r^3/(r-1) (3 tilde c^{1/2} (e_j + c)^{1/2} + a) <= 1/2
// with k = 1 for the smoothed edge and k = 2 with the electric term q.
struct LedgerSpot {
  double c, c_tilde, condition;
};

inline LedgerSpot ledger_spot(double c_j, double delta, double r, double d_j, double e_j, double N, double a,
                              double q, bool perturbed) {
  const double dN = d_j / N;
  const double root = 2.0 * std::sqrt(a) + std::pow(e_j + dN + q, 0.25);
  const double c = 2.0 * a * root * root + dN + q;
  const double ct = c / d_j;
  const double k = perturbed ? 2.0 : 1.0;
  const double pre = k * (r * r * r / (r - 1.0)) / (c_j * delta * delta * delta);
  const double cond = ct * ct + pre * (3.0 * std::sqrt(ct) * std::sqrt(e_j + c) + a);
  return {c, ct, cond};
}

}  // namespace oracle
