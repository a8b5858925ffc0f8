#pragma once

#include <cmath>
#include <limits>
#include <sstream>

#include "iwatsuka/bands.hpp"
#include "iwatsuka/landau.hpp"
#include "iwatsuka/report.hpp"

namespace iwatsuka {

// Dimensionless inputs of the commutator-estimate bookkeeping for a window:
// d_j = |Delta_j| / (2 b_-), e_j = (midpoint of Delta_j) / b_-.
struct LedgerInputs {
  int j = 1;
  double r = 0.0;
  double delta = 0.0;
  double c_j = 0.0;
  double d_j = 0.0;
  double e_j = 0.0;
  double b_minus = 1.0;

  // c_j delta^3 (r - 1) / r^3
  double gap_scale() const { return c_j * delta * delta * delta * (r - 1.0) / (r * r * r); }
};

inline LedgerInputs ledger_inputs(const SpectralWindow& w, const DerivativeBoundConstants& c) {
  if (w.j > c.j_max) throw ParameterError("constants do not cover the window level");
  LedgerInputs in;
  in.j = w.j;
  in.r = w.r();
  in.delta = w.delta;
  in.c_j = c.c[w.j];
  in.d_j = w.length() / (2.0 * w.b_minus());
  in.e_j = w.midpoint() / w.b_minus();
  in.b_minus = w.b_minus();
  return in;
}

struct PerturbLedger {
  bool perturbed = false;
  double N = 1.0;
  double a = 0.0;  // (r - 1) b_-^{1/2} epsilon, or the size of the perturbation
  double q = 0.0;
  double d_jN = 0.0;
  double c_jN = 0.0;
  double c_tilde = 0.0;
  double F = 0.0;
  double condition = 0.0;  // must be <= 1/2

  bool holds() const { return condition <= 0.5; }
};

// perturbed = false: bookkeeping for the smoothed edge; perturbed = true adds
// the electric term q and halves c_j.
inline PerturbLedger evaluate_ledger(const LedgerInputs& in, double N, double a, double q, bool perturbed) {
  if (!(N >= 1.0)) throw ParameterError("N must be >= 1");
  if (a < 0.0 || q < 0.0) throw ParameterError("a and q must be nonnegative");
  if (!perturbed && q != 0.0) throw ParameterError("q only enters the perturbed ledger");
  PerturbLedger l;
  l.perturbed = perturbed;
  l.N = N;
  l.a = a;
  l.q = q;
  l.d_jN = in.d_j / N;
  const double inner = std::pow(in.e_j + l.d_jN + q, 0.25);
  const double s = 2.0 * std::sqrt(a) + inner;
  l.c_jN = 2.0 * a * s * s + l.d_jN + q;
  l.c_tilde = l.c_jN / in.d_j;
  const double loss = 3.0 * std::sqrt(l.c_tilde) * std::sqrt(in.e_j + l.c_jN) + a;
  const double scale = (perturbed ? 0.5 : 1.0) * in.gap_scale();
  l.F = scale * (1.0 - l.c_tilde * l.c_tilde) - loss;
  l.condition = l.c_tilde * l.c_tilde + loss / scale;
  return l;
}

inline PerturbLedger ledger_smooth(const LedgerInputs& in, double N, double a) {
  return evaluate_ledger(in, N, a, 0.0, false);
}
inline PerturbLedger ledger_perturbed(const LedgerInputs& in, double N, double a, double q) {
  return evaluate_ledger(in, N, a, q, true);
}

struct AdmissibleRegion {
  bool nonempty = false;
  bool perturbed = false;
  double N = 0.0;
  double a_max = 0.0;    // largest a with q = 0
  double a_star = 0.0;   // perturbed mode: a used for the corner (a_max / 2)
  double q_max = 0.0;    // perturbed mode: largest q at a_star
  double d_max = 0.0;    // 2 d_{j,N} b_-
  double epsilon_max = 0.0;  // smooth mode: a_max / ((r - 1) b_-^{1/2})
  double base_d_j = 0.0;     // d_j the search started from
  PerturbLedger corner;
};

namespace detail {
// Largest x in [0, inf) with pred(x) true, assuming pred is monotone and
// pred(0) holds; bisection in log scale to relative width 1e-6.
template <class P>
double largest_admissible(P&& pred) {
  double hi = 1e-300;
  while (pred(hi)) {
    hi *= 16.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  double lo = hi / 16.0;
  if (!pred(lo)) {
    // pred fails already at the smallest probe: admissible set is {0}
    while (lo > 1e-300 && !pred(lo)) lo /= 16.0;
    if (!pred(lo)) return 0.0;
    hi = lo * 16.0;
  }
  while (hi / lo > 1.0 + 1e-6) {
    const double mid = std::sqrt(lo * hi);
    if (pred(mid)) lo = mid;
    else hi = mid;
  }
  return lo;
}
}  // namespace detail

// Smallest power-of-two N (up to 2^62) for which the half-condition holds at
// a = q = 0, then the largest admissible a (and q at a_max/2 in perturbed
// mode). In perturbed mode the base interval is the smooth-mode subinterval
// Delta_{j,N} of half-width d_j/N times b_-.
inline AdmissibleRegion admissible_region(const LedgerInputs& base, bool perturbed) {
  AdmissibleRegion out;
  out.perturbed = perturbed;
  LedgerInputs in = base;
  if (perturbed) {
    const auto smooth = admissible_region(base, false);
    if (!smooth.nonempty) return out;
    in.d_j = base.d_j / smooth.N;
  }
  out.base_d_j = in.d_j;
  if (!(in.d_j > 0.0)) return out;
  double N = 1.0;
  bool found = false;
  for (int p = 0; p <= 62; ++p, N *= 2.0) {
    if (evaluate_ledger(in, N, 0.0, 0.0, perturbed).condition < 0.5) {
      found = true;
      break;
    }
  }
  if (!found) return out;
  out.N = N;
  out.a_max = detail::largest_admissible([&](double a) { return evaluate_ledger(in, N, a, 0.0, perturbed).holds(); });
  if (!(out.a_max > 0.0)) return out;
  out.nonempty = true;
  out.d_max = 2.0 * (in.d_j / N) * in.b_minus;
  if (perturbed) {
    out.a_star = 0.5 * out.a_max;
    out.q_max = detail::largest_admissible(
        [&](double q) { return evaluate_ledger(in, N, out.a_star, q, true).holds(); });
    out.corner = evaluate_ledger(in, N, out.a_star, out.q_max, true);
  } else {
    out.corner = evaluate_ledger(in, N, out.a_max, 0.0, false);
    out.epsilon_max = out.a_max / ((in.r - 1.0) * std::sqrt(in.b_minus));
  }
  return out;
}

// Positive commutator constant (c_j/4) delta^3 (r-1)/r^3 b_-^{1/2}.
inline double mourre_constant(const LedgerInputs& in) { return 0.25 * in.gap_scale() * std::sqrt(in.b_minus); }

// Admissible size of sup|a_2| / b_-^{1/2} for the asymptotic velocity bound.
inline double asymptotic_a_star(const LedgerInputs& in) { return 0.25 * in.gap_scale(); }

inline CheckReport check_ledger(const LedgerInputs& in, bool perturbed) {
  CheckReport r;
  r.id = perturbed ? "thm61_ledger" : "thm54_ledger";
  r.anchor = perturbed ? "admissible perturbation size for the perturbed edge current"
                       : "admissible smoothing width for the smoothed edge current";
  const auto reg = admissible_region(in, perturbed);
  r.observed = reg.corner.condition;
  r.bound = 0.5;
  r.ratio = reg.nonempty ? 0.5 / reg.corner.condition : NAN;
  r.status = (reg.nonempty && reg.corner.holds()) ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os.precision(6);
  os << "N=" << reg.N << " a_max=" << reg.a_max;
  if (perturbed) os << " a_star=" << reg.a_star << " q_max=" << reg.q_max;
  else os << " eps_max=" << reg.epsilon_max;
  os << " d_max=" << reg.d_max;
  r.note = os.str();
  return r;
}

// At the admissible corner the lower bound F must dominate the commutator
// constant: F >= (c_j/2) gap (smooth) or (c_j/4) gap (perturbed).
inline CheckReport check_mourre_constant(const LedgerInputs& in) {
  CheckReport r;
  r.id = "emp7_mourre_constant";
  r.anchor = "positive commutator constant of the perturbed edge";
  const auto reg = admissible_region(in, true);
  r.observed = reg.corner.F;
  r.bound = 0.25 * in.gap_scale();
  r.ratio = r.observed / r.bound;
  r.status = (reg.nonempty && r.ratio >= 1.0) ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "mourre constant " << mourre_constant(in) << " at b_-=" << in.b_minus;
  r.note = os.str();
  return r;
}

}  // namespace iwatsuka
