#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "iwatsuka/report.hpp"

namespace iwatsuka {

enum class ProfileKind { Sharp, SmoothLinear, SmoothCubic, Constant };

inline const char* to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::Sharp: return "sharp";
    case ProfileKind::SmoothLinear: return "smooth_linear";
    case ProfileKind::SmoothCubic: return "smooth_cubic";
    case ProfileKind::Constant: return "constant";
  }
  return "unknown";
}

inline ProfileKind profile_kind_from_string(const std::string& s) {
  if (s == "sharp") return ProfileKind::Sharp;
  if (s == "smooth_linear" || s == "linear") return ProfileKind::SmoothLinear;
  if (s == "smooth_cubic" || s == "cubic") return ProfileKind::SmoothCubic;
  if (s == "constant") return ProfileKind::Constant;
  throw ParameterError("unknown profile kind '" + s + "'");
}

// Translation-invariant-in-y magnetic field b(x) with b = b_- on the far left
// and b = b_+ on the far right. Smooth kinds interpolate monotonically on
// [-epsilon, epsilon]; the vector potential beta is the primitive of b with
// beta(0) = 0, kept in closed form.
class FieldProfile {
 public:
  static FieldProfile make(ProfileKind kind, double b_minus, double b_plus, double epsilon = 0.0) {
    if (!std::isfinite(b_minus) || !std::isfinite(b_plus) || !std::isfinite(epsilon))
      throw ParameterError("profile parameters must be finite");
    if (!(b_minus > 0.0)) throw ParameterError("b_minus must be positive");
    if (b_plus < b_minus) throw ParameterError("b_plus must be >= b_minus");
    if (epsilon < 0.0) throw ParameterError("epsilon must be nonnegative");
    if (kind == ProfileKind::Constant && b_plus != b_minus)
      throw ParameterError("constant profile needs b_minus == b_plus");
    if ((kind == ProfileKind::Sharp || kind == ProfileKind::Constant) && epsilon != 0.0)
      throw ParameterError("epsilon must be 0 for sharp and constant profiles");
    if (kind == ProfileKind::SmoothLinear || kind == ProfileKind::SmoothCubic) {
      const double cap = 1.0 / std::sqrt(b_minus);
      if (epsilon >= cap) throw ParameterError("epsilon must be below b_minus^{-1/2}");
    }
    FieldProfile p;
    p.kind_ = kind;
    p.bm_ = b_minus;
    p.bp_ = b_plus;
    p.eps_ = epsilon;
    return p;
  }
  static FieldProfile sharp(double bm, double bp) { return make(ProfileKind::Sharp, bm, bp); }
  static FieldProfile smooth_linear(double bm, double bp, double eps) {
    return make(ProfileKind::SmoothLinear, bm, bp, eps);
  }
  static FieldProfile smooth_cubic(double bm, double bp, double eps) {
    return make(ProfileKind::SmoothCubic, bm, bp, eps);
  }
  static FieldProfile constant(double b) { return make(ProfileKind::Constant, b, b); }

  ProfileKind kind() const { return kind_; }
  double b_minus() const { return bm_; }
  double b_plus() const { return bp_; }
  double epsilon() const { return eps_; }
  double ratio() const { return bp_ / bm_; }
  bool has_ramp() const {
    return (kind_ == ProfileKind::SmoothLinear || kind_ == ProfileKind::SmoothCubic) && eps_ > 0.0;
  }

  // Shape s(t) of the ramp on t in [0,1], its derivative and primitive.
  double ramp(double t) const {
    if (kind_ == ProfileKind::SmoothLinear) return t;
    return t * t * (3.0 - 2.0 * t);
  }
  double ramp_slope(double t) const {
    if (kind_ == ProfileKind::SmoothLinear) return 1.0;
    return 6.0 * t * (1.0 - t);
  }
  double ramp_primitive(double t) const {
    if (kind_ == ProfileKind::SmoothLinear) return 0.5 * t * t;
    return t * t * t - 0.5 * t * t * t * t;
  }

 private:
  ProfileKind kind_ = ProfileKind::Constant;
  double bm_ = 1.0;
  double bp_ = 1.0;
  double eps_ = 0.0;
};

inline std::string profile_id(const FieldProfile& p) {
  std::ostringstream os;
  os << to_string(p.kind()) << '_' << p.b_minus() << '_' << p.b_plus();
  if (p.has_ramp()) os << "_eps" << p.epsilon();
  return os.str();
}

inline double field_at(const FieldProfile& p, double x) {
  if (!p.has_ramp()) return x < 0.0 ? p.b_minus() : p.b_plus();
  const double e = p.epsilon();
  if (x <= -e) return p.b_minus();
  if (x >= e) return p.b_plus();
  const double t = (x + e) / (2.0 * e);
  return p.b_minus() + (p.b_plus() - p.b_minus()) * p.ramp(t);
}

// Derivative b'(x); zero outside the ramp.
inline double field_slope_at(const FieldProfile& p, double x) {
  if (!p.has_ramp()) return 0.0;
  const double e = p.epsilon();
  if (x <= -e || x >= e) return 0.0;
  const double t = (x + e) / (2.0 * e);
  return (p.b_plus() - p.b_minus()) * p.ramp_slope(t) / (2.0 * e);
}

namespace detail {
// Primitive of b measured from -epsilon, valid on [-epsilon, epsilon].
inline double ramp_integral(const FieldProfile& p, double x) {
  const double e = p.epsilon();
  const double t = (x + e) / (2.0 * e);
  return p.b_minus() * (x + e) + (p.b_plus() - p.b_minus()) * 2.0 * e * p.ramp_primitive(t);
}
}  // namespace detail

inline double beta_at(const FieldProfile& p, double x) {
  if (!p.has_ramp()) return x < 0.0 ? p.b_minus() * x : p.b_plus() * x;
  const double e = p.epsilon();
  const double g0 = detail::ramp_integral(p, 0.0);
  if (x <= -e) return p.b_minus() * (x + e) - g0;
  if (x >= e) return detail::ramp_integral(p, e) + p.b_plus() * (x - e) - g0;
  return detail::ramp_integral(p, x) - g0;
}

inline double beta_inverse(const FieldProfile& p, double k) {
  if (!std::isfinite(k)) throw ParameterError("beta_inverse needs a finite argument");
  if (!p.has_ramp()) return k < 0.0 ? k / p.b_minus() : k / p.b_plus();
  const double e = p.epsilon();
  const double lo_val = beta_at(p, -e);
  const double hi_val = beta_at(p, e);
  if (k <= lo_val) return -e + (k - lo_val) / p.b_minus();
  if (k >= hi_val) return e + (k - hi_val) / p.b_plus();
  double lo = -e;
  double hi = e;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(k)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (beta_at(p, mid) < k) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// sup_x |beta_smooth - beta_sharp|. Both ramps are monotone, so the difference
// increases on [-eps, 0], decreases on [0, eps] and is constant outside; the
// supremum is attained at x = -eps or x = +eps.
inline double beta_sup_distance(const FieldProfile& sharp, const FieldProfile& smooth) {
  if (sharp.has_ramp()) throw ParameterError("first argument must be a sharp profile");
  if (sharp.b_minus() != smooth.b_minus() || sharp.b_plus() != smooth.b_plus())
    throw ParameterError("profiles must share b_minus and b_plus");
  if (!smooth.has_ramp()) return 0.0;
  const double e = smooth.epsilon();
  return std::max(std::abs(beta_at(smooth, -e) - beta_at(sharp, -e)),
                  std::abs(beta_at(smooth, e) - beta_at(sharp, e)));
}

// C^1 bump cos^2(pi s / 2) on |s| < 1 and its derivative.
inline double bump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * s);
  return c * c;
}
inline double bump_slope(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return -0.5 * std::numbers::pi * std::sin(std::numbers::pi * s);
}

// Bounded perturbation (a1, a2, q) with declared sup-norms. The declared
// values are upper bounds, not necessarily attained.
struct PerturbationSpec {
  std::function<double(double, double)> a1;
  std::function<double(double, double)> a2;
  std::function<double(double, double)> q;
  double support_halfwidth = 0.0;
  double a_sup = 0.0;       // sup |(a1, a2)|
  double grad_a_sup = 0.0;  // sup of the Frobenius norm of the Jacobian of a
  double q_sup = 0.0;
  double a2_sup = 0.0;

  bool is_zero() const { return a_sup == 0.0 && q_sup == 0.0; }
};

inline PerturbationSpec zero_perturbation() {
  PerturbationSpec s;
  s.a1 = [](double, double) { return 0.0; };
  s.a2 = [](double, double) { return 0.0; };
  s.q = [](double, double) { return 0.0; };
  return s;
}

// a_i(x, y) = A_i g(y/R) g(x/X), q(x, y) = Q g(y/R) g(x/X) with g the bump
// above. x_halfwidth = infinity removes the x-dependence.
inline PerturbationSpec make_bump_perturbation(double a1_amp, double a2_amp, double q_amp,
                                               double support_halfwidth,
                                               double x_halfwidth = std::numeric_limits<double>::infinity()) {
  if (!(support_halfwidth > 0.0)) throw ParameterError("support halfwidth must be positive");
  if (!(x_halfwidth > 0.0)) throw ParameterError("x halfwidth must be positive");
  const double R = support_halfwidth;
  const double X = x_halfwidth;
  auto shape = [R, X](double x, double y) {
    const double gx = std::isinf(X) ? 1.0 : bump(x / X);
    return bump(y / R) * gx;
  };
  PerturbationSpec s;
  s.a1 = [a1_amp, shape](double x, double y) { return a1_amp * shape(x, y); };
  s.a2 = [a2_amp, shape](double x, double y) { return a2_amp * shape(x, y); };
  s.q = [q_amp, shape](double x, double y) { return q_amp * shape(x, y); };
  s.support_halfwidth = R;
  s.a_sup = std::hypot(a1_amp, a2_amp);
  const double inv_x = std::isinf(X) ? 0.0 : 1.0 / X;
  s.grad_a_sup = s.a_sup * 0.5 * std::numbers::pi * std::hypot(1.0 / R, inv_x);
  s.q_sup = std::abs(q_amp);
  s.a2_sup = std::abs(a2_amp);
  return s;
}

}  // namespace iwatsuka
