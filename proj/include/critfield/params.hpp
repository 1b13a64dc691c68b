#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "critfield/common.hpp"

namespace critfield {

enum class Regime { Subcritical, Critical, Supercritical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Subcritical: return "subcritical";
    case Regime::Critical: return "critical";
    default: return "supercritical";
  }
}

// Exact rational value, used so criticality d*H == N can be decided without
// floating error when H is supplied as p/q.
struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return (double)num / (double)den; }
};

// Model parameters: domain dimension N, range dimension d, Hurst index H,
// log exponent gamma, scale cutoff delta0. The whole theory bifurcates on
// exact equality d*H == N, so H keeps its rational form when given one.
struct FieldParams {
  int N = 1;
  int d = 1;
  double H = 0.5;
  double gamma = 0.0;
  double delta0 = 1.0;
  std::optional<Rational> H_rational;

  static constexpr double kCriticalTol = 1e-12;

  FieldParams() = default;
  FieldParams(int N_, int d_, double H_, double gamma_, double delta0_ = 1.0)
      : N(N_), d(d_), H(H_), gamma(gamma_), delta0(delta0_) {
    validate();
  }
  FieldParams(int N_, int d_, Rational H_, double gamma_, double delta0_ = 1.0)
      : N(N_), d(d_), H(H_.value()), gamma(gamma_), delta0(delta0_), H_rational(H_) {
    if (H_.den <= 0 || H_.num <= 0) throw domain_error("FieldParams: H rational must be positive");
    validate();
  }

  void validate() const {
    if (N < 1) throw domain_error("FieldParams: N must be a positive integer");
    if (d < 1) throw domain_error("FieldParams: d must be a positive integer");
    if (!(H > 0.0 && H < 1.0)) throw domain_error("FieldParams: H must lie in (0,1)");
    if (!std::isfinite(gamma)) throw domain_error("FieldParams: gamma must be finite");
    if (!(delta0 > 0.0 && delta0 <= 1.0)) throw domain_error("FieldParams: delta0 must lie in (0,1]");
  }

  Regime regime() const {
    if (H_rational) {
      // d > N/H  <=>  d*num > N*den  (num/den = H > 0)
      const long long lhs = (long long)d * H_rational->num;
      const long long rhs = (long long)N * H_rational->den;
      if (lhs == rhs) return Regime::Critical;
      return lhs > rhs ? Regime::Supercritical : Regime::Subcritical;
    }
    const double gap = (double)d * H - (double)N;
    if (std::fabs(gap) <= kCriticalTol) return Regime::Critical;
    return gap > 0 ? Regime::Supercritical : Regime::Subcritical;
  }

  bool critical() const { return regime() == Regime::Critical; }

  // gamma relative to the threshold 1/d, with a small float guard band.
  enum class GammaCase { Below, AtBoundary, Above };
  GammaCase gamma_case() const {
    const double gd = gamma * (double)d;
    if (std::fabs(gd - 1.0) <= kCriticalTol) return GammaCase::AtBoundary;
    return gd < 1.0 ? GammaCase::Below : GammaCase::Above;
  }
};

struct PolarityVerdict {
  Regime regime;
  bool points_polar;
  bool integral_diverges;
  bool local_time_exists;
};

// Integral/polarity classification: the integral of r^{N-1}/sigma^d(r)
// diverges at 0 iff d > N/H, or d = N/H and gamma <= 1/d. Points are polar
// exactly when the integral diverges; a square-integrable local time exists
// exactly when it converges.
inline PolarityVerdict classify_polarity(const FieldParams& p) {
  PolarityVerdict v{};
  v.regime = p.regime();
  switch (v.regime) {
    case Regime::Supercritical:
      v.integral_diverges = true;
      break;
    case Regime::Subcritical:
      v.integral_diverges = false;
      break;
    case Regime::Critical:
      v.integral_diverges = (p.gamma_case() != FieldParams::GammaCase::Above);
      break;
  }
  v.points_polar = v.integral_diverges;
  v.local_time_exists = !v.integral_diverges;
  return v;
}

}  // namespace critfield
