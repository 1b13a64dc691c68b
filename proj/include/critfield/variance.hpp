#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/logscale.hpp"
#include "critfield/params.hpp"
#include "critfield/quadrature.hpp"

namespace critfield {

// ---------------------------------------------------------------------------
// Scalar scale functions for sigma(r) = r^H (log 1/r)^gamma and its relatives.
// Every function has a direct path for representable radii and a log-domain
// path taking lambda = log(1/r); the two agree wherever both exist.
// ---------------------------------------------------------------------------

inline void check_radius_open01(double r) {
  if (!(r > 0.0) || !(r < 1.0)) throw domain_error("radius must lie in (0,1)");
}

// log sigma = -H*lambda + gamma*log(lambda)
inline long double log_sigma(const LogScale& s, const FieldParams& p) {
  const long double lam = s.lambda();
  return -(long double)p.H * lam + (long double)p.gamma * std::log(lam);
}

inline double sigma(double r, const FieldParams& p) {
  check_radius_open01(r);
  const double lam = -std::log(r);
  return std::pow(r, p.H) * std::pow(lam, p.gamma);
}

// sigma*(r) = H^{gamma/H} r^{1/H} (log 1/r)^{-gamma/H}, asymptotic inverse:
// sigma(sigma*(r))/r -> 1 as r -> 0.
inline double sigma_star(double r, const FieldParams& p) {
  check_radius_open01(r);
  const double lam = -std::log(r);
  const double gh = p.gamma / p.H;
  return std::pow(p.H, gh) * std::pow(r, 1.0 / p.H) * std::pow(lam, -gh);
}

inline long double log_sigma_star(const LogScale& s, const FieldParams& p) {
  const long double lam = s.lambda();
  const long double gh = (long double)p.gamma / p.H;
  return gh * std::log((long double)p.H) - lam / (long double)p.H - gh * std::log(lam);
}

// sigma is increasing below r_bar = exp(-gamma/H) (all of (0,1) when
// gamma <= 0); d sigma/dr vanishes at H log(1/r) = gamma.
inline double sigma_peak_radius(const FieldParams& p) {
  if (p.gamma <= 0.0) return 1.0;
  return std::exp(-p.gamma / p.H);
}

// f(r): (log 1/r)^{1-gamma d} when gamma < 1/d, loglog(1/r) when gamma = 1/d.
inline long double f_gauge_log_domain(long double lambda, const FieldParams& p) {
  switch (p.gamma_case()) {
    case FieldParams::GammaCase::Below:
      if (!(lambda > 0.0L)) throw domain_error("f_gauge: needs log(1/r) > 0");
      return std::pow(lambda, 1.0L - (long double)p.gamma * p.d);
    case FieldParams::GammaCase::AtBoundary:
      if (!(lambda > 1.0L)) throw domain_error("f_gauge: needs loglog(1/r) > 0, so r < 1/e");
      return std::log(lambda);
    default:
      throw domain_error("f_gauge: defined only for gamma <= 1/d");
  }
}

inline double f_gauge(double r, const FieldParams& p) {
  check_radius_open01(r);
  return (double)f_gauge_log_domain(-std::log((long double)r), p);
}

// Psi(eps) = (log 1/eps)^{1-gamma d}: equals f below the boundary, 1 at it.
inline long double psi_log_domain(long double lambda, const FieldParams& p) {
  switch (p.gamma_case()) {
    case FieldParams::GammaCase::Below:
      return f_gauge_log_domain(lambda, p);
    case FieldParams::GammaCase::AtBoundary:
      if (!(lambda > 0.0L)) throw domain_error("psi: needs log(1/eps) > 0");
      return 1.0L;
    default:
      throw domain_error("psi: defined only for gamma <= 1/d");
  }
}

inline double psi(double eps, const FieldParams& p) {
  check_radius_open01(eps);
  return (double)psi_log_domain(-std::log((long double)eps), p);
}

// Hausdorff gauge phi(r) = r^d (log 1/r)^{1-gamma d} logloglog(1/r).
// Hard error when the triple log is nonpositive: silent clamping would
// corrupt gauge sums.
inline long double log_phi_gauge_log_domain(long double lambda, const FieldParams& p) {
  if (!(lambda > (long double)M_E)) {
    throw domain_error("phi_gauge: needs logloglog(1/r) > 0, so r < exp(-e)");
  }
  const long double lll = std::log(std::log(lambda));
  if (!(lll > 0.0L)) throw domain_error("phi_gauge: triple log nonpositive");
  return -(long double)p.d * lambda +
         (1.0L - (long double)p.gamma * p.d) * std::log(lambda) + std::log(lll);
}

inline double phi_gauge(double r, const FieldParams& p) {
  check_radius_open01(r);
  return (double)std::exp(log_phi_gauge_log_domain(-std::log((long double)r), p));
}

// ---------------------------------------------------------------------------
// Integral criterion: value of the truncated integral plus the analytic
// divergence verdict. Divergence is never inferred from quadrature; no finite
// quadrature can see a loglog divergence.
// ---------------------------------------------------------------------------

struct IntegralCriterion {
  double value = 0.0;
  bool diverges = false;
  double abs_error = 0.0;
};

inline IntegralCriterion integral_criterion(const FieldParams& p, double r_min,
                                            double rel_tol = 1e-8) {
  if (!(r_min > 0.0) || !(r_min < p.delta0)) {
    throw domain_error("integral_criterion: needs 0 < r_min < delta0");
  }
  const auto integrand = [&](double r) {
    return std::pow(r, p.N - 1) / std::pow(sigma(r, p), p.d);
  };
  QuadResult q = integrate_singular_left(integrand, r_min, p.delta0, rel_tol);
  if (!q.converged) {
    throw numerical_error("integral_criterion: quadrature did not reach tolerance (evals=" +
                          std::to_string(q.evals) + ", err=" + std::to_string(q.abs_error) + ")");
  }
  IntegralCriterion out;
  out.value = q.value;
  out.abs_error = q.abs_error;
  out.diverges = classify_polarity(p).integral_diverges;
  return out;
}

// ---------------------------------------------------------------------------
// Trace of the sufficiency quotient r^N / sigma^d(r (loglog 1/r)^{-1/N}),
// evaluated in log domain; callers inspect the monotone trend. In the
// critical dimension the quotient reduces exactly to
// loglog(1/r) / ((1/N) logloglog(1/r) + log(1/r))^{gamma d}.
// ---------------------------------------------------------------------------

inline long double log_suff_quotient(const LogScale& r, const FieldParams& p) {
  const long double lam = r.lambda();
  if (!(lam > (long double)M_E)) {
    throw domain_error("suff_condition_trace: needs r < exp(-e)");
  }
  // lambda of the shrunk radius r*(loglog 1/r)^{-1/N}
  const long double lam_x = lam + std::log(std::log(lam)) / (long double)p.N;
  LogScale shrunk = LogScale::from_lambda(lam_x);
  return -(long double)p.N * lam - (long double)p.d * log_sigma(shrunk, p);
}

inline std::vector<long double> suff_condition_trace(const FieldParams& p,
                                                     const std::vector<LogScale>& radii) {
  std::vector<long double> out;
  out.reserve(radii.size());
  for (const auto& r : radii) out.push_back(log_suff_quotient(r, p));
  return out;
}

// The critical-dimension display, for cross-checking the quotient algebra.
inline long double log_critical_display(const LogScale& r, const FieldParams& p) {
  const long double lam = r.lambda();
  if (!(lam > (long double)M_E)) throw domain_error("critical display: needs r < exp(-e)");
  const long double loglog = std::log(lam);
  const long double logloglog = std::log(loglog);
  return std::log(loglog) -
         (long double)(p.gamma * p.d) * std::log(lam + logloglog / (long double)p.N);
}

}  // namespace critfield
