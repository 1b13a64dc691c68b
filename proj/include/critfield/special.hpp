#pragma once

#include <cmath>

#include "critfield/common.hpp"

namespace critfield {

// Regularized lower incomplete gamma P(a,x), series for x < a+1 and
// continued fraction otherwise (Numerical Recipes scheme).
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw domain_error("gamma_p: needs x >= 0, a > 0");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // continued fraction for Q(a,x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

// P{chi^2_d <= y}; y is the squared norm of a standard d-dim Gaussian.
inline double chi2_cdf(int d, double y) {
  if (d < 1) throw domain_error("chi2_cdf: d >= 1");
  if (y <= 0.0) return 0.0;
  if (d == 2) return -std::expm1(-0.5 * y);  // 1 - e^{-y/2}
  return gamma_p(0.5 * d, 0.5 * y);
}

// P{|Z| <= a} for standard normal Z.
inline double normal_abs_cdf(double a) {
  if (a <= 0.0) return 0.0;
  return std::erf(a / std::sqrt(2.0));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace critfield
