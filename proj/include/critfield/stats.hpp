#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/rng.hpp"

namespace critfield {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw domain_error("mean: empty sample");
  KahanSum s;
  for (double x : v) s.add(x);
  return s.value() / (double)v.size();
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  KahanSum s;
  for (double x : v) s.add(sq(x - m));
  return v.size() > 1 ? s.value() / (double)(v.size() - 1) : 0.0;
}

inline double moment(const std::vector<double>& v, int n) {
  if (v.empty()) throw domain_error("moment: empty sample");
  KahanSum s;
  for (double x : v) s.add(std::pow(x, n));
  return s.value() / (double)v.size();
}

inline double skewness(const std::vector<double>& v) {
  const double m = mean(v);
  KahanSum s2, s3;
  for (double x : v) {
    s2.add(sq(x - m));
    s3.add(sq(x - m) * (x - m));
  }
  const double n = (double)v.size();
  const double sd = std::sqrt(s2.value() / n);
  return sd > 0 ? (s3.value() / n) / (sd * sd * sd) : 0.0;
}

inline double excess_kurtosis(const std::vector<double>& v) {
  const double m = mean(v);
  KahanSum s2, s4;
  for (double x : v) {
    s2.add(sq(x - m));
    s4.add(sq(sq(x - m)));
  }
  const double n = (double)v.size();
  const double var = s2.value() / n;
  return var > 0 ? (s4.value() / n) / sq(var) - 3.0 : 0.0;
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw domain_error("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * (double)(v.size() - 1);
  const size_t lo = (size_t)pos;
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - (double)lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

struct Ci {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

// Percentile bootstrap for an arbitrary statistic of the sample.
inline Ci bootstrap_ci(const std::vector<double>& v,
                       const std::function<double(const std::vector<double>&)>& stat,
                       int resamples, CounterRng& rng, double level = 0.95) {
  if (v.empty()) throw domain_error("bootstrap_ci: empty sample");
  std::vector<double> reps(resamples);
  std::vector<double> scratch(v.size());
  for (int b = 0; b < resamples; ++b) {
    for (size_t i = 0; i < v.size(); ++i) scratch[i] = v[rng.below(v.size())];
    reps[b] = stat(scratch);
  }
  const double a = 0.5 * (1.0 - level);
  return {quantile(reps, a), quantile(reps, 1.0 - a)};
}

// Wilson score interval for a binomial proportion.
inline Ci wilson_ci(long k, long n, double z = 1.959963984540054) {
  if (n <= 0) throw domain_error("wilson_ci: n > 0");
  const double p = (double)k / (double)n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / (double)n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / (double)n + z2 / (4.0 * sq((double)n))) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw domain_error("linear_fit: needs >= 2 points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += sq(x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += sq(y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sq(sxy) / (sxx * syy) : 1.0;
  return f;
}

inline double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw domain_error("correlation: size mismatch");
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += sq(x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += sq(y[i] - my);
  }
  const double den = std::sqrt(sxx * syy);
  return den > 0 ? sxy / den : 0.0;
}

}  // namespace critfield
