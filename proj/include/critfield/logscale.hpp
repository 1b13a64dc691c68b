#pragma once

#include <cmath>
#include <limits>

#include "critfield/common.hpp"

namespace critfield {

// A radius r in (0,1) represented by lambda = log(1/r).
//
// Scales like 2^{-2^{2^p}} underflow every floating format, so radii that
// small only ever exist in this form. lambda is kept in long double: the
// ladder sweeps need lambda up to e^1700, past the double range.
// Conversion back to a radius is allowed only for lambda <= 700.
class LogScale {
 public:
  static constexpr double kMaxDirectLambda = 700.0;

  static LogScale from_lambda(long double lambda) {
    if (!(lambda > 0.0L) || !std::isfinite(lambda)) {
      throw domain_error("LogScale: lambda must be finite and positive");
    }
    return LogScale(lambda);
  }

  static LogScale from_radius(double r) {
    if (!(r > 0.0) || !(r < 1.0)) {
      throw domain_error("LogScale: radius must lie in (0,1)");
    }
    return LogScale(-std::log((long double)r));
  }

  long double lambda() const { return lambda_; }

  // log r, always available.
  long double log_radius() const { return -lambda_; }

  bool directly_representable() const { return lambda_ <= (long double)kMaxDirectLambda; }

  double radius() const {
    if (!directly_representable()) {
      throw domain_error("LogScale: radius conversion needs lambda <= 700");
    }
    return (double)std::exp(-(double)lambda_);
  }

 private:
  explicit LogScale(long double lambda) : lambda_(lambda) {}
  long double lambda_;
};

}  // namespace critfield
