#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace critfield {

inline constexpr const char* kVersion = "0.1.0";

// Thrown when an argument leaves the mathematical domain of an operation
// (bad radius, violated precondition, malformed config).
class domain_error : public std::runtime_error {
 public:
  explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a numerical procedure fails to reach its tolerance
// (quadrature non-convergence, singular factorization).
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

inline double sq(double x) { return x * x; }

// shortest-round-trip decimal form, locale independent
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Compensated (Kahan) accumulator; fixed add order gives reproducible sums.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace critfield
