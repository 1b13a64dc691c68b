#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "critfield/common.hpp"

namespace critfield {

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  long evals = 0;
  bool converged = false;
};

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1,1].
// Layout: {abscissa, gauss weight (0 if Kronrod-only), kronrod weight}.
inline constexpr double kGk15[8][3] = {
    {0.000000000000000000, 0.417959183673469388, 0.209482141084727828},
    {0.405845151377397167, 0.381830050505118945, 0.190350578064785410},
    {0.741531185599394440, 0.279705391489276668, 0.140653259715525919},
    {0.949107912342758525, 0.129484966168869693, 0.063092092629978553},
    {0.207784955007898468, 0.0,                  0.204432940075298892},
    {0.586087235467691130, 0.0,                  0.169004726639267903},
    {0.864864423359769073, 0.0,                  0.104790010322250184},
    {0.991455371120812639, 0.0,                  0.022935322010529225},
};

template <class F>
inline void gk15(const F& f, double a, double b, double& kron, double& err) {
  const double mid = 0.5 * (a + b);
  const double hl = 0.5 * (b - a);
  const double f0 = f(mid);
  double g7 = kGk15[0][1] * f0;
  double k15 = kGk15[0][2] * f0;
  for (int i = 1; i < 8; ++i) {
    const double dx = hl * kGk15[i][0];
    const double fs = f(mid + dx) + f(mid - dx);
    g7 += kGk15[i][1] * fs;
    k15 += kGk15[i][2] * fs;
  }
  kron = k15 * hl;
  const double diff = std::fabs(k15 - g7) * hl;
  // standard QUADPACK-style error inflation
  err = diff * std::min(1.0, std::pow(200.0 * diff / std::max(std::fabs(kron), 1e-300), 1.5));
  if (!(err > 0)) err = diff;
}

struct Interval {
  double a, b, value, error;
  bool operator<(const Interval& o) const { return error < o.error; }
};

}  // namespace detail

// Adaptive Gauss-Kronrod on [a,b]. Splits the worst interval until the
// global error estimate meets rel_tol (against |value|) or abs_tol.
template <class F>
QuadResult integrate(const F& f, double a, double b, double rel_tol = 1e-8,
                     double abs_tol = 0.0, int max_intervals = 4000) {
  QuadResult res{};
  if (a == b) {
    res.converged = true;
    return res;
  }
  std::priority_queue<detail::Interval> heap;
  double v, e;
  detail::gk15(f, a, b, v, e);
  res.evals += 15;
  heap.push({a, b, v, e});
  double total = v, total_err = e;
  while ((int)heap.size() < max_intervals) {
    if (total_err <= std::max(rel_tol * std::fabs(total), abs_tol)) break;
    detail::Interval worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (m <= worst.a || m >= worst.b) {  // interval exhausted at machine precision
      heap.push(worst);
      break;
    }
    double v1, e1, v2, e2;
    detail::gk15(f, worst.a, m, v1, e1);
    detail::gk15(f, m, worst.b, v2, e2);
    res.evals += 30;
    total += v1 + v2 - worst.value;
    total_err += e1 + e2 - worst.error;
    heap.push({worst.a, m, v1, e1});
    heap.push({m, worst.b, v2, e2});
  }
  res.value = total;
  res.abs_error = total_err;
  res.converged = total_err <= std::max(rel_tol * std::fabs(total), std::max(abs_tol, 1e-300));
  return res;
}

// Adaptive quadrature with an integrable singularity at the left endpoint:
// splits geometrically toward `a` before going adaptive on each piece.
template <class F>
QuadResult integrate_singular_left(const F& f, double a, double b, double rel_tol = 1e-8,
                                   double split_factor = 10.0) {
  if (!(b > a)) throw domain_error("integrate_singular_left: needs b > a");
  std::vector<double> cuts;
  cuts.push_back(b);
  double c = a * split_factor;
  while (c > a && c < b && cuts.size() < 600) {
    cuts.push_back(c);
    c = a + (c - a) / split_factor;
    if (c - a < 1e-3 * a || cuts.size() > 64) break;
  }
  cuts.push_back(a);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  QuadResult total{};
  total.converged = true;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    QuadResult piece = integrate(f, cuts[i], cuts[i + 1], rel_tol);
    total.value += piece.value;
    total.abs_error += piece.abs_error;
    total.evals += piece.evals;
    total.converged = total.converged && piece.converged;
  }
  return total;
}

// Integral over [a, infinity): geometric segments [a*2^k, a*2^{k+1}] until a
// segment contributes below tolerance. Integrand must decay.
template <class F>
QuadResult integrate_to_infinity(const F& f, double a, double rel_tol = 1e-8,
                                 int max_segments = 200) {
  if (!(a > 0)) throw domain_error("integrate_to_infinity: needs a > 0");
  QuadResult total{};
  double lo = a;
  int quiet = 0;
  for (int k = 0; k < max_segments; ++k) {
    const double hi = lo * 2.0;
    QuadResult piece = integrate(f, lo, hi, rel_tol * 0.5);
    total.value += piece.value;
    total.abs_error += piece.abs_error;
    total.evals += piece.evals;
    lo = hi;
    if (std::fabs(piece.value) <= rel_tol * 0.1 * std::fabs(total.value) + 1e-300) {
      if (++quiet >= 3) {  // three negligible octaves in a row: tail spent
        total.converged = true;
        return total;
      }
    } else {
      quiet = 0;
    }
  }
  total.converged = false;
  return total;
}

}  // namespace critfield
