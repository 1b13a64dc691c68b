#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/covering.hpp"
#include "critfield/lattice.hpp"
#include "critfield/parallel.hpp"
#include "critfield/params.hpp"
#include "critfield/quadrature.hpp"
#include "critfield/sojourn.hpp"
#include "critfield/stats.hpp"
#include "critfield/variance.hpp"

namespace critfield {

using Point = std::array<double, 3>;
using CovarianceFn = std::function<double(const Point&, const Point&)>;

// ------------------------- conditional decomposition ------------------------
// X^{(2)}(t) = E[X(t)|X(t_0)] = alpha(t) X(t_0) with
// alpha(t) = R(t,t_0)/R(t_0,t_0); X^{(1)} = X - X^{(2)} is independent of
// X(t_0). rho_0 is halved until 1/2 <= alpha <= 3/2 on the interval I.

struct Decomposition {
  int N = 1;
  Point t0{{0, 0, 0}};
  double rho0 = 0;      // final diameter of I
  double var_t0 = 0;    // R(t0,t0)
  CovarianceFn cov;
  double alpha(const Point& t) const { return cov(t, t0) / var_t0; }
  Region interval() const {
    Region r;
    r.dim = N;
    for (int j = 0; j < N; ++j) {
      r.lo[j] = t0[j] - 0.5 * rho0;
      r.hi[j] = t0[j] + 0.5 * rho0;
    }
    return r;
  }
};

inline Decomposition make_decomposition(const CovarianceFn& cov, int N, const Point& t0,
                                        double rho0, int check_points = 1000,
                                        int max_halvings = 40) {
  double norm_t0 = 0;
  for (int j = 0; j < N; ++j) norm_t0 += sq(t0[j]);
  if (!(norm_t0 > 0)) throw domain_error("make_decomposition: t0 must be nonzero");
  Decomposition dec;
  dec.N = N;
  dec.t0 = t0;
  dec.cov = cov;
  dec.var_t0 = cov(t0, t0);
  if (!(dec.var_t0 > 0)) throw domain_error("make_decomposition: Var X(t0) must be positive");
  for (int h = 0; h <= max_halvings; ++h) {
    bool ok = true;
    // interval must exclude the origin
    for (int j = 0; j < N && ok; ++j) {
      if (t0[j] - 0.5 * rho0 <= 0 && t0[j] + 0.5 * rho0 >= 0) ok = (N > 1);
    }
    if (ok && N == 1 && std::fabs(t0[0]) <= 0.5 * rho0) ok = false;
    if (ok) {
      for (int g = 0; g <= check_points && ok; ++g) {
        Point t = t0;
        t[0] = t0[0] - 0.5 * rho0 + rho0 * (double)g / (double)check_points;
        const double a = cov(t, t0) / dec.var_t0;
        if (!(a >= 0.5 && a <= 1.5)) ok = false;
      }
    }
    if (ok) {
      dec.rho0 = rho0;
      return dec;
    }
    rho0 *= 0.5;
  }
  throw domain_error("make_decomposition: alpha bound unattainable after halvings");
}

// X2(t) = alpha(t) X(t0) per component, X1 = X - X2. t0 must be a site.
inline std::pair<FieldSample, FieldSample> split_field(const FieldSample& field,
                                                       const Decomposition& dec) {
  const auto t0_idx = field.lattice.site_index_of(dec.t0);
  if (!t0_idx) throw domain_error("split_field: t0 is not a lattice site");
  FieldSample x1 = field, x2 = field;
  const int64_t n = field.lattice.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const double a = dec.alpha(field.lattice.site(i));
    for (int j = 0; j < field.components; ++j) {
      x2.value(i, j) = a * field.value(*t0_idx, j);
      x1.value(i, j) = field.value(i, j) - x2.value(i, j);
    }
  }
  return {std::move(x1), std::move(x2)};
}

// X^{(3)}(t) = (z - X^{(1)}(t)) / alpha(t); X(t) = z iff X^{(3)}(t) = X(t0).
inline FieldSample x3_field(const FieldSample& field, const Decomposition& dec,
                            const std::vector<double>& z) {
  if ((int)z.size() != field.components) throw domain_error("x3_field: z dimension mismatch");
  auto [x1, x2] = split_field(field, dec);
  FieldSample x3 = field;
  const int64_t n = field.lattice.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const double a = dec.alpha(field.lattice.site(i));
    for (int j = 0; j < field.components; ++j) {
      x3.value(i, j) = (z[j] - x1.value(i, j)) / a;
    }
  }
  return x3;
}

// max over sites of | |X(t)-z| - alpha(t) |X3(t)-X(t0)| |, the exact identity
// residual; should sit at rounding level.
inline double x3_identity_residual(const FieldSample& field, const FieldSample& x3,
                                   const Decomposition& dec, const std::vector<double>& z) {
  const auto t0_idx = field.lattice.site_index_of(dec.t0);
  if (!t0_idx) throw domain_error("x3_identity_residual: t0 not a site");
  double worst = 0;
  const int64_t n = field.lattice.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const double a = dec.alpha(field.lattice.site(i));
    double lhs = 0, rhs = 0;
    for (int j = 0; j < field.components; ++j) {
      lhs += sq(field.value(i, j) - z[j]);
      rhs += sq(x3.value(i, j) - field.value(*t0_idx, j));
    }
    worst = std::max(worst, std::fabs(std::sqrt(lhs) - a * std::sqrt(rhs)));
  }
  return worst;
}

// ----------------------------- hit probability ------------------------------

struct HitExperiment {
  std::vector<double> z;
  std::vector<double> deltas;  // decreasing
  int replications = 0;
  FieldParams params;
};

struct HitRow {
  double delta = 0;
  double prob = 0;
  Ci ci;
};

struct HitReport {
  std::vector<HitRow> rows;
  bool monotone = true;       // nonincreasing in delta, exact on shared paths
  double final_prob = 0;      // at the smallest delta
  double plateau_range = 0;   // max/min probability across the ladder
};

// Empirical P{ min over net of |X(t)-z| <= delta } per delta on shared paths.
inline HitReport hit_probability(const FieldGen& gen, const Lattice& net,
                                 const HitExperiment& ex, uint64_t seed) {
  if (ex.deltas.empty() || ex.replications < 1) throw domain_error("hit_probability: empty setup");
  for (size_t i = 1; i < ex.deltas.size(); ++i) {
    if (!(ex.deltas[i] < ex.deltas[i - 1])) {
      throw domain_error("hit_probability: deltas must decrease");
    }
  }
  const double dmin = ex.deltas.back();
  if (net.spacing > sigma_star(dmin, ex.params) / 4.0 * (1.0 + 1e-9)) {
    throw domain_error("hit_probability: net resolution rule h <= sigma*(delta_min)/4 violated");
  }
  std::vector<double> min_dist(ex.replications);
  parallel_for(ex.replications, [&](int64_t r) {
    const FieldSample f = gen(net, hash_combine(seed, (uint64_t)r));
    double best = HUGE_VAL;
    const int64_t n = net.site_count();
    for (int64_t i = 0; i < n; ++i) {
      double s = 0;
      for (int j = 0; j < f.components; ++j) s += sq(f.value(i, j) - ex.z[j]);
      best = std::min(best, s);
    }
    min_dist[r] = std::sqrt(best);
  });
  HitReport rep;
  double prev = 1.0;
  double pmax = 0, pmin = 1;
  for (double delta : ex.deltas) {
    long k = 0;
    for (double m : min_dist) {
      if (m <= delta) ++k;
    }
    HitRow row;
    row.delta = delta;
    row.prob = (double)k / (double)ex.replications;
    row.ci = wilson_ci(k, ex.replications);
    if (row.prob > prev + 1e-15) rep.monotone = false;
    prev = row.prob;
    pmax = std::max(pmax, row.prob);
    pmin = std::min(pmin, row.prob);
    rep.rows.push_back(row);
  }
  rep.final_prob = rep.rows.back().prob;
  rep.plateau_range = pmin > 0 ? pmax / pmin : HUGE_VAL;
  return rep;
}

// ----------------------------- mu_n measures --------------------------------
// mu_n(A) = Int_A (2 pi n)^{d/2} exp(-n |X(t)-z|^2 / 2) dt on the lattice.

inline double mu_n_measure(const FieldSample& field, const std::vector<double>& z,
                           const Region& I, double n) {
  const Lattice& lat = field.lattice;
  if ((int)z.size() != field.components) throw domain_error("mu_n_measure: z dim mismatch");
  for (int j = 0; j < lat.dim; ++j) {
    if (I.lo[j] < lat.lo[j] - 1e-12 || I.hi[j] > lat.hi[j] + 1e-12) {
      throw domain_error("mu_n_measure: field does not cover I");
    }
  }
  const double amp = std::pow(2.0 * M_PI * n, 0.5 * field.components);
  KahanSum s;
  const int64_t m = lat.site_count();
  for (int64_t i = 0; i < m; ++i) {
    if (!I.contains(lat.site(i))) continue;
    double d2 = 0;
    for (int j = 0; j < field.components; ++j) d2 += sq(field.value(i, j) - z[j]);
    s.add(amp * std::exp(-0.5 * n * d2));
  }
  return s.value() * lat.cell_volume();
}

// Analytic lower bound for E[mu_n(I)] on a 1-d interval away from 0:
// Int_I (2 pi / (1 + c1 sigma^2(|t|)))^{d/2} exp(-|z|^2/(2 c2 sigma^2(|t|))) dt.
inline double mu_n_mean_lower_bound(const FieldParams& p, double a, double b, double z_norm,
                                    double c1_hat, double c2_hat) {
  if (!(a > 0 && b > a)) throw domain_error("mu_n_mean_lower_bound: interval must avoid 0");
  const auto f = [&](double t) {
    const double s2 = sq(sigma(t, p));
    return std::pow(2.0 * M_PI / (1.0 + c1_hat * s2), 0.5 * p.d) *
           std::exp(-sq(z_norm) / (2.0 * c2_hat * s2));
  };
  QuadResult q = integrate(f, a, b, 1e-8);
  if (!q.converged) throw numerical_error("mu_n_mean_lower_bound: quadrature failed");
  return q.value;
}

// ------------------- second moment bound for mu_n ---------------------------
// E[(mu_n(I))^2] <= prefactor * Int_I Int_I sigma^{-d}(|t-s|) dt ds, with
// prefactor (2 pi)^d / ((c2 C0^2)^{d/2} c2^{d/2}), C0 = inf_I sigma(|t|).
// The divergence flag is the analytic classifier, never the quadrature.

struct SecondMomentBound {
  double value = 0;        // meaningful when !diverges
  bool diverges = false;
  double prefactor = 0;
  double double_integral = 0;
};

inline double box_difference_integral_1d(const FieldParams& p, double length,
                                         double rel_tol = 1e-7) {
  // 2 Int_0^L (L - u) sigma^{-d}(u) du with geometric splits toward 0
  const auto f = [&](double u) { return 2.0 * (length - u) / std::pow(sigma(u, p), p.d); };
  KahanSum acc;
  double hi = length;
  double total_guess = 0;
  for (int k = 0; k < 2000; ++k) {
    const double lo = hi * 0.5;
    QuadResult piece = integrate(f, lo, hi, rel_tol * 0.25);
    acc.add(piece.value);
    total_guess = acc.value();
    hi = lo;
    if (piece.value < rel_tol * 0.25 * total_guess && k > 20) break;
    if (hi < 1e-280) break;
  }
  return total_guess;
}

inline SecondMomentBound mu_n_second_moment_bound(const FieldParams& p, double a, double b,
                                                  double c2_hat = 1.0) {
  if (!(a > 0 && b > a)) throw domain_error("mu_n_second_moment_bound: I must avoid 0");
  SecondMomentBound out;
  out.diverges = classify_polarity(p).integral_diverges;
  double c0 = HUGE_VAL;
  for (int g = 0; g <= 1000; ++g) {
    const double t = a + (b - a) * (double)g / 1000.0;
    c0 = std::min(c0, sigma(t, p));
  }
  out.prefactor = std::pow(2.0 * M_PI, p.d) /
                  (std::pow(c2_hat * sq(c0), 0.5 * p.d) * std::pow(c2_hat, 0.5 * p.d));
  if (out.diverges) {
    out.value = HUGE_VAL;
    return out;
  }
  try {
    out.double_integral = box_difference_integral_1d(p, b - a);
  } catch (const numerical_error&) {
    out.double_integral = box_difference_integral_1d(p, b - a, 1e-5);  // diagonal retry
  }
  out.value = out.prefactor * out.double_integral;
  return out;
}

// ----------------------- weak limit witness ---------------------------------
// Per-path boundedness along the n ladder against the Paley-Zygmund floor
// C1^2/(8 C2): the fraction of paths with inf_n mu_n(I) >= C1/2 should not
// fall below the floor (within Monte Carlo noise).

struct WeakLimitWitness {
  double fraction = 0;       // paths with inf_n mu_n >= C1/2
  double floor = 0;          // C1^2 / (8 C2)
  double fraction_se = 0;
  bool ok = false;
  std::vector<double> median_by_n;
};

inline WeakLimitWitness weak_limit_witness(const std::vector<std::vector<double>>& mu_paths,
                                           double C1_bar, double C2_bar) {
  if (mu_paths.empty() || mu_paths.front().size() < 4) {
    throw domain_error("weak_limit_witness: ladder too short (needs >= 4 values)");
  }
  WeakLimitWitness out;
  long good = 0;
  for (const auto& path : mu_paths) {
    double inf = HUGE_VAL;
    for (double v : path) inf = std::min(inf, v);
    if (inf >= 0.5 * C1_bar) ++good;
  }
  out.fraction = (double)good / (double)mu_paths.size();
  out.floor = sq(C1_bar) / (8.0 * C2_bar);
  out.fraction_se = std::sqrt(out.fraction * (1.0 - out.fraction) / (double)mu_paths.size());
  out.ok = out.fraction >= out.floor - 3.0 * out.fraction_se;
  const size_t ladder = mu_paths.front().size();
  for (size_t k = 0; k < ladder; ++k) {
    std::vector<double> col;
    col.reserve(mu_paths.size());
    for (const auto& path : mu_paths) col.push_back(path[k]);
    out.median_by_n.push_back(median(col));
  }
  return out;
}

}  // namespace critfield
