#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/lattice.hpp"
#include "critfield/parallel.hpp"
#include "critfield/params.hpp"
#include "critfield/quadrature.hpp"
#include "critfield/rng.hpp"
#include "critfield/special.hpp"
#include "critfield/spectral.hpp"
#include "critfield/stats.hpp"
#include "critfield/variance.hpp"

namespace critfield {

// Replication source: produces one field sample on the lattice per seed.
using FieldGen = std::function<FieldSample(const Lattice&, uint64_t)>;

inline FieldGen fbm_generator(double H, int components, double kappa = 1.0) {
  return [H, components, kappa](const Lattice& lat, uint64_t seed) {
    return FbmOracle1d(lat, H, kappa).sample(seed, components);
  };
}

inline FieldGen spectral_generator(std::shared_ptr<const SpectralModel> model,
                                   std::optional<std::pair<double, double>> band = std::nullopt) {
  return [model, band](const Lattice& lat, uint64_t seed) {
    return synthesize(lat, *model, seed, band);
  };
}

// Sojourn configuration: lattice covering the ball |t| <= eps^beta at the
// resolution h <= sigma*(eps)/8 (the sojourn set lives at scale sigma*(eps)).
struct SojournConfig {
  FieldParams params;
  double eps = 0;
  double beta = 0;
  Lattice lattice;
  int replications = 0;
};

inline SojournConfig make_sojourn_config(const FieldParams& p, double eps, double beta,
                                         int replications, double resolution_divisor = 8.0) {
  if (!(eps > 0 && eps < 1)) throw domain_error("sojourn: eps in (0,1)");
  if (!(beta > 1.0 && beta < 1.0 / p.H)) throw domain_error("sojourn: beta must lie in (1, 1/H)");
  if (replications < 1) throw domain_error("sojourn: replications >= 1");
  const double radius = std::pow(eps, beta);
  const double h_max = sigma_star(eps, p) / resolution_divisor;
  // snap spacing so it divides the covering radius exactly
  const int64_t half = (int64_t)std::ceil(radius / h_max);
  const double h = radius / (double)half;
  SojournConfig cfg;
  cfg.params = p;
  cfg.eps = eps;
  cfg.beta = beta;
  cfg.replications = replications;
  std::array<double, 3> lo{{0, 0, 0}}, hi{{0, 0, 0}};
  for (int j = 0; j < p.N; ++j) {
    lo[j] = -radius;
    hi[j] = radius;
  }
  cfg.lattice = Lattice::box(p.N, lo, hi, h);
  return cfg;
}

// T_eps = (cell volume) * #{sites : |t| <= eps^beta, |X(t)| <= eps}.
inline double sojourn_time(const FieldSample& field, const FieldParams& p, double eps,
                           double beta) {
  if (!(eps > 0 && eps < 1)) throw domain_error("sojourn_time: eps in (0,1)");
  const double radius = std::pow(eps, beta);
  const Lattice& lat = field.lattice;
  if (lat.dim != p.N) throw domain_error("sojourn_time: lattice dim != N");
  for (int j = 0; j < lat.dim; ++j) {
    if (lat.lo[j] > -radius + 1e-12 || lat.hi[j] < radius - 1e-12) {
      throw domain_error("sojourn_time: lattice does not cover B(0, eps^beta)");
    }
  }
  if (lat.spacing > sigma_star(eps, p) / 8.0 * (1.0 + 1e-9)) {
    throw domain_error("sojourn_time: resolution rule h <= sigma*(eps)/8 violated");
  }
  const double r2 = sq(radius);
  const double e2 = sq(eps);
  int64_t count = 0;
  const int64_t n = lat.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const auto t = lat.site(i);
    double tn = 0;
    for (int j = 0; j < lat.dim; ++j) tn += sq(t[j]);
    if (tn > r2) continue;
    double xn = 0;
    for (int j = 0; j < field.components; ++j) xn += sq(field.value(i, j));
    if (xn <= e2) ++count;
  }
  return (double)count * lat.cell_volume();
}

// ------------------------------- moments ----------------------------------

struct MomentRow {
  double eps = 0;
  int n = 0;
  double moment = 0;
  Ci ci;
  double normalized = 0;  // (E[T^n])^{1/n} / (n eps^d Psi(eps))
  bool inconclusive = false;
};

struct SojournStats {
  std::vector<MomentRow> rows;
  std::vector<std::vector<double>> t_values;  // per eps
  double C1_hat = 0;                          // max normalized over the grid
  double C3_hat = 0;                          // min normalized over the grid
  bool pass = false;
  bool any_inconclusive = false;
};

inline std::vector<double> sojourn_replications(const FieldGen& gen, const SojournConfig& cfg,
                                                uint64_t seed) {
  std::vector<double> t(cfg.replications);
  parallel_for(cfg.replications, [&](int64_t r) {
    const FieldSample f = gen(cfg.lattice, hash_combine(seed, (uint64_t)r));
    t[r] = sojourn_time(f, cfg.params, cfg.eps, cfg.beta);
  });
  return t;
}

inline SojournStats mc_moments(const FieldGen& gen, const FieldParams& p,
                               const std::vector<double>& eps_grid, double beta, int n_max,
                               int replications, uint64_t seed, int bootstrap_resamples = 1000) {
  if (n_max < 1 || n_max > 4) throw domain_error("mc_moments: n_max must be 1..4 at desk scale");
  if (!p.critical() || p.gamma_case() == FieldParams::GammaCase::Above) {
    throw domain_error("mc_moments: needs the critical regime d=N/H with gamma <= 1/d");
  }
  SojournStats stats;
  std::vector<double> spreads;
  for (size_t ei = 0; ei < eps_grid.size(); ++ei) {
    const double eps = eps_grid[ei];
    SojournConfig cfg = make_sojourn_config(p, eps, beta, replications);
    std::vector<double> t = sojourn_replications(gen, cfg, hash_combine(seed, ei));
    const double psi_eps = psi(eps, p);
    const double scale = std::pow(eps, p.d) * psi_eps;
    double mmax = 0, mmin = 0;
    for (int n = 1; n <= n_max; ++n) {
      MomentRow row;
      row.eps = eps;
      row.n = n;
      row.moment = moment(t, n);
      CounterRng rng = make_stream(seed, 0xB007u, ei, (uint64_t)n);
      row.ci = bootstrap_ci(t, [n](const std::vector<double>& v) { return moment(v, n); },
                            bootstrap_resamples, rng);
      row.inconclusive = row.ci.width() > 0.3 * std::fabs(row.moment);
      row.normalized = std::pow(row.moment, 1.0 / n) / ((double)n * scale);
      stats.any_inconclusive = stats.any_inconclusive || row.inconclusive;
      stats.rows.push_back(row);
      if (n == 1) {
        mmax = mmin = row.normalized;
      } else {
        mmax = std::max(mmax, row.normalized);
        mmin = std::min(mmin, row.normalized);
      }
    }
    spreads.push_back(mmax / mmin);
    stats.t_values.push_back(std::move(t));
  }
  double c1 = 0, c3 = HUGE_VAL;
  for (const auto& r : stats.rows) {
    c1 = std::max(c1, r.normalized);
    c3 = std::min(c3, r.normalized);
  }
  stats.C1_hat = c1;
  stats.C3_hat = c3;
  bool spread_stable = true;
  for (size_t i = 0; i + 1 < spreads.size(); ++i) {
    const double ratio = spreads[i + 1] / spreads[i];
    if (ratio > 2.0 || ratio < 0.5) spread_stable = false;
  }
  stats.pass = c3 > 0 && c1 >= c3 && std::isfinite(c1) && spread_stable;
  return stats;
}

// ------------------------------- tail law ---------------------------------

struct TailRow {
  double u = 0;
  double prob = 0;
  Ci ci;
  long exceedances = 0;
};

struct TailReport {
  std::vector<TailRow> rows;      // possibly truncated at sparse u
  double K1_hat = 0;              // from the log-linear fit
  double intercept = 0;
  double r2 = 0;
  bool pass = false;
  std::vector<double> t_values;
  bool window_warning = false;    // u grid outside the proven validity window
};

inline TailReport tail_probability(const FieldGen& gen, const FieldParams& p, double eps,
                                   double beta, std::vector<double> u_grid, int replications,
                                   uint64_t seed) {
  SojournConfig cfg = make_sojourn_config(p, eps, beta, replications);
  TailReport rep;
  rep.t_values = sojourn_replications(gen, cfg, seed);
  // proven window is u <= K2 logloglog(1/eps); unreachable at desk scale
  const double lam = -std::log(eps);
  rep.window_warning = !(lam > std::exp(std::exp(1.0)));
  const double scale = std::pow(eps, p.d) * psi(eps, p);
  std::sort(u_grid.begin(), u_grid.end());
  for (double u : u_grid) {
    long k = 0;
    for (double t : rep.t_values) {
      if (t >= u * scale) ++k;
    }
    if (k < 5) break;  // truncate the grid where exceedances run out
    TailRow row;
    row.u = u;
    row.exceedances = k;
    row.prob = (double)k / (double)replications;
    row.ci = wilson_ci(k, replications);
    rep.rows.push_back(row);
  }
  if (rep.rows.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& r : rep.rows) {
      xs.push_back(r.u);
      ys.push_back(std::log(r.prob));
    }
    LinearFit fit = linear_fit(xs, ys);
    rep.K1_hat = -fit.slope;
    rep.intercept = fit.intercept;
    rep.r2 = fit.r2;
    bool points_ok = true;
    for (const auto& r : rep.rows) {
      const double rel_ci = (r.prob - r.ci.lo) / std::max(r.prob, 1e-300);
      if (r.prob < 0.25 * std::exp(-rep.K1_hat * r.u) * (1.0 - rel_ci)) points_ok = false;
    }
    rep.pass = rep.r2 >= 0.9 && points_ok;
  }
  return rep;
}

// ---------------------------- Paley-Zygmund --------------------------------

struct PzCheck {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

inline PzCheck paley_zygmund_check(const std::vector<double>& samples, double theta) {
  if (samples.empty()) throw domain_error("paley_zygmund_check: empty sample");
  if (!(theta >= 0 && theta <= 1)) throw domain_error("paley_zygmund_check: theta in [0,1]");
  for (double s : samples) {
    if (s < 0) throw domain_error("paley_zygmund_check: negative sample");
  }
  const double m1 = mean(samples);
  const double m2 = moment(samples, 2);
  long k = 0;
  for (double s : samples) {
    if (s >= theta * m1) ++k;
  }
  PzCheck out;
  out.lhs = (double)k / (double)samples.size();
  out.rhs = m2 > 0 ? sq(1.0 - theta) * sq(m1) / m2 : 0.0;
  out.holds = out.lhs >= out.rhs;
  return out;
}

// --------------------------- first moment oracle ---------------------------
// E[T_eps] = Int_{|t| <= eps^beta} P{ |Z| sqrt(v(|t|)) <= eps } dt with Z a
// standard d-dim Gaussian; computed by radial quadrature, independent of the
// Monte Carlo path.

inline double first_moment_oracle(const FieldParams& p, double eps, double beta,
                                  const std::function<double(double)>& marginal_variance,
                                  double rel_tol = 1e-6) {
  if (!(eps > 0 && eps < 1)) throw domain_error("first_moment_oracle: eps in (0,1)");
  const double radius = std::pow(eps, beta);
  const double surface = p.N == 1 ? 2.0 : (p.N == 2 ? 2.0 * M_PI : 4.0 * M_PI);
  const auto integrand = [&](double rho) {
    const double v = marginal_variance(rho);
    const double prob = v <= 0 ? 1.0 : chi2_cdf(p.d, sq(eps) / v);
    return prob * std::pow(rho, p.N - 1);
  };
  QuadResult q = integrate(integrand, 0.0, radius, rel_tol);
  if (!q.converged) throw numerical_error("first_moment_oracle: quadrature failed");
  return surface * q.value;
}

}  // namespace critfield
