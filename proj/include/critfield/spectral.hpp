#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/lattice.hpp"
#include "critfield/params.hpp"
#include "critfield/parallel.hpp"
#include "critfield/quadrature.hpp"
#include "critfield/rng.hpp"
#include "critfield/variance.hpp"

namespace critfield {

// One half-space spectral cell; the mirror cell is implied by conjugate
// symmetry W(-A) = conj(W(A)) and accounted for in the synthesis weights.
struct SpectralCell {
  double xi_lo, xi_hi;  // radial band
  double xi_mid;
  double dirx, diry;    // unit direction (N=2); (1,0) for N=1
  double measure1;      // integral of h over the cell at c_norm = 1
};

// Spectral model with density h(xi) = c_norm |xi|^{-2H-N} (log(e+|xi|))^{2 gamma}.
// The density form is a concrete choice validated empirically through the
// variogram; c_norm is calibrated so the grid variogram matches sigma^2 at
// the reference lag extent/64.
//
// The radial grid is geometric from 0.5*(2 pi / extent) to pi / spacing with
// a fixed number of cells per octave, so field energy across all resolved
// octaves is represented without aliasing the low frequencies.
class SpectralModel {
 public:
  SpectralModel(const FieldParams& params, double extent, double spacing,
                int cells_per_octave = 64, int angular_sectors = 16,
                double reference_lag = 0.0)
      : params_(params), extent_(extent), spacing_(spacing) {
    if (params.N > 2) throw domain_error("SpectralModel: N <= 2 supported");
    if (!(extent > 0) || !(spacing > 0) || spacing > extent) {
      throw domain_error("SpectralModel: needs 0 < spacing <= extent");
    }
    xi_min_ = 0.5 * (2.0 * M_PI / extent);
    xi_max_ = M_PI / spacing;
    ref_lag_ = reference_lag > 0.0 ? reference_lag : extent / 64.0;
    build_grid(cells_per_octave, angular_sectors);
    calibrate();
    description_ = "h(xi)=c|xi|^{-2H-N} log(e+|xi|)^{2g}, N=" + std::to_string(params.N) +
                   " H=" + format_double(params.H) + " gamma=" + format_double(params.gamma);
  }

  const FieldParams& params() const { return params_; }
  double c_norm() const { return c_norm_; }
  double xi_min() const { return xi_min_; }
  double xi_max() const { return xi_max_; }
  double extent() const { return extent_; }
  double reference_lag() const { return ref_lag_; }
  const std::vector<SpectralCell>& cells() const { return cells_; }
  const std::string& description() const { return description_; }

  double density_exponent() const { return 2.0 * params_.H + params_.N; }
  double log_exponent() const { return 2.0 * params_.gamma; }

  // density with calibration applied
  double density(double xi) const { return c_norm_ * density1(xi); }

  // Exact variogram of the synthesized (grid) field at lag vector u:
  // sum over cells of 4 m_k (1 - cos(u . xi_k)).
  double grid_variogram(const std::array<double, 3>& lag) const {
    KahanSum s;
    for (const auto& c : cells_) {
      const double phase = c.xi_mid * (c.dirx * lag[0] + c.diry * lag[1]);
      s.add(4.0 * c.measure1 * (1.0 - std::cos(phase)));
    }
    return c_norm_ * s.value();
  }
  double grid_variogram(double lag) const { return grid_variogram({lag, 0, 0}); }

  // Continuum variogram v(u) = E[(X_1(t+u)-X_1(t))^2] by quadrature of the
  // spectral integral; cached per lag. gamma = 0 scales exactly as u^{2H}.
  double continuum_variogram(double u) const {
    u = std::fabs(u);
    if (u == 0.0) return 0.0;
    if (params_.gamma == 0.0) {
      ensure_kappa();
      return c_norm_ * kappa_ * std::pow(u, 2.0 * params_.H);
    }
    {
      std::lock_guard<std::mutex> g(cache_mutex_);
      auto it = vcache_.find(u);
      if (it != vcache_.end()) return it->second;
    }
    const double v = c_norm_ * variogram_quadrature(u);
    std::lock_guard<std::mutex> g(cache_mutex_);
    vcache_[u] = v;
    return v;
  }

  // R(s,t) by polarization of the variogram: R = (v(|s|)+v(|t|)-v(|s-t|))/2.
  double covariance(const std::array<double, 3>& s, const std::array<double, 3>& t) const {
    const double ns = norm(s), nt = norm(t);
    const double nst = norm({s[0] - t[0], s[1] - t[1], s[2] - t[2]});
    return 0.5 * (continuum_variogram(ns) + continuum_variogram(nt) - continuum_variogram(nst));
  }
  double covariance(double s, double t) const { return covariance({s, 0, 0}, {t, 0, 0}); }

 private:
  static double norm(const std::array<double, 3>& v) {
    return std::sqrt(sq(v[0]) + sq(v[1]) + sq(v[2]));
  }

  double density1(double xi) const {
    return std::pow(xi, -2.0 * params_.H - params_.N) *
           std::pow(std::log(M_E + xi), 2.0 * params_.gamma);
  }

  void build_grid(int cells_per_octave, int angular_sectors) {
    const double ratio = std::pow(2.0, 1.0 / cells_per_octave);
    std::vector<std::pair<double, double>> radial;
    for (double lo = xi_min_; lo < xi_max_;) {
      double hi = std::min(lo * ratio, xi_max_);
      radial.push_back({lo, hi});
      lo = hi;
    }
    const int nang = params_.N == 1 ? 1 : angular_sectors;
    cells_.reserve(radial.size() * nang);
    for (const auto& [lo, hi] : radial) {
      // radial integral of h (at c_norm=1) against the N-dim volume element
      const auto integrand = [&](double x) {
        return params_.N == 1 ? density1(x) : density1(x) * x;
      };
      const double rad_int = integrate(integrand, lo, hi, 1e-10).value;
      const double mid = std::sqrt(lo * hi);
      for (int a = 0; a < nang; ++a) {
        SpectralCell c;
        c.xi_lo = lo;
        c.xi_hi = hi;
        c.xi_mid = mid;
        if (params_.N == 1) {
          c.dirx = 1.0;
          c.diry = 0.0;
          c.measure1 = rad_int;  // one half-line cell; mirror handled in weights
        } else {
          const double theta = M_PI * ((double)a + 0.5) / (double)nang;
          c.dirx = std::cos(theta);
          c.diry = std::sin(theta);
          c.measure1 = rad_int * (M_PI / (double)nang);  // half-plane sector
        }
        cells_.push_back(c);
      }
    }
  }

  void calibrate() {
    c_norm_ = 1.0;
    const double ref = reference_lag();
    const double v1 = grid_variogram(ref);
    if (!(v1 > 0)) throw numerical_error("SpectralModel: degenerate grid variogram");
    c_norm_ = sq(sigma(ref, params_)) / v1;
  }

  void ensure_kappa() const {
    std::lock_guard<std::mutex> g(cache_mutex_);
    if (kappa_ready_) return;
    kappa_ = variogram_quadrature(1.0);
    kappa_ready_ = true;
  }

  // v(u) over the full continuum spectrum, nonnegative integrand chunked by
  // oscillation period; the far tail is bounded via h alone.
  double variogram_quadrature(double u) const {
    const double tol = 1e-7;
    const int N = params_.N;
    const auto osc = [&](double xi) {
      if (N == 1) return 4.0 * (1.0 - std::cos(u * xi)) * density1(xi);
      return 4.0 * M_PI * (1.0 - std::cyl_bessel_j(0.0, u * xi)) * density1(xi) * xi;
    };
    KahanSum acc;
    double lo = 0.0;
    const double period = 2.0 * M_PI / u;
    // smooth head through the first stationary region
    double hi = std::min(period, 1.0 / u);
    acc.add(integrate([&](double x) { return osc(x); }, 1e-300, hi, 1e-9).value);
    lo = hi;
    // period-sized chunks until the residual h-tail is negligible
    for (int k = 0; k < 100000; ++k) {
      hi = lo + period;
      acc.add(integrate(osc, lo, hi, 1e-9).value);
      lo = hi;
      // residual bound: |int_{lo}^inf osc| <= envelope * int_{lo}^inf h terms
      const double env = N == 1 ? 2.0 * density1(lo) / u      // by parts, h monotone
                                : 8.0 * density1(lo) * lo;    // crude J0 envelope
      if (env < tol * std::fabs(acc.value()) || k > 4096) {
        // add the mean-value remainder estimate: int (1-cos) h ~ int h
        const auto tail_h = [&](double x) {
          return N == 1 ? 4.0 * density1(x) : 4.0 * M_PI * density1(x) * x;
        };
        acc.add(integrate_to_infinity(tail_h, lo, 1e-8).value);
        break;
      }
    }
    return acc.value();
  }

  FieldParams params_;
  double extent_, spacing_, xi_min_, xi_max_, ref_lag_ = 0.0;
  double c_norm_ = 1.0;
  std::vector<SpectralCell> cells_;
  std::string description_;
  mutable std::mutex cache_mutex_;
  mutable std::map<double, double> vcache_;
  mutable double kappa_ = 0.0;
  mutable bool kappa_ready_ = false;
};

// ---------------------------------------------------------------------------
// Synthesis. Per cell k and component j the complex Gaussian weight is a
// (U,V) pair drawn from the stream keyed (seed, global cell index, j); the
// keying is band-independent, so sub-band syntheses of the same seed reuse
// identical draws and X(0,b) = X(0,a) + X(a,b) holds sample-wise, while
// disjoint bands use disjoint streams and are independent.
// ---------------------------------------------------------------------------

inline FieldSample synthesize(const Lattice& lattice, const SpectralModel& model, uint64_t seed,
                              std::optional<std::pair<double, double>> band = std::nullopt) {
  if (lattice.dim != model.params().N) throw domain_error("synthesize: lattice dim != N");
  if (model.params().d > 8) throw domain_error("synthesize: d <= 8 supported");
  if (band) {
    if (!(band->first >= 0) || !(band->second > band->first)) {
      throw domain_error("synthesize: invalid band, needs 0 <= a < b");
    }
  }
  const auto& cells = model.cells();
  const int d = model.params().d;
  // precompute per-cell weights and draws, in global cell order
  std::vector<double> amp(cells.size());
  std::vector<char> in_band(cells.size());
  for (size_t k = 0; k < cells.size(); ++k) {
    const bool in = !band || (cells[k].xi_mid >= band->first && cells[k].xi_mid < band->second);
    in_band[k] = in ? 1 : 0;
    amp[k] = in ? std::sqrt(2.0 * model.c_norm() * cells[k].measure1) : 0.0;
  }
  std::vector<std::pair<double, double>> draws((size_t)cells.size() * d);
  for (size_t k = 0; k < cells.size(); ++k) {
    for (int j = 0; j < d; ++j) {
      if (!in_band[k]) {
        draws[k * d + j] = {0.0, 0.0};
        continue;
      }
      CounterRng rng = make_stream(seed, (uint64_t)k, (uint64_t)j, 0x5EC7u);
      draws[k * d + j] = rng.normal_pair();
    }
  }
  FieldSample fs;
  fs.lattice = lattice;
  fs.components = d;
  fs.seed = seed;
  fs.band = band;
  const int64_t n = lattice.site_count();
  fs.values.assign((size_t)n * d, 0.0);
  parallel_for(n, [&](int64_t i) {
    const auto t = lattice.site(i);
    KahanSum acc[8];
    const int dd = std::min(d, 8);
    for (size_t k = 0; k < cells.size(); ++k) {
      if (!in_band[k]) continue;
      const double phase = cells[k].xi_mid * (cells[k].dirx * t[0] + cells[k].diry * t[1]);
      const double cm1 = std::cos(phase) - 1.0;
      const double sn = std::sin(phase);
      for (int j = 0; j < dd; ++j) {
        const auto& [gu, gv] = draws[k * d + j];
        acc[j].add(amp[k] * (cm1 * gu - sn * gv));
      }
    }
    for (int j = 0; j < dd; ++j) fs.value(i, j) = acc[j].value();
  });
  return fs;
}

// ---------------------------------------------------------------------------
// Exact fractional Brownian oracle on a 1-d lattice (gamma = 0 ground truth):
// covariance factorization for general H, cumulative i.i.d. increments for
// H = 1/2. Caches the Cholesky factor for replication reuse.
// ---------------------------------------------------------------------------

class FbmOracle1d {
 public:
  FbmOracle1d(const Lattice& lattice, double H, double kappa = 1.0)
      : lattice_(lattice), H_(H), kappa_(kappa) {
    if (lattice.dim != 1) throw domain_error("FbmOracle1d: N=1 only");
    if (!(H > 0 && H < 1)) throw domain_error("FbmOracle1d: H in (0,1)");
    const int64_t n = lattice.site_count();
    if (n > (int64_t)1 << 14) throw domain_error("FbmOracle1d: > 2^14 sites");
    for (int64_t i = 0; i < n; ++i) {
      const double t = lattice.site(i)[0];
      if (std::fabs(t) < 0.5 * lattice.spacing) {
        origin_ = i;
      } else {
        free_sites_.push_back(i);
      }
    }
    if (H_ == 0.5) return;  // increment path needs no factor
    const int m = (int)free_sites_.size();
    Eigen::MatrixXd cov(m, m);
    for (int a = 0; a < m; ++a) {
      const double s = lattice.site(free_sites_[a])[0];
      for (int b = 0; b <= a; ++b) {
        const double t = lattice.site(free_sites_[b])[0];
        const double r = 0.5 * kappa_ *
                         (std::pow(std::fabs(s), 2 * H_) + std::pow(std::fabs(t), 2 * H_) -
                          std::pow(std::fabs(s - t), 2 * H_));
        cov(a, b) = r;
        cov(b, a) = r;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      cov.diagonal().array() += 1e-12 * cov.diagonal().maxCoeff();
      llt.compute(cov);
      if (llt.info() != Eigen::Success) {
        throw numerical_error("FbmOracle1d: covariance factorization failed");
      }
    }
    factor_ = llt.matrixL();
  }

  FieldSample sample(uint64_t seed, int components = 1) const {
    FieldSample fs;
    fs.lattice = lattice_;
    fs.components = components;
    fs.seed = seed;
    const int64_t n = lattice_.site_count();
    fs.values.assign((size_t)n * components, 0.0);
    for (int j = 0; j < components; ++j) {
      CounterRng rng = make_stream(seed, (uint64_t)j, 0, 0xFB17u);
      if (H_ == 0.5) {
        sample_bm_component(fs, j, rng);
      } else {
        const int m = (int)free_sites_.size();
        Eigen::VectorXd z(m);
        for (int a = 0; a < m; ++a) z(a) = rng.normal();
        Eigen::VectorXd x = factor_ * z;
        for (int a = 0; a < m; ++a) fs.value(free_sites_[a], j) = x(a);
      }
    }
    return fs;
  }

 private:
  // Two-sided Brownian path: independent cumulative increments outward from
  // the origin. 1-d lattice sites are ascending in index, so no sort.
  void sample_bm_component(FieldSample& fs, int j, CounterRng& rng) const {
    const int64_t n = lattice_.site_count();
    int64_t split = 0;  // first site with t > 0
    while (split < n && lattice_.site(split)[0] <= 0.0) ++split;
    double prev_t = 0.0, prev_x = 0.0;
    for (int64_t i = split; i < n; ++i) {
      const double t = lattice_.site(i)[0];
      prev_x += std::sqrt(kappa_ * (t - prev_t)) * rng.normal();
      prev_t = t;
      fs.value(i, j) = prev_x;
    }
    prev_t = 0.0;
    prev_x = 0.0;
    for (int64_t i = split - 1; i >= 0; --i) {
      if (i == origin_) continue;
      const double t = -lattice_.site(i)[0];
      prev_x += std::sqrt(kappa_ * (t - prev_t)) * rng.normal();
      prev_t = t;
      fs.value(i, j) = prev_x;
    }
  }

  Lattice lattice_;
  double H_, kappa_;
  int64_t origin_ = -1;
  std::vector<int64_t> free_sites_;
  Eigen::MatrixXd factor_;
};

inline FieldSample exact_fbm_1d(const Lattice& lattice, double H, uint64_t seed,
                                int components = 1) {
  return FbmOracle1d(lattice, H).sample(seed, components);
}

// ---------------------------------------------------------------------------
// Band truncation error bound: A = r^2 a^2 sigma^2(1/a) + sigma^2(1/b);
// provided sigma*(sqrt(A)) <= r/2, the sup over |t| <= r of |X - X(a,b)|
// exceeds u with probability at most exp(-u^2/(K0 A)) for u >= u_min.
// ---------------------------------------------------------------------------

struct TruncationBound {
  double r, a, b, A, u_min, K0;
  double tail(double u) const { return std::exp(-u * u / (K0 * A)); }
};

inline double truncation_A(double r, double a, double b, const FieldParams& p) {
  if (!(a > 1.0) || !(b > a)) throw domain_error("truncation_A: needs 1 < a < b");
  if (!(r > 0.0) || !(r < 1.0)) throw domain_error("truncation_A: needs r in (0,1)");
  return sq(r) * sq(a) * sq(sigma(1.0 / a, p)) + sq(sigma(1.0 / b, p));
}

inline TruncationBound truncation_bound(double r, double a, double b, const FieldParams& p,
                                        double K0) {
  if (!(K0 > 0)) throw domain_error("truncation_bound: K0 must be positive");
  const double A = truncation_A(r, a, b, p);
  if (!(A < 1.0)) {
    throw domain_error("truncation_bound: A = " + format_double(A) +
                       " >= 1, sigma* undefined at sqrt(A)");
  }
  const double ss = sigma_star(std::sqrt(A), p);
  if (!(ss <= 0.5 * r)) {
    throw domain_error("truncation_bound: clause sigma*(sqrt(A)) <= r/2 failed (" +
                       format_double(ss) + " > " + format_double(0.5 * r) + ")");
  }
  const double ratio = K0 * r / ss;
  if (!(ratio > 1.0)) {
    throw domain_error("truncation_bound: clause K0 r / sigma*(sqrt(A)) > 1 failed");
  }
  TruncationBound tb{r, a, b, A, 0.0, K0};
  tb.u_min = K0 * std::sqrt(A * std::log(ratio));
  return tb;
}

// ---------------------------------------------------------------------------
// Empirical variogram across replicated samples, with the ratio to sigma^2.
// ---------------------------------------------------------------------------

struct VariogramRow {
  double lag = 0;
  double mean_sq_increment = 0;
  double ratio = 0;  // against sigma^2(lag)
};

inline std::vector<VariogramRow> empirical_variogram(const std::vector<FieldSample>& samples,
                                                     const std::vector<double>& lags,
                                                     const FieldParams& p) {
  if (samples.size() < 100) throw domain_error("empirical_variogram: needs >= 100 samples");
  const Lattice& lat = samples.front().lattice;
  if (lat.dim != 1) throw domain_error("empirical_variogram: N=1 lattice expected");
  std::vector<VariogramRow> rows;
  for (double lag : lags) {
    const int64_t step = (int64_t)std::floor(lag / lat.spacing + 0.5);
    if (step < 1 || std::fabs((double)step * lat.spacing - lag) > 1e-9 * lag) {
      throw domain_error("empirical_variogram: lag must be a multiple of spacing");
    }
    KahanSum s;
    int64_t count = 0;
    for (const auto& fs : samples) {
      const int64_t n = lat.site_count();
      for (int64_t i = 0; i + step < n; ++i) {
        for (int j = 0; j < fs.components; ++j) {
          s.add(sq(fs.value(i + step, j) - fs.value(i, j)));
          ++count;
        }
      }
    }
    VariogramRow row;
    row.lag = lag;
    row.mean_sq_increment = s.value() / (double)count;
    row.ratio = row.mean_sq_increment / sq(sigma(lag, p));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SLND probe: exact Gaussian conditional variance of X_1(t) given lattice
// sites in the shell r <= |s-t| <= delta0, from the model covariance.
// ---------------------------------------------------------------------------

struct SlndReport {
  double conditional_variance = 0;
  double ratio = 0;  // against sigma^2(r), estimates c2
  int sites_used = 0;
  bool regularized = false;
};

template <class CovFn>
SlndReport slnd_probe_cov(const CovFn& cov, const Lattice& lattice,
                          const std::array<double, 3>& t, double r, double delta0,
                          const FieldParams& p, int max_sites = 64) {
  std::vector<std::array<double, 3>> shell;
  const int64_t n = lattice.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const auto s = lattice.site(i);
    double dist = 0;
    for (int j = 0; j < lattice.dim; ++j) dist += sq(s[j] - t[j]);
    dist = std::sqrt(dist);
    if (dist >= r && dist <= delta0) shell.push_back(s);
  }
  if ((int)shell.size() > max_sites) {
    std::vector<std::array<double, 3>> picked;
    const double stride = (double)shell.size() / max_sites;
    for (int k = 0; k < max_sites; ++k) picked.push_back(shell[(size_t)(k * stride)]);
    shell.swap(picked);
  }
  SlndReport rep;
  rep.sites_used = (int)shell.size();
  const double var_t = cov(t, t);
  if (shell.empty()) {
    rep.conditional_variance = var_t;
  } else {
    const int m = (int)shell.size();
    Eigen::MatrixXd K(m, m);
    Eigen::VectorXd k(m);
    for (int a = 0; a < m; ++a) {
      k(a) = cov(shell[a], t);
      for (int b = 0; b <= a; ++b) {
        K(a, b) = K(b, a) = cov(shell[a], shell[b]);
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      K.diagonal().array() += 1e-12 * std::max(1.0, K.diagonal().maxCoeff());
      ldlt.compute(K);
      rep.regularized = true;
      if (ldlt.info() != Eigen::Success) throw numerical_error("slnd_probe: singular shell covariance");
    }
    rep.conditional_variance = var_t - k.dot(ldlt.solve(k));
  }
  rep.ratio = rep.conditional_variance / sq(sigma(r, p));
  return rep;
}

inline SlndReport slnd_probe(const SpectralModel& model, const Lattice& lattice,
                             const std::array<double, 3>& t, double r, double delta0,
                             int max_sites = 64) {
  return slnd_probe_cov(
      [&](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return model.covariance(a, b);
      },
      lattice, t, r, delta0, model.params(), max_sites);
}

}  // namespace critfield
