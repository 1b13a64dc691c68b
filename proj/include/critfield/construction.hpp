#pragma once

#include <gmpxx.h>

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "critfield/common.hpp"
#include "critfield/logscale.hpp"
#include "critfield/params.hpp"
#include "critfield/rng.hpp"
#include "critfield/variance.hpp"

namespace critfield {

// ---------------------------------------------------------------------------
// Epsilon ladders. Everything lives in log domain: lambda_k = log(1/eps_k),
// long double so that lambda up to ~e^1700 stays representable.
//
//   Case gamma < 1/d:  lambda_0 = beta*lambda, lambda_k = (C 2^{k-p} + beta) lambda
//   Case gamma = 1/d:  lambda_0 = beta*lambda, lambda_{k+1} = e^{c 2^{k-p}} (lambda_k + log 4)
//
// Validity window: n = 2^p <= logloglog(1/eps).
// ---------------------------------------------------------------------------

enum class LadderCase { SubcriticalGamma, CriticalGamma };

struct EpsilonLadder {
  LadderCase kase = LadderCase::SubcriticalGamma;
  int p = 1;
  double beta = 1.5;
  double constant = 0.1;  // C (case 1) or c (case 2)
  double eta = 0.0;       // case-2 headroom, informational
  long double lambda_eps = 0;
  std::vector<long double> lambda;  // lambda_0 .. lambda_p, strictly increasing

  int n() const { return 1 << p; }
  bool directly_representable() const { return lambda.back() <= 700.0L; }
};

inline double case2_max_constant(double H, double beta, double eta) {
  return std::log((1.0 - eta) / (H * beta));
}

inline EpsilonLadder build_ladder(LadderCase kase, const LogScale& eps, int p, double beta,
                                  double constant, const FieldParams& params,
                                  std::optional<double> eta_opt = std::nullopt,
                                  bool enforce_window = true) {
  if (p < 1) throw domain_error("build_ladder: p >= 1");
  if (!(beta > 1.0 && beta < 1.0 / params.H)) {
    throw domain_error("build_ladder: beta must lie in (1, 1/H)");
  }
  const long double lam = eps.lambda();
  const long double lll = std::log(std::log(lam));
  const long double n = (long double)(1 << p);
  if (enforce_window && !(n <= lll)) {
    throw domain_error("build_ladder: validity window violated, n=" + std::to_string(1 << p) +
                       " > logloglog(1/eps)=" + format_double((double)lll));
  }
  EpsilonLadder lad;
  lad.kase = kase;
  lad.p = p;
  lad.beta = beta;
  lad.constant = constant;
  lad.lambda_eps = lam;
  lad.lambda.resize(p + 1);
  lad.lambda[0] = (long double)beta * lam;
  if (kase == LadderCase::SubcriticalGamma) {
    if (!(constant > 0 && constant < (1.0 / params.H - beta) / 2.0)) {
      throw domain_error("build_ladder: case-1 constant must lie in (0, (1/H - beta)/2)");
    }
    for (int k = 1; k <= p; ++k) {
      lad.lambda[k] = ((long double)constant * std::pow(2.0L, (long double)(k - p)) +
                       (long double)beta) * lam;
    }
  } else {
    const double eta = eta_opt.value_or((1.0 - params.H * beta) / 2.0);
    if (!(eta > 0 && eta < 1.0 - params.H * beta)) {
      throw domain_error("build_ladder: case-2 eta must lie in (0, 1 - H*beta)");
    }
    const double cmax = case2_max_constant(params.H, beta, eta);
    if (!(constant > 0 && constant <= cmax)) {
      throw domain_error("build_ladder: case-2 constant must lie in (0, log((1-eta)/(H*beta))] = (0, " +
                         format_double(cmax) + "]");
    }
    lad.eta = eta;
    const long double log4 = std::log(4.0L);
    for (int k = 0; k < p; ++k) {
      lad.lambda[k + 1] =
          std::exp((long double)constant * std::pow(2.0L, (long double)(k - p))) *
          (lad.lambda[k] + log4);
    }
  }
  return lad;
}

// Desk-scale factory from explicit lambda values (no window enforcement);
// used where configurations at representable radii are needed.
inline EpsilonLadder ladder_from_lambdas(LadderCase kase, const std::vector<double>& lambdas,
                                         double beta, double constant) {
  if (lambdas.size() < 2) throw domain_error("ladder_from_lambdas: needs >= 2 levels");
  EpsilonLadder lad;
  lad.kase = kase;
  lad.p = (int)lambdas.size() - 1;
  lad.beta = beta;
  lad.constant = constant;
  lad.lambda_eps = (long double)lambdas.front() / beta;
  for (double l : lambdas) {
    if (!lad.lambda.empty() && !((long double)l > lad.lambda.back())) {
      throw domain_error("ladder_from_lambdas: lambda must be strictly increasing");
    }
    lad.lambda.push_back((long double)l);
  }
  return lad;
}

// ------------------------- P1..P4 verification -----------------------------

struct LadderReport {
  bool p1 = false, p2 = false, p3 = false, p4 = false;
  // normalized worst-case margins: P1 in units of log 8 (>=1 passes),
  // P2/P3 slack divided by lambda (>0 passes), P4 the achieved constant
  // inf_k (f(eps_{k+1}) - f(eps_k/4)) / (2^{k-p} Psi(eps)) (>0 passes).
  double margin_p1 = 0, margin_p2 = 0, margin_p3 = 0, margin_p4 = 0;
  bool all() const { return p1 && p2 && p3 && p4; }
};

namespace detail {
inline double clampd(long double x) {
  if (x > 1e300L) return 1e300;
  if (x < -1e300L) return -1e300;
  return (double)x;
}
}  // namespace detail

inline LadderReport verify_P1_to_P4(const EpsilonLadder& lad, const FieldParams& params) {
  LadderReport rep;
  const int p = lad.p;
  const long double lam = lad.lambda_eps;
  const long double log2l = std::log(2.0L);
  const long double log4l = std::log(4.0L);
  const long double log8l = std::log(8.0L);

  // P1: lambda_{k+1} - lambda_k >= log 8
  long double m1 = HUGE_VALL;
  for (int k = 0; k < p; ++k) m1 = std::min(m1, (lad.lambda[k + 1] - lad.lambda[k]) / log8l);
  rep.margin_p1 = detail::clampd(m1);
  rep.p1 = m1 >= 1.0L;

  const auto log_sig = [&](long double l) {
    return -(long double)params.H * l + (long double)params.gamma * std::log(l);
  };

  // P2: log sigma(eps_1) >= -lambda - p log 2, slack normalized by lambda
  {
    const long double slack = log_sig(lad.lambda[1]) + lam + (long double)p * log2l;
    rep.margin_p2 = detail::clampd(slack / lam);
    rep.p2 = slack >= 0.0L;
  }

  // P3: log sigma(eps_{k+1}) >= -lambda + (k-p) log 2 for k = 1..p-1
  {
    long double worst = HUGE_VALL;
    for (int k = 1; k < p; ++k) {
      const long double slack =
          log_sig(lad.lambda[k + 1]) + lam - (long double)(k - p) * log2l;
      worst = std::min(worst, slack / lam);
    }
    rep.margin_p3 = detail::clampd(worst);
    rep.p3 = p == 1 || worst >= 0.0L;
  }

  // P4: f(eps_{k+1}) - f(eps_k/4) >= (const) 2^{k-p} Psi(eps)
  {
    const bool boundary = params.gamma_case() == FieldParams::GammaCase::AtBoundary;
    if (!boundary && params.gamma_case() != FieldParams::GammaCase::Below) {
      throw domain_error("verify_P1_to_P4: needs gamma <= 1/d");
    }
    const long double s = 1.0L - (long double)params.gamma * params.d;
    long double worst = HUGE_VALL;
    for (int k = 0; k < p; ++k) {
      const long double denom_pow = std::pow(2.0L, (long double)(k - p));
      long double diff;
      if (boundary) {
        diff = std::log(lad.lambda[k + 1]) - std::log(lad.lambda[k] + log4l);
        worst = std::min(worst, diff / denom_pow);  // Psi = 1
      } else {
        diff = std::pow(lad.lambda[k + 1], s) - std::pow(lad.lambda[k] + log4l, s);
        worst = std::min(worst, diff / (denom_pow * std::pow(lam, s)));
      }
    }
    rep.margin_p4 = detail::clampd(worst);
    rep.p4 = worst > 0.0L;
  }
  return rep;
}

// Per-k P4 difference f(eps_{k+1}) - f(eps_k/4); in Case 2 this equals
// c 2^{k-p} identically.
inline std::vector<double> p4_differences(const EpsilonLadder& lad, const FieldParams& params) {
  std::vector<double> out;
  const bool boundary = params.gamma_case() == FieldParams::GammaCase::AtBoundary;
  const long double s = 1.0L - (long double)params.gamma * params.d;
  const long double log4l = std::log(4.0L);
  for (int k = 0; k < lad.p; ++k) {
    const long double diff =
        boundary ? std::log(lad.lambda[k + 1]) - std::log(lad.lambda[k] + log4l)
                 : std::pow(lad.lambda[k + 1], s) - std::pow(lad.lambda[k] + log4l, s);
    out.push_back((double)diff);
  }
  return out;
}

// --------------------------- branch assignments ----------------------------

// Bijections a_k : {2^k+1..2^{k+1}} -> {1..2^k}; there are (2^k)! of each.
struct BranchAssignment {
  int p = 0;
  std::vector<std::vector<int>> maps;  // maps[k][j] = a_k(2^k + 1 + j), 1-based targets

  static BranchAssignment identity(int p) {
    BranchAssignment b;
    b.p = p;
    for (int k = 0; k < p; ++k) {
      std::vector<int> m(1 << k);
      std::iota(m.begin(), m.end(), 1);
      b.maps.push_back(std::move(m));
    }
    return b;
  }

  static BranchAssignment random(int p, CounterRng& rng) {
    BranchAssignment b = identity(p);
    for (auto& m : b.maps) {
      for (size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[rng.below(i)]);
    }
    return b;
  }

  bool bijective() const {
    for (int k = 0; k < p; ++k) {
      std::vector<char> seen(maps[k].size() + 1, 0);
      for (int v : maps[k]) {
        if (v < 1 || v > (int)maps[k].size() || seen[v]) return false;
        seen[v] = 1;
      }
    }
    return true;
  }

  // a(i) for 1-based i in {2^k+1 .. 2^{k+1}}
  int target(int k, int i) const { return maps[k][i - (1 << k) - 1]; }
};

// ------------------------- point configurations ----------------------------

struct PointConfiguration {
  int N = 1;
  int p = 1;
  std::vector<std::array<double, 3>> points;  // size 2^p
  std::vector<double> radii;                  // eps_0..eps_p used for the geometry
  bool surrogate = false;                     // geometry radii are rescaled surrogates
};

namespace detail {

inline double dist(const std::array<double, 3>& a, const std::array<double, 3>& b, int N) {
  if (N == 1) return std::fabs(a[0] - b[0]);
  if (N == 2) return std::hypot(a[0] - b[0], a[1] - b[1]);
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

// uniform point of the shell {r_in <= |s - c| <= r_out}
inline std::array<double, 3> sample_shell(const std::array<double, 3>& c, double r_in,
                                          double r_out, int N, CounterRng& rng) {
  if (N == 1) {
    const double side = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    return {c[0] + side * rng.uniform(r_in, r_out), 0, 0};
  }
  // rejection from the bounding box; direct radial-angular after 1e4 misses
  for (int it = 0; it < 10000; ++it) {
    std::array<double, 3> s{{0, 0, 0}};
    for (int j = 0; j < N; ++j) s[j] = c[j] + rng.uniform(-r_out, r_out);
    const double d0 = dist(s, c, N);
    if (d0 >= r_in && d0 <= r_out) return s;
  }
  const double theta = rng.uniform(0.0, 2.0 * M_PI);
  const double rho = std::sqrt(sq(r_in) + rng.uniform01() * (sq(r_out) - sq(r_in)));
  return {c[0] + rho * std::cos(theta), c[1] + rho * std::sin(theta), 0};
}

}  // namespace detail

// Geometry radii for sampling: direct radii when representable, otherwise
// an affine log-domain rescale lambda~_k = 1 + s (lambda_k - lambda_0) with
// s = log(8)/min-gap, which preserves the gap ordering and keeps the 1/8
// shell-ratio the separation argument needs.
inline std::pair<std::vector<double>, bool> geometry_radii(const EpsilonLadder& lad) {
  if (lad.directly_representable()) {
    std::vector<double> r;
    for (long double l : lad.lambda) r.push_back((double)std::exp(-l));
    return {r, false};
  }
  long double min_gap = HUGE_VALL;
  for (int k = 0; k < lad.p; ++k) {
    min_gap = std::min(min_gap, lad.lambda[k + 1] - lad.lambda[k]);
  }
  if (!(min_gap > 0)) throw domain_error("geometry_radii: ladder not strictly increasing");
  const long double s = std::log(8.0L) / min_gap;
  std::vector<double> r;
  for (long double l : lad.lambda) {
    const long double scaled = 1.0L + s * (l - lad.lambda[0]);
    if (scaled > 700.0L) {
      throw domain_error("geometry_radii: surrogate exceeds the representable range");
    }
    r.push_back((double)std::exp(-scaled));
  }
  return {r, true};
}

inline PointConfiguration sample_configuration(const EpsilonLadder& lad,
                                               const BranchAssignment& branch, int N,
                                               CounterRng& rng) {
  if (branch.p != lad.p) throw domain_error("sample_configuration: branch.p != ladder.p");
  if (!branch.bijective()) {
    throw domain_error("sample_configuration: branch maps must be bijective");
  }
  if (N < 1 || N > 2) throw domain_error("sample_configuration: N in {1,2}");
  auto [radii, surrogate] = geometry_radii(lad);
  const int p = lad.p;
  const int n = 1 << p;
  PointConfiguration cfg;
  cfg.N = N;
  cfg.p = p;
  cfg.radii = radii;
  cfg.surrogate = surrogate;
  cfg.points.resize(n);
  cfg.points[0] = detail::sample_shell({0, 0, 0}, radii[1], radii[0] / 4.0, N, rng);
  for (int k = 0; k < p; ++k) {
    for (int i = (1 << k) + 1; i <= (1 << (k + 1)); ++i) {
      const auto& center = cfg.points[branch.target(k, i) - 1];
      cfg.points[i - 1] = detail::sample_shell(center, radii[k + 1], radii[k] / 4.0, N, rng);
    }
  }

  // post-hoc verification; any failure is a construction bug
  const double slack = 1.0 + 1e-12;
  const auto fail = [&](const std::string& what) {
    throw numerical_error("sample_configuration: verification failed: " + what);
  };
  if (!(detail::dist(cfg.points[0], {0, 0, 0}, N) >= radii[1] / slack &&
        detail::dist(cfg.points[0], {0, 0, 0}, N) <= radii[0] / 4.0 * slack)) {
    fail("t_1 outside H_0(0)");
  }
  for (int k = 0; k < p; ++k) {
    for (int i = (1 << k) + 1; i <= (1 << (k + 1)); ++i) {
      const double d_anchor =
          detail::dist(cfg.points[i - 1], cfg.points[branch.target(k, i) - 1], N);
      if (!(d_anchor >= radii[k + 1] / slack && d_anchor <= radii[k] / 4.0 * slack)) {
        fail("shell membership at level k=" + std::to_string(k));
      }
      double d_F = HUGE_VAL;
      for (int m = 1; m <= (1 << k); ++m) {
        d_F = std::min(d_F, detail::dist(cfg.points[i - 1], cfg.points[m - 1], N));
      }
      if (!(d_F >= radii[k + 1] / slack && d_F <= radii[k] / 4.0 * slack)) {
        fail("d(t_i, F_k) window at level k=" + std::to_string(k));
      }
    }
  }
  for (int k = 0; k <= p; ++k) {
    for (int l = 1; l <= (1 << k); ++l) {
      for (int j = l + 1; j <= (1 << k); ++j) {
        if (!(detail::dist(cfg.points[l - 1], cfg.points[j - 1], N) >= radii[k] / slack)) {
          fail("pairwise separation at level k=" + std::to_string(k));
        }
      }
    }
  }
  for (const auto& t : cfg.points) {
    if (!(detail::dist(t, {0, 0, 0}, N) <= radii[0] * slack)) fail("containment in B(0, eps_0)");
  }
  return cfg;
}

// Shell disjointness at level k via center distance > sum of outer radii.
inline bool shells_disjoint(const PointConfiguration& cfg, int k) {
  const double outer = cfg.radii[k] / 4.0;
  for (int l = 1; l <= (1 << k); ++l) {
    for (int j = l + 1; j <= (1 << k); ++j) {
      if (!(detail::dist(cfg.points[l - 1], cfg.points[j - 1], cfg.N) > 2.0 * outer)) {
        return false;
      }
    }
  }
  return true;
}

// ------------------------ joint small-ball bound ---------------------------

// Constructive constant: c0 = 2 e^{-1/2}/sqrt(2 pi) from the normal density,
// c1 = 2^{-3} from the dyadic product, and a factor 1/2 per point because the
// chained increments certify |X(t_i)| <= 2 eps.
inline double product_bound_default_C0(int d) {
  const double c0 = 2.0 * std::exp(-0.5) / std::sqrt(2.0 * M_PI);
  const double c1 = 0.125;
  return std::pow(c0 * c1 / (2.0 * std::sqrt((double)d)), d);
}

// log of the lower bound on P{ |X(t_i)| <= eps for all i }:
//   n log C0 + n d log eps - d [ log sigma(|t_1|) + sum log sigma(d(t_i,F_k)) ]
// Requires (and checks) sigma(|t_1|) >= 2^{-p} eps and
// sigma(d(t_i,F_k)) >= 2^{k-p} eps.
inline double product_lower_bound_log(const std::vector<std::array<double, 3>>& points, int N,
                                      double eps, const FieldParams& params,
                                      std::optional<double> C0_opt = std::nullopt) {
  const int n = (int)points.size();
  int p = 0;
  while ((1 << p) < n) ++p;
  if ((1 << p) != n) throw domain_error("product_lower_bound: point count must be 2^p");
  if (!(eps > 0 && eps < 1)) throw domain_error("product_lower_bound: eps in (0,1)");
  const double C0 = C0_opt.value_or(product_bound_default_C0(params.d));
  const double t1 = detail::dist(points[0], {0, 0, 0}, N);
  if (!(sigma(t1, params) >= std::ldexp(eps, -p))) {
    throw domain_error("product_lower_bound: condition sigma(|t_1|) >= 2^{-p} eps fails");
  }
  double log_sigmas = std::log(sigma(t1, params));
  for (int k = 0; k < p; ++k) {
    for (int i = (1 << k) + 1; i <= (1 << (k + 1)); ++i) {
      double dF = HUGE_VAL;
      for (int m = 1; m <= (1 << k); ++m) {
        dF = std::min(dF, detail::dist(points[i - 1], points[m - 1], N));
      }
      if (!(sigma(dF, params) >= std::ldexp(eps, k - p))) {
        throw domain_error("product_lower_bound: condition sigma(d(t_i,F_k)) >= 2^{k-p} eps fails");
      }
      log_sigmas += std::log(sigma(dF, params));
    }
  }
  return n * std::log(C0) + (double)n * params.d * std::log(eps) - params.d * log_sigmas;
}

// Companion: the true joint probability by Monte Carlo on the covariance
// matrix of (X_1(t_1),...,X_1(t_n)), components i.i.d.
struct JointSmallBall {
  double estimate = 0;
  double std_error = 0;
  long hits = 0;
  long draws = 0;
};

template <class CovFn>
JointSmallBall joint_smallball_mc(const std::vector<std::array<double, 3>>& points, int N,
                                  double eps, int d, const CovFn& cov, long draws,
                                  uint64_t seed) {
  const int n = (int)points.size();
  Eigen::MatrixXd K(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b <= a; ++b) {
      K(a, b) = K(b, a) = cov(points[a], points[b]);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    K.diagonal().array() += 1e-12 * std::max(1.0, K.diagonal().maxCoeff());
    llt.compute(K);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("joint_smallball_mc: covariance not positive definite");
    }
  }
  const Eigen::MatrixXd L = llt.matrixL();
  long hits = 0;
  const double e2 = sq(eps);
  Eigen::VectorXd z(n), y(n);
  std::vector<double> norm2(n);
  for (long r = 0; r < draws; ++r) {
    CounterRng rng = make_stream(seed, (uint64_t)r, 0, 0x5BB1u);
    std::fill(norm2.begin(), norm2.end(), 0.0);
    for (int j = 0; j < d; ++j) {
      for (int a = 0; a < n; ++a) z(a) = rng.normal();
      y = L * z;
      for (int a = 0; a < n; ++a) norm2[a] += sq(y(a));
    }
    bool all = true;
    for (int a = 0; a < n; ++a) {
      if (norm2[a] > e2) {
        all = false;
        break;
      }
    }
    if (all) ++hits;
  }
  JointSmallBall out;
  out.hits = hits;
  out.draws = draws;
  out.estimate = (double)hits / (double)draws;
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / (double)draws);
  return out;
}

// ---------------------------- exact identities -----------------------------
//
//   sum_{k=0}^{p-1} k 2^k = p 2^p - 2^{p+1} + 2                 (exact integers)
//   log2[ 2^{-p} prod_{k<p} (2^{k-p})^{2^k} ] = 2 - 2^{p+1}     (exact integer)
//   chain 1: that value >= n log2(c1) with c1 = 2^{-3}, n = 2^p
//   #A_k = (2^k)!                                               (exact bigints)
//   chain 2: prod_{k<p} (2^k)! >= (c0/4)^n n^n with c0 = 9/25 < 1/e,
//            verified as the integer inequality 100^n prod >= 9^n n^n.
// ---------------------------------------------------------------------------

struct ExactIdentities {
  int p = 0;
  unsigned long long sum_k2k = 0;          // sum_{k<p} k 2^k
  unsigned long long sum_k2k_closed = 0;   // p 2^p - 2^{p+1} + 2
  long long log2_prod2kp = 0;              // 2 - 2^{p+1}
  bool chain_prod2kp_c1 = false;           // >= -3 n
  mpz_class prod_factorials;               // prod_{k<p} (2^k)!
  std::vector<mpz_class> card_Ak;          // (2^k)! for k < p
  bool chain_factorials_c0 = false;        // 100^n prod >= 9^n n^n
};

inline ExactIdentities exact_identities(int p) {
  if (p < 1 || p > 20) throw domain_error("exact_identities: p must lie in 1..20");
  ExactIdentities out;
  out.p = p;
  for (int k = 0; k < p; ++k) out.sum_k2k += (unsigned long long)k << k;
  out.sum_k2k_closed =
      ((unsigned long long)p << p) - (2ULL << p) + 2ULL;
  out.log2_prod2kp = 2LL - (2LL << p);
  const long long n = 1LL << p;
  out.chain_prod2kp_c1 = out.log2_prod2kp >= -3 * n;
  out.prod_factorials = 1;
  for (int k = 0; k < p; ++k) {
    mpz_class f;
    mpz_fac_ui(f.get_mpz_t(), 1UL << k);
    out.card_Ak.push_back(f);
    out.prod_factorials *= f;
  }
  // 100^n prod >= 9^n n^n, with n^n = 2^{p 2^p}
  mpz_class lhs, rhs;
  mpz_ui_pow_ui(lhs.get_mpz_t(), 100, (unsigned long)n);
  lhs *= out.prod_factorials;
  mpz_ui_pow_ui(rhs.get_mpz_t(), 9, (unsigned long)n);
  mpz_class nn;
  mpz_ui_pow_ui(nn.get_mpz_t(), 2, (unsigned long)(p * n));
  rhs *= nn;
  out.chain_factorials_c0 = lhs >= rhs;
  return out;
}

}  // namespace critfield
