#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "critfield/hitting.hpp"

using namespace critfield;

namespace {
// one-sided Brownian covariance on t > 0
const CovarianceFn kBmCov = [](const Point& s, const Point& t) {
  return std::min(std::fabs(s[0]), std::fabs(t[0]));
};
}  // namespace

TEST_CASE("decomposition: alpha at the anchor, closed form, halving search") {
  Decomposition dec = make_decomposition(kBmCov, 1, {0.5, 0, 0}, 2.0);
  CHECK(dec.alpha({0.5, 0, 0}) == 1.0);
  CHECK(dec.rho0 <= 0.5 + 1e-12);  // interval must exclude 0 and keep alpha >= 1/2
  // Brownian closed form alpha(t) = min(t, t0)/t0 across the interval
  const Region I = dec.interval();
  for (int g = 0; g <= 1000; ++g) {
    const double t = I.lo[0] + (I.hi[0] - I.lo[0]) * g / 1000.0;
    const double expected = std::min(t, 0.5) / 0.5;
    REQUIRE(dec.alpha({t, 0, 0}) == Catch::Approx(expected).epsilon(1e-9));
    REQUIRE(dec.alpha({t, 0, 0}) >= 0.5);
    REQUIRE(dec.alpha({t, 0, 0}) <= 1.5);
  }
  CHECK_THROWS_AS(make_decomposition(kBmCov, 1, {0, 0, 0}, 1.0), domain_error);

  // the quadrature covariance model reproduces the same alpha
  FieldParams p(1, 1, 0.5, 0.0);
  SpectralModel m(p, 2.0, 1.0 / 256.0);
  const CovarianceFn model_cov = [&](const Point& s, const Point& t) {
    return m.covariance(s, t);
  };
  Decomposition dm = make_decomposition(model_cov, 1, {0.5, 0, 0}, 0.5);
  for (double t : {0.3, 0.45, 0.6, 0.7}) {
    CHECK(dm.alpha({t, 0, 0}) == Catch::Approx(std::min(t, 0.5) / 0.5).epsilon(1e-6));
  }
}

TEST_CASE("split field: exact algebra and conditional variance") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  Lattice lat = Lattice::line(0.25, 0.75, 1.0 / 128.0);
  Decomposition dec = make_decomposition(kBmCov, 1, {0.5, 0, 0}, 0.5);
  FieldGen gen = fbm_generator(p.H, p.d);

  FieldSample f = gen(lat, 11);
  auto [x1, x2] = split_field(f, dec);
  const auto t0_idx = lat.site_index_of({0.5, 0, 0});
  REQUIRE(t0_idx.has_value());
  for (int j = 0; j < 2; ++j) {
    CHECK(x1.value(*t0_idx, j) == 0.0);  // alpha(t0) = 1 exactly
  }
  for (int64_t i = 0; i < lat.site_count(); ++i) {
    for (int j = 0; j < 2; ++j) {
      REQUIRE(x1.value(i, j) + x2.value(i, j) == f.value(i, j));
    }
  }

  // Var X1(t) = t - min(t,t0)^2/t0 for the Brownian pair, within 5%
  const int reps = 2000;
  std::vector<int64_t> probes{10, 25, 40, 55};
  std::vector<std::vector<double>> vals(probes.size(), std::vector<double>(reps));
  std::vector<std::vector<double>> at_t0(probes.size(), std::vector<double>(reps));
  for (int r = 0; r < reps; ++r) {
    FieldSample g = gen(lat, 5000 + r);
    auto [g1, g2] = split_field(g, dec);
    for (size_t q = 0; q < probes.size(); ++q) {
      vals[q][r] = g1.value(probes[q], 0);
      at_t0[q][r] = g.value(*t0_idx, 0);
    }
  }
  for (size_t q = 0; q < probes.size(); ++q) {
    const double t = lat.site(probes[q])[0];
    const double expected = t - sq(std::min(t, 0.5)) / 0.5;
    if (expected > 0.01) {
      CHECK(variance(vals[q]) == Catch::Approx(expected).epsilon(0.05 + 0.05));
    }
    // X1 independent of X(t0): empirical correlation within 3/sqrt(n)
    CHECK(std::fabs(pearson_correlation(vals[q], at_t0[q])) < 3.0 / std::sqrt((double)reps));
  }
}

TEST_CASE("x3 field: identity, stubs, box-count trend") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  Lattice lat = Lattice::line(0.25, 0.75, 1.0 / 256.0);
  Decomposition dec = make_decomposition(kBmCov, 1, {0.5, 0, 0}, 0.5);
  FieldSample f = fbm_generator(p.H, p.d)(lat, 21);
  const std::vector<double> z{0.3, -0.1};
  FieldSample x3 = x3_field(f, dec, z);
  CHECK(x3_identity_residual(f, x3, dec, z) < 1e-10);

  // engineered target: z = X(t*) makes X3(t*) = X(t0) exactly
  const int64_t star = 37;
  const std::vector<double> z_star{f.value(star, 0), f.value(star, 1)};
  FieldSample x3s = x3_field(f, dec, z_star);
  const auto t0_idx = lat.site_index_of({0.5, 0, 0});
  for (int j = 0; j < 2; ++j) {
    CHECK(x3s.value(star, j) == Catch::Approx(f.value(*t0_idx, j)).margin(1e-12));
  }

  // alpha identically 1 stub: X3 reduces to z - X1
  Decomposition unit;
  unit.N = 1;
  unit.t0 = {0.5, 0, 0};
  unit.rho0 = 0.5;
  unit.var_t0 = 1.0;
  unit.cov = [](const Point&, const Point&) { return 1.0; };
  auto [x1, x2] = split_field(f, unit);
  FieldSample x3unit = x3_field(f, unit, z);
  for (int64_t i = 0; i < lat.site_count(); ++i) {
    for (int j = 0; j < 2; ++j) {
      REQUIRE(x3unit.value(i, j) == Catch::Approx(z[j] - x1.value(i, j)).margin(1e-14));
    }
  }

  // box-count volume proxy of the X3 image shrinks with resolution
  const auto box_volume = [&](const FieldSample& field, double rho) {
    std::set<std::pair<long, long>> boxes;
    for (int64_t i = 0; i < field.lattice.site_count(); ++i) {
      boxes.insert({(long)std::floor(field.value(i, 0) / rho),
                    (long)std::floor(field.value(i, 1) / rho)});
    }
    return (double)boxes.size() * rho * rho;
  };
  const double v1 = box_volume(x3, 0.2);
  const double v2 = box_volume(x3, 0.1);
  const double v3 = box_volume(x3, 0.05);
  CHECK(v2 <= v1 + 1e-12);
  CHECK(v3 <= v2 + 1e-12);
}

TEST_CASE("hit probability: certain event, shared-path monotonicity") {
  FieldParams p(1, 1, 0.5, 0.0);
  HitExperiment ex;
  ex.params = p;
  ex.z = {0.3};
  ex.replications = 400;
  ex.deltas = {8.0, 4.0};  // huge radii: certain hit
  Lattice net = Lattice::line(0.5, 1.0, 1.0 / 64.0);
  HitReport rep = hit_probability(fbm_generator(0.5, 1), net, ex, 5);
  CHECK(rep.rows[0].prob == 1.0);
  CHECK(rep.rows[1].prob == 1.0);
  CHECK(rep.monotone);

  // resolution rule enforcement
  HitExperiment fine = ex;
  fine.deltas = {0.01, 0.001};
  CHECK_THROWS_AS(hit_probability(fbm_generator(0.5, 1), net, fine, 5), domain_error);
}

TEST_CASE("hit probability trends: subcritical plateau, supercritical decay") {
  // quick versions of the regime diagnostics
  std::vector<double> deltas;
  for (int j = 4; j <= 6; ++j) deltas.push_back(std::pow(2.0, -j));
  const double dmin = deltas.back();

  FieldParams sub(1, 1, 0.5, 0.0);
  const double h = sigma_star(dmin, sub) / 4.0;
  const int64_t steps = (int64_t)std::ceil(0.5 / h);
  Lattice net = Lattice::line(0.5, 1.0, 0.5 / (double)steps);
  HitExperiment ex;
  ex.params = sub;
  ex.z = {0.3};
  ex.replications = 1000;
  ex.deltas = deltas;
  HitReport rsub = hit_probability(fbm_generator(0.5, 1), net, ex, 77);
  CHECK(rsub.final_prob >= 0.2);
  CHECK(rsub.monotone);

  FieldParams sup(1, 3, 0.5, 0.0);
  HitExperiment e3;
  e3.params = sup;
  e3.z = {0.3, 0.0, 0.0};
  e3.replications = 1000;
  e3.deltas = deltas;
  HitReport rsup = hit_probability(fbm_generator(0.5, 3), net, e3, 78);
  CHECK(rsup.rows.back().prob < rsub.rows.back().prob);
  CHECK(rsup.monotone);
  CHECK(rsup.rows.back().prob < rsup.rows.front().prob);  // strictly shrinking
}

TEST_CASE("mu_n measures: stubs, uniform bound, mean lower bound") {
  FieldParams p(1, 1, 0.5, 0.0);
  Lattice lat = Lattice::line(0.5, 1.0, 1.0 / 512.0);
  Region I{1, {0.5, 0, 0}, {1, 0, 0}};

  // X identically z: mu_n(I) = (2 pi n)^{d/2} lambda(I)
  FieldSample stub;
  stub.lattice = lat;
  stub.components = 1;
  stub.values.assign(lat.site_count(), 0.3);
  for (double n : {1.0, 4.0, 64.0}) {
    CHECK(mu_n_measure(stub, {0.3}, I, n) ==
          Catch::Approx(std::sqrt(2 * M_PI * n) * 0.5).epsilon(1e-9));
  }

  // path missing z by margin m: mu_n <= (2 pi n)^{d/2} e^{-n m^2/2} lambda(I)
  FieldSample offset = stub;
  for (auto& v : offset.values) v = 0.3 + 0.25;
  const double m256 = mu_n_measure(offset, {0.3}, I, 256.0);
  CHECK(m256 <= std::sqrt(2 * M_PI * 256.0) * std::exp(-256.0 * sq(0.25) / 2.0) * 0.5 * (1 + 1e-12));
  CHECK(m256 >= 0.0);

  // E[mu_n(I)] >= the analytic bound for Brownian paths (c1 = c2 = 1)
  const double bound = mu_n_mean_lower_bound(p, 0.5, 1.0, 0.3, 1.0, 1.0);
  const int reps = 500;
  std::vector<double> mu(reps);
  FieldGen gen = fbm_generator(0.5, 1);
  parallel_for(reps, [&](int64_t r) {
    FieldSample f = gen(lat, 900 + r);
    mu[r] = mu_n_measure(f, {0.3}, I, 16.0);
  });
  const double se = std::sqrt(variance(mu) / reps);
  CHECK(mean(mu) >= bound - 3.0 * se);
}

TEST_CASE("mu_n second moment bound: closed form and divergence flag") {
  // d = 1, H = 1/2, gamma = 0: integrand |t-s|^{-1/2} over [0.5,1]^2
  FieldParams p(1, 1, Rational{1, 2}, 0.0);
  SecondMomentBound b = mu_n_second_moment_bound(p, 0.5, 1.0);
  CHECK(!b.diverges);
  CHECK(b.double_integral == Catch::Approx((8.0 / 3.0) * std::pow(0.5, 1.5)).epsilon(1e-6));
  CHECK(b.value == Catch::Approx(b.prefactor * b.double_integral));

  // critical polar case: the diagonal integral diverges analytically
  FieldParams crit(1, 2, Rational{1, 2}, 0.5);
  SecondMomentBound bc = mu_n_second_moment_bound(crit, 0.5, 1.0);
  CHECK(bc.diverges);
  CHECK(bc.value == HUGE_VAL);
  CHECK(bc.diverges == classify_polarity(crit).integral_diverges);

  // empirical second moment stays below the bound in the convergent case
  Lattice lat = Lattice::line(0.5, 1.0, 1.0 / 512.0);
  Region I{1, {0.5, 0, 0}, {1, 0, 0}};
  const int reps = 800;
  std::vector<double> musq(reps);
  FieldGen gen = fbm_generator(0.5, 1);
  parallel_for(reps, [&](int64_t r) {
    FieldSample f = gen(lat, 4400 + r);
    musq[r] = sq(mu_n_measure(f, {0.3}, I, 64.0));
  });
  const double se = std::sqrt(variance(musq) / reps);
  CHECK(mean(musq) <= b.value * (1 + 1e-9) + 3.0 * se);
}

TEST_CASE("weak limit witness: floor comparison and ladder guard") {
  CHECK_THROWS_AS(weak_limit_witness({{1.0, 2.0}}, 1.0, 2.0), domain_error);

  FieldParams p(1, 1, 0.5, 0.0);
  Lattice lat = Lattice::line(0.5, 1.0, 1.0 / 256.0);
  Region I{1, {0.5, 0, 0}, {1, 0, 0}};
  const std::vector<double> ladder{1, 2, 4, 8, 16, 32, 64, 128, 256};
  const int reps = 600;
  std::vector<std::vector<double>> paths(reps);
  FieldGen gen = fbm_generator(0.5, 1);
  parallel_for(reps, [&](int64_t r) {
    FieldSample f = gen(lat, 7100 + r);
    std::vector<double> row;
    for (double n : ladder) row.push_back(mu_n_measure(f, {0.3}, I, n));
    paths[r] = std::move(row);
  });
  // calibrated constants from the sample itself
  double c1 = HUGE_VAL, c2 = 0;
  for (size_t k = 0; k < ladder.size(); ++k) {
    std::vector<double> col(reps), col2(reps);
    for (int r = 0; r < reps; ++r) {
      col[r] = paths[r][k];
      col2[r] = sq(paths[r][k]);
    }
    c1 = std::min(c1, mean(col));
    c2 = std::max(c2, mean(col2));
  }
  WeakLimitWitness w = weak_limit_witness(paths, c1, c2);
  CHECK(w.ok);
  CHECK(w.floor <= 1.0);

  // supercritical trend: medians decrease along the ladder
  FieldParams sup(1, 3, 0.5, 0.0);
  std::vector<std::vector<double>> spaths(400);
  FieldGen gen3 = fbm_generator(0.5, 3);
  parallel_for(400, [&](int64_t r) {
    FieldSample f = gen3(lat, 8200 + r);
    std::vector<double> row;
    for (double n : ladder) row.push_back(mu_n_measure(f, {0.3, 0, 0}, I, n));
    spaths[r] = std::move(row);
  });
  WeakLimitWitness ws = weak_limit_witness(spaths, 1.0, 1.0);
  CHECK(ws.median_by_n.back() < ws.median_by_n.front());
}
