#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "critfield/sojourn.hpp"

using namespace critfield;

namespace {
FieldParams bm2() { return FieldParams(1, 2, Rational{1, 2}, 0.0); }  // critical: d = N/H
}  // namespace

TEST_CASE("sojourn time: zero-field stub counts the whole discrete ball") {
  FieldParams p = bm2();
  const double eps = 0.25, beta = 1.2;
  SojournConfig cfg = make_sojourn_config(p, eps, beta, 1);
  FieldSample zero;
  zero.lattice = cfg.lattice;
  zero.components = 2;
  zero.values.assign(cfg.lattice.site_count() * 2, 0.0);
  const double radius = std::pow(eps, beta);
  int64_t in_ball = 0;
  for (int64_t i = 0; i < cfg.lattice.site_count(); ++i) {
    if (std::fabs(cfg.lattice.site(i)[0]) <= radius) ++in_ball;
  }
  CHECK(sojourn_time(zero, p, eps, beta) ==
        Catch::Approx((double)in_ball * cfg.lattice.cell_volume()).epsilon(1e-14));
}

TEST_CASE("sojourn time: origin membership and monotonicity in eps") {
  FieldParams p = bm2();
  const double beta = 1.2;
  const double eps_small = 1.0 / 64.0, eps_big = 1.0 / 16.0;
  // one lattice serving both eps values: covers the bigger ball at the
  // resolution of the smaller eps
  SojournConfig cfg = make_sojourn_config(p, eps_small, beta, 1);
  const double radius_big = std::pow(eps_big, beta);
  const int64_t half = (int64_t)std::ceil(radius_big / cfg.lattice.spacing);
  Lattice lat = Lattice::box(1, {-(double)half * cfg.lattice.spacing, 0, 0},
                             {(double)half * cfg.lattice.spacing, 0, 0}, cfg.lattice.spacing);
  FieldSample f = fbm_generator(p.H, p.d)(lat, 4242);

  const double t_small = sojourn_time(f, p, eps_small, beta);
  const double t_big = sojourn_time(f, p, eps_big, beta);
  CHECK(t_small <= t_big);
  CHECK(t_small >= lat.cell_volume());  // origin always qualifies
  CHECK(t_big <= 2.0 * radius_big + 2.0 * lat.spacing);

  // eps below every nonzero |X|: only the origin cell qualifies
  SojournConfig fine = make_sojourn_config(p, 0.01, beta, 1);
  FieldSample stub;
  stub.lattice = fine.lattice;
  stub.components = 2;
  stub.values.assign(fine.lattice.site_count() * 2, 1.0);
  const auto origin = fine.lattice.site_index_of({0, 0, 0});
  REQUIRE(origin.has_value());
  stub.value(*origin, 0) = 0.0;
  stub.value(*origin, 1) = 0.0;
  CHECK(sojourn_time(stub, p, 0.01, beta) == Catch::Approx(fine.lattice.cell_volume()));

  CHECK_THROWS_AS(sojourn_time(f, p, 0.5, beta), domain_error);  // coverage violation
}

TEST_CASE("sojourn config guards") {
  FieldParams p = bm2();
  CHECK_THROWS_AS(make_sojourn_config(p, 0.1, 1.0, 10), domain_error);   // beta = 1
  CHECK_THROWS_AS(make_sojourn_config(p, 0.1, 2.0, 10), domain_error);   // beta = 1/H
  CHECK_THROWS_AS(make_sojourn_config(p, 1.5, 1.2, 10), domain_error);   // eps >= 1
  SojournConfig cfg = make_sojourn_config(p, 0.1, 1.5, 10);
  CHECK(cfg.lattice.spacing <= sigma_star(0.1, p) / 8.0 * (1 + 1e-12));
}

TEST_CASE("mc moments: Jensen ordering, normalization, boundary-psi case") {
  FieldParams p = bm2();
  FieldGen gen = fbm_generator(p.H, p.d);
  const std::vector<double> eps_grid{1.0 / 16.0, 1.0 / 32.0};
  SojournStats stats = mc_moments(gen, p, eps_grid, 1.2, 2, 600, 17);
  REQUIRE(stats.rows.size() == 4);
  for (size_t i = 0; i + 1 < stats.rows.size(); i += 2) {
    const auto& r1 = stats.rows[i];
    const auto& r2 = stats.rows[i + 1];
    REQUIRE(r1.n == 1);
    REQUIRE(r2.n == 2);
    CHECK(std::sqrt(r2.moment) >= r1.moment);  // Jensen
    const double psi_eps = psi(r1.eps, p);
    CHECK(r1.normalized ==
          Catch::Approx(r1.moment / (std::pow(r1.eps, p.d) * psi_eps)).epsilon(1e-12));
  }
  CHECK(stats.C3_hat > 0);
  CHECK(stats.C1_hat >= stats.C3_hat);

  // gamma = 1/d: Psi = 1, normalization uses eps^d alone
  FieldParams pb(1, 2, Rational{1, 2}, 0.5);
  auto model = std::make_shared<SpectralModel>(pb, 1.0, sigma_star(1.0 / 16, pb) / 8.0);
  SojournStats sb = mc_moments(spectral_generator(model), pb, {1.0 / 16.0}, 1.2, 1, 200, 3);
  CHECK(sb.rows[0].normalized ==
        Catch::Approx(sb.rows[0].moment / std::pow(1.0 / 16.0, 2)).epsilon(1e-12));

  // regime guard: moments need the critical polar regime
  CHECK_THROWS_AS(mc_moments(gen, FieldParams(1, 1, 0.5, 0.0), eps_grid, 1.2, 2, 100, 1),
                  domain_error);
  CHECK_THROWS_AS(mc_moments(gen, p, eps_grid, 1.2, 5, 100, 1), domain_error);  // n_max > 4
}

TEST_CASE("first moment oracle: stubs and MC agreement") {
  FieldParams p = bm2();
  const double eps = 1.0 / 32.0, beta = 1.2;

  // v(t) = eps^2 stub: integrand is the constant 1 - e^{-1/2}
  const double vol = 2.0 * std::pow(eps, beta);
  const double stub = first_moment_oracle(p, eps, beta, [&](double) { return sq(eps); });
  CHECK(stub == Catch::Approx((1.0 - std::exp(-0.5)) * vol).epsilon(1e-9));

  // against Monte Carlo within 3 bootstrap standard errors
  FieldGen gen = fbm_generator(p.H, p.d);
  SojournConfig cfg = make_sojourn_config(p, eps, beta, 1500);
  std::vector<double> t = sojourn_replications(gen, cfg, 99);
  const double oracle = first_moment_oracle(p, eps, beta, [](double r) { return r; });
  CounterRng rng = make_stream(5);
  Ci ci = bootstrap_ci(t, [](const std::vector<double>& v) { return mean(v); }, 800, rng);
  const double se = 0.25 * ci.width();  // 95% percentile interval ~ 4 SE
  CHECK(std::fabs(mean(t) - oracle) <= 3.0 * se + 0.02 * oracle);
}

TEST_CASE("tail probabilities: u=0 extension, monotone rows") {
  FieldParams p = bm2();
  FieldGen gen = fbm_generator(p.H, p.d);
  TailReport rep = tail_probability(gen, p, 1.0 / 64.0, 1.2, {0.0, 0.5, 1.0, 2.0, 3.0}, 2000, 31);
  REQUIRE(!rep.rows.empty());
  CHECK(rep.rows.front().u == 0.0);
  CHECK(rep.rows.front().prob == 1.0);  // T >= 0 always
  CHECK(rep.rows.front().prob >= 0.25);
  double prev = 2.0;
  for (const auto& row : rep.rows) {
    CHECK(row.prob <= prev + 1e-15);
    prev = row.prob;
  }
  CHECK(rep.window_warning);  // desk-scale eps sits outside the proven window
}

TEST_CASE("paley-zygmund check") {
  std::vector<double> constant(50, 3.0);
  PzCheck c = paley_zygmund_check(constant, 0.5);
  CHECK(c.lhs == 1.0);
  CHECK(c.rhs == Catch::Approx(0.25));
  CHECK(c.holds);

  PzCheck one = paley_zygmund_check(constant, 1.0);
  CHECK(one.rhs == 0.0);
  CHECK(one.holds);

  CHECK_THROWS_AS(paley_zygmund_check({1.0, -0.5}, 0.5), domain_error);
  CHECK_THROWS_AS(paley_zygmund_check({1.0}, 1.5), domain_error);

  // sojourn samples: inequality holds with margin
  FieldParams p = bm2();
  SojournConfig cfg = make_sojourn_config(p, 1.0 / 32.0, 1.2, 800);
  std::vector<double> t = sojourn_replications(fbm_generator(p.H, p.d), cfg, 12);
  PzCheck pz = paley_zygmund_check(t, 0.5);
  CHECK(pz.holds);
  CHECK(pz.lhs > pz.rhs);
}

TEST_CASE("halving the lattice spacing moves T_eps by under 2 percent") {
  FieldParams p = bm2();
  const double eps = 0.2, beta = 1.2;
  // band-limited field: smooth at scale 1/64, evaluated far below that scale
  SpectralModel m(p, 1.0, 1.0 / 4096.0);
  const std::pair<double, double> band{m.xi_min(), 64.0};
  const double radius = std::pow(eps, beta);
  const double h = sigma_star(eps, p) / 32.0;
  const int64_t half = (int64_t)std::ceil(radius / h);
  std::vector<double> rel_changes;
  for (uint64_t seed = 0; seed < 40; ++seed) {
    Lattice coarse = Lattice::box(1, {-(double)half * h, 0, 0}, {(double)half * h, 0, 0}, h);
    Lattice fine = Lattice::box(1, {-(double)half * h, 0, 0}, {(double)half * h, 0, 0}, h / 2);
    FieldSample fc = synthesize(coarse, m, seed, band);
    FieldSample ff = synthesize(fine, m, seed, band);
    const double tc = sojourn_time(fc, p, eps, beta);
    const double tf = sojourn_time(ff, p, eps, beta);
    if (tc > 0) rel_changes.push_back(std::fabs(tf - tc) / tc);
  }
  CHECK(median(rel_changes) < 0.02);
}
