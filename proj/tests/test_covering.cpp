#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "critfield/covering.hpp"
#include "critfield/sojourn.hpp"

using namespace critfield;

TEST_CASE("vitali selection: hand example, singleton, random families") {
  std::vector<Ball> line{{1, {0, 0, 0}, 1.0}, {1, {1, 0, 0}, 1.0}, {1, {5, 0, 0}, 1.0}};
  VitaliResult v = vitali_select(line);
  REQUIRE(v.kept == std::vector<int>{0, 2});
  CHECK(v.disjoint_verified);
  CHECK(v.cover_verified);  // B(1,1) inside 5 B(0,1)

  std::vector<Ball> one{{2, {0.3, -0.2, 0}, 0.7}};
  VitaliResult s = vitali_select(one);
  CHECK(s.kept == std::vector<int>{0});
  CHECK(s.cover_verified);

  CounterRng rng = make_stream(31);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Ball> fam;
    for (int i = 0; i < 200; ++i) {
      fam.push_back({2, {rng.uniform(-1, 1), rng.uniform(-1, 1), 0}, rng.uniform(0.01, 0.3)});
    }
    VitaliResult r = vitali_select(fam);
    REQUIRE(r.disjoint_verified);
    REQUIRE(r.cover_verified);
    // every kept ball that covers an input has radius >= that input
    for (const Ball& b : fam) {
      bool ok = false;
      for (int k : r.kept) {
        if (ball_distance(b, fam[k]) + b.radius <= 5.0 * fam[k].radius + 1e-12) {
          ok = ok || fam[k].radius >= b.radius - 1e-12 ||
               ball_distance(b, fam[k]) <= b.radius + fam[k].radius;
        }
      }
      REQUIRE(ok);
    }
  }
}

TEST_CASE("occupancy measure: saturation, vanishing, sojourn identity") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  const double eps = 1.0 / 16.0, beta = 1.2;
  SojournConfig cfg = make_sojourn_config(p, eps, beta, 1);
  FieldSample f = fbm_generator(p.H, p.d)(cfg.lattice, 2024);
  const double radius = std::pow(eps, beta);
  Region ball_region{1, {-radius, 0, 0}, {radius, 0, 0}};

  // ball radius beyond sup|X - center|: full region volume (lattice count)
  double sup = 0;
  int64_t in_region = 0;
  for (int64_t i = 0; i < cfg.lattice.site_count(); ++i) {
    if (!ball_region.contains(cfg.lattice.site(i))) continue;
    ++in_region;
    sup = std::max(sup, f.norm_at(i));
  }
  Ball big{2, {0, 0, 0}, sup * 2 + 1.0};
  CHECK(occupancy_measure(f, ball_region, big) ==
        Catch::Approx((double)in_region * cfg.lattice.cell_volume()));

  // tiny ball around a value the path never reaches
  Ball missed{2, {sup + 5.0, 0, 0}, 1e-9};
  CHECK(occupancy_measure(f, ball_region, missed) == 0.0);

  // occupancy of B(0,eps) over |t| <= eps^beta equals the sojourn time
  Ball origin_ball{2, {0, 0, 0}, eps};
  CHECK(occupancy_measure(f, ball_region, origin_ball) ==
        Catch::Approx(sojourn_time(f, p, eps, beta)).epsilon(1e-12));

  Region outside{1, {-10, 0, 0}, {10, 0, 0}};
  CHECK_THROWS_AS(occupancy_measure(f, outside, big), domain_error);

  // monotone in radius, additive over disjoint balls up to the lattice
  Ball small{2, {0, 0, 0}, eps / 2};
  CHECK(occupancy_measure(f, ball_region, small) <=
        occupancy_measure(f, ball_region, origin_ball));
  Ball far_ball{2, {3 * eps, 0, 0}, eps};
  const double both = occupancy_measure(f, ball_region, origin_ball) +
                      occupancy_measure(f, ball_region, far_ball);
  CHECK(both >= occupancy_measure(f, ball_region, origin_ball));
}

TEST_CASE("heavy ball families: degenerate thresholds and the budget identity") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  Lattice lat = Lattice::line(0.0, 1.0, std::pow(2.0, -12));
  FieldSample f = fbm_generator(p.H, p.d)(lat, 7);
  Region region{1, {0, 0, 0}, {1, 0, 0}};
  const double r1 = 0.05, r2 = 0.0125;

  // zero thresholds admit every candidate into F1
  HeavyFamilies all = heavy_ball_families(f, region, region, r1, r2, 1e-300, 1e-300, 1, 5, p);
  CHECK(all.f1.size() == all.candidates.size());

  // thresholds beyond the region volume empty both families
  HeavyFamilies none = heavy_ball_families(f, region, region, r1, r2, 1e9, 1e9, 1, 5, p);
  CHECK(none.f1.empty());
  CHECK(none.f2.empty());

  // benchmark thresholds: the disjoint-subfamily gauge budget holds exactly
  HeavyFamilies fam = heavy_ball_families(f, region, region, r1, r2, 1.0, 1.0, 1, 5, p);
  CHECK(fam.budget_ok);
  CHECK(fam.f1_budget_cap == Catch::Approx(region.volume()));
}

TEST_CASE("residual cover: trivial exclusions and the cover property") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  Lattice lat = Lattice::line(0.0, 1.0, std::pow(2.0, -9));
  FieldSample f = fbm_generator(p.H, p.d)(lat, 3);
  Region region{1, {0, 0, 0}, {1, 0, 0}};

  // excluded ball swallowing the whole image: empty residual
  double sup = 0;
  for (int64_t i = 0; i < lat.site_count(); ++i) sup = std::max(sup, f.norm_at(i));
  ResidualCover whole = residual_cover(f, region, 5, {{2, {0, 0, 0}, sup + 1.0}});
  CHECK(whole.balls.empty());
  CHECK(whole.cover_verified);

  // no exclusions: every cube contributes and the cover check passes
  ResidualCover open = residual_cover(f, region, 5, {});
  CHECK(open.balls.size() == 32);
  CHECK(open.cover_verified);
  CHECK(open.cubes.order == 5);

  CHECK_THROWS_AS(residual_cover(f, region, 12, {}), domain_error);  // finer than lattice
}

TEST_CASE("oscillations over dyadic cubes scale like sigma(2^-l) sqrt(l)") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  Lattice lat = Lattice::line(0.0, 1.0, std::pow(2.0, -12));
  const int reps = 200;
  std::vector<std::vector<double>> ratios(6);
  FieldGen gen = fbm_generator(p.H, p.d);
  std::vector<FieldSample> paths(reps);
  parallel_for(reps, [&](int64_t r) { paths[r] = gen(lat, 600 + r); });
  for (int li = 0; li < 6; ++li) {
    const int order = 4 + li;
    const int64_t w = (int64_t)1 << (12 - order);  // sites per cube
    for (const auto& f : paths) {
      double worst = 0;
      for (int64_t c = 0; c < ((int64_t)1 << order); ++c) {
        const int64_t base = c * w;
        double osc = 0;
        for (int64_t i = base; i <= std::min(base + w, lat.site_count() - 1); ++i) {
          double d2 = 0;
          for (int j = 0; j < 2; ++j) d2 += sq(f.value(i, j) - f.value(base, j));
          osc = std::max(osc, std::sqrt(d2));
        }
        worst = std::max(worst, osc);
      }
      ratios[li].push_back(worst /
                           (sigma(std::pow(2.0, -order), p) * std::sqrt((double)order)));
    }
  }
  for (int li = 0; li < 6; ++li) {
    const double m = mean(ratios[li]);
    CHECK(m > 0.3);
    CHECK(m < 3.0);
  }
}

TEST_CASE("gauge sums: exact value, empty family, duplicate-path oracle") {
  FieldParams p(1, 2, Rational{1, 2}, 0.0);
  // single radius with logloglog(1/(2r)) = 1: phi(2r) = (2r)^d (log 1/(2r))^{1-gd}
  const double two_r = std::exp(-std::exp(M_E));
  GaugeReport one = gauge_sum({{"f", {two_r / 2}}}, p);
  CHECK(one.total == Catch::Approx(sq(two_r) * std::exp(M_E)).epsilon(1e-10));

  GaugeReport empty = gauge_sum({{"f", {}}}, p);
  CHECK(empty.total == 0.0);

  // naive-summation oracle agreement at 1e-12
  CounterRng rng = make_stream(8);
  std::vector<double> radii;
  for (int i = 0; i < 1000; ++i) radii.push_back(std::exp(-rng.uniform(16.0, 30.0)));
  GaugeReport rep = gauge_sum({{"f", radii}}, p);
  double naive = 0;
  for (double r : radii) naive += phi_gauge(2 * r, p);
  CHECK(rep.total == Catch::Approx(naive).epsilon(1e-12));

  // domain violations list the offending radii
  CHECK_THROWS_WITH(gauge_sum({{"f", {0.3}}}, p),
                    Catch::Matchers::ContainsSubstring("0.6"));
  GaugeReport tolerant = gauge_sum({{"f", {0.3, two_r / 2}}}, p, false);
  CHECK(tolerant.offending_radii.size() == 1);
  CHECK(tolerant.total == Catch::Approx(one.total));
}

TEST_CASE("dyadic cover enumerates the right cubes") {
  Region r1{1, {0, 0, 0}, {1, 0, 0}};
  CubeFamily f = dyadic_cover(r1, 3);
  CHECK(f.indices.size() == 8);
  Region r2{2, {0, 0, 0}, {0.5, 0.25, 0}};
  CubeFamily g = dyadic_cover(r2, 3);
  CHECK(g.indices.size() == 4 * 2);
}
