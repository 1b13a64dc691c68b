#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "critfield/cli_config.hpp"
#include "critfield/lattice.hpp"
#include "critfield/logscale.hpp"
#include "critfield/quadrature.hpp"
#include "critfield/rng.hpp"
#include "critfield/special.hpp"
#include "critfield/stats.hpp"

using namespace critfield;

TEST_CASE("LogScale conversions and guard") {
  LogScale s = LogScale::from_radius(0.25);
  CHECK(s.lambda() == Catch::Approx(std::log(4.0)));
  CHECK(s.radius() == Catch::Approx(0.25));
  CHECK_THROWS_AS(LogScale::from_radius(1.0), domain_error);
  CHECK_THROWS_AS(LogScale::from_radius(0.0), domain_error);
  LogScale huge = LogScale::from_lambda(1e10L);
  CHECK(!huge.directly_representable());
  CHECK_THROWS_AS(huge.radius(), domain_error);
  // lambda beyond double range stays usable
  LogScale ext = LogScale::from_lambda(std::exp((long double)1700.0L));
  CHECK(ext.lambda() > 0);
}

TEST_CASE("quadrature: smooth, singular, infinite") {
  auto q = integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-10);
  CHECK(q.converged);
  CHECK(q.value == Catch::Approx(2.0).epsilon(1e-9));

  // integrable endpoint singularity: int_0^1 x^{-1/2} = 2
  auto s = integrate_singular_left([](double x) { return 1.0 / std::sqrt(x); }, 1e-12, 1.0, 1e-9);
  CHECK(s.value == Catch::Approx(2.0).epsilon(1e-5));

  // int_1^inf x^{-2} = 1
  auto t = integrate_to_infinity([](double x) { return 1.0 / (x * x); }, 1.0, 1e-9);
  CHECK(t.converged);
  CHECK(t.value == Catch::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("chi-square cdf against closed forms") {
  // d=2: 1 - exp(-y/2)
  CHECK(chi2_cdf(2, 1.3) == Catch::Approx(1.0 - std::exp(-0.65)).epsilon(1e-12));
  // d=1: erf(sqrt(y/2))
  CHECK(chi2_cdf(1, 0.7) == Catch::Approx(std::erf(std::sqrt(0.35))).epsilon(1e-10));
  // d=4: 1 - e^{-y/2}(1 + y/2)
  const double y = 2.9;
  CHECK(chi2_cdf(4, y) == Catch::Approx(1.0 - std::exp(-y / 2) * (1 + y / 2)).epsilon(1e-10));
  CHECK(chi2_cdf(3, 0.0) == 0.0);
}

TEST_CASE("counter rng: determinism, splitting, moments") {
  CounterRng a = make_stream(42, 1, 2);
  CounterRng b = make_stream(42, 1, 2);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  CounterRng c = make_stream(42, 1, 3);
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs = differs || (b.next_u64() != c.next_u64());
  CHECK(differs);

  CounterRng g = make_stream(7);
  const int n = 200000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::fabs(s1 / n) < 0.01);
  CHECK(s2 / n == Catch::Approx(1.0).epsilon(0.02));
  CHECK(std::fabs(s3 / n) < 0.03);
  CHECK(s4 / n == Catch::Approx(3.0).epsilon(0.05));
}

TEST_CASE("stats: wilson, bootstrap, fit") {
  Ci w = wilson_ci(50, 100);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  CHECK(w.hi - w.lo < 0.25);

  std::vector<double> xs, ys;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(i);
    ys.push_back(3.0 * i + 1.0);
  }
  LinearFit f = linear_fit(xs, ys);
  CHECK(f.slope == Catch::Approx(3.0));
  CHECK(f.intercept == Catch::Approx(1.0));
  CHECK(f.r2 == Catch::Approx(1.0));

  std::vector<double> v(400);
  CounterRng rng = make_stream(3);
  for (auto& x : v) x = rng.normal() + 5.0;
  CounterRng boot = make_stream(4);
  Ci ci = bootstrap_ci(v, [](const std::vector<double>& s) { return mean(s); }, 500, boot);
  CHECK(ci.lo < 5.0);
  CHECK(ci.hi > 5.0);
}

TEST_CASE("lattice geometry and budget") {
  Lattice l = Lattice::line(-1.0, 1.0, 0.25);
  CHECK(l.site_count() == 9);
  CHECK(l.origin_included());
  CHECK(l.site(0)[0] == Catch::Approx(-1.0));
  CHECK(l.site(8)[0] == Catch::Approx(1.0));
  auto idx = l.site_index_of({0.5, 0, 0});
  REQUIRE(idx.has_value());
  CHECK(l.site(*idx)[0] == Catch::Approx(0.5));
  CHECK_THROWS_AS(Lattice::line(0.0, 1.0, 0.3), domain_error);           // no divisibility
  CHECK_THROWS_AS(Lattice::line(0.0, 1.0, 1e-9), domain_error);          // budget
  Lattice b2 = Lattice::box(2, {0, 0, 0}, {1, 1, 0}, 0.5);
  CHECK(b2.site_count() == 9);
}

TEST_CASE("field sample round trip: binary container") {
  Lattice l = Lattice::line(0.0, 1.0, 0.5);
  FieldSample fs;
  fs.lattice = l;
  fs.components = 2;
  fs.seed = 77;
  fs.band = {1.0, 8.0};
  fs.values = {0, 0, 1.5, -2.5, 3.25, 4.75};
  FieldParams p(1, 2, 0.5, 0.25);
  std::stringstream ss;
  write_cfld(ss, fs, p);
  auto [back, params] = read_cfld(ss);
  CHECK(params.d == 2);
  CHECK(params.gamma == 0.25);
  CHECK(back.seed == 77);
  REQUIRE(back.band.has_value());
  CHECK(back.band->second == 8.0);
  REQUIRE(back.values.size() == fs.values.size());
  for (size_t i = 0; i < fs.values.size(); ++i) CHECK(back.values[i] == fs.values[i]);

  std::stringstream csv;
  write_csv(csv, fs);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t1,x1,x2");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("config: parse, override, round trip, unknown keys") {
  const std::string text = "seed=9\n[sojourn]\neps=0.25,0.125\nbeta=1.5\n";
  Config cfg = Config::parse_text(text);
  CHECK(cfg.get("seed") == "9");
  CHECK(cfg.get("sojourn.eps") == "0.25,0.125");
  // round trip: emit then parse gives identical canonical text
  Config again = Config::parse_text(cfg.emit());
  CHECK(again.emit() == cfg.emit());
  // overrides replace values
  cfg.set("sojourn.beta", "1.25");
  CHECK(cfg.get_double("sojourn.beta") == 1.25);
  // unknown keys are reported, not ignored
  Config c2 = Config::parse_text("a=1\nb=2\n");
  (void)c2.get("a");
  auto leftover = c2.unconsumed();
  REQUIRE(leftover.size() == 1);
  CHECK(leftover[0] == "b");
  // H rational path
  Config c3 = Config::parse_text("H=1/2\n");
  FieldParams p;
  c3.read_H("H", p);
  REQUIRE(p.H_rational.has_value());
  CHECK(p.H_rational->num == 1);
  CHECK(p.H == 0.5);
}

TEST_CASE("git blob hash matches git hash-object") {
  // echo 'test content' | git hash-object --stdin
  CHECK(git_blob_hash("test content\n") == "d670460b4b4aece5915caf5c68d12f560a9fe3e4");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("kahan summation") {
  KahanSum s;
  for (int i = 0; i < 10000000; ++i) s.add(0.1);
  CHECK(s.value() == Catch::Approx(1000000.0).epsilon(1e-12));
}
