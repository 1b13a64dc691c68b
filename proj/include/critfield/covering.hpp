#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/lattice.hpp"
#include "critfield/params.hpp"
#include "critfield/variance.hpp"

namespace critfield {

// Closed ball in R^dim (dim <= 3).
struct Ball {
  int dim = 1;
  std::array<double, 3> center{{0, 0, 0}};
  double radius = 0;
};

inline double ball_distance(const Ball& a, const Ball& b) {
  double s = 0;
  for (int j = 0; j < a.dim; ++j) s += sq(a.center[j] - b.center[j]);
  return std::sqrt(s);
}

// Axis box region in parameter space.
struct Region {
  int dim = 1;
  std::array<double, 3> lo{{0, 0, 0}};
  std::array<double, 3> hi{{0, 0, 0}};

  double volume() const {
    double v = 1;
    for (int j = 0; j < dim; ++j) v *= hi[j] - lo[j];
    return v;
  }
  bool contains(const std::array<double, 3>& t) const {
    for (int j = 0; j < dim; ++j) {
      if (t[j] < lo[j] - 1e-12 || t[j] > hi[j] + 1e-12) return false;
    }
    return true;
  }
};

// ------------------------------ Vitali -------------------------------------
// Greedy selection in nonincreasing radius order (ties by input index): keep
// a ball iff it is disjoint from every kept ball. The 5x enlargements of the
// kept family cover every input ball; both claims are verified exhaustively.

struct VitaliResult {
  std::vector<int> kept;
  bool disjoint_verified = false;
  bool cover_verified = false;
};

inline VitaliResult vitali_select(const std::vector<Ball>& balls) {
  VitaliResult out;
  std::vector<int> order(balls.size());
  for (size_t i = 0; i < balls.size(); ++i) order[i] = (int)i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (balls[a].radius != balls[b].radius) return balls[a].radius > balls[b].radius;
    return a < b;
  });
  for (int i : order) {
    bool ok = true;
    for (int k : out.kept) {
      if (ball_distance(balls[i], balls[k]) <= balls[i].radius + balls[k].radius) {
        ok = false;
        break;
      }
    }
    if (ok) out.kept.push_back(i);
  }
  out.disjoint_verified = true;
  for (size_t a = 0; a < out.kept.size() && out.disjoint_verified; ++a) {
    for (size_t b = a + 1; b < out.kept.size(); ++b) {
      const Ball& x = balls[out.kept[a]];
      const Ball& y = balls[out.kept[b]];
      if (ball_distance(x, y) <= x.radius + y.radius) {
        out.disjoint_verified = false;
        break;
      }
    }
  }
  out.cover_verified = true;
  for (const Ball& b : balls) {
    bool covered = false;
    for (int k : out.kept) {
      if (ball_distance(b, balls[k]) + b.radius <= 5.0 * balls[k].radius + 1e-12) {
        covered = true;
        break;
      }
    }
    if (!covered) {
      out.cover_verified = false;
      break;
    }
  }
  return out;
}

// --------------------------- occupancy measure ------------------------------
// lambda_N{ t in region : X(t) in ball }, cell-volume weighted on the lattice.

inline double occupancy_measure(const FieldSample& field, const Region& region,
                                const Ball& ball) {
  const Lattice& lat = field.lattice;
  if (region.dim != lat.dim) throw domain_error("occupancy_measure: region dim mismatch");
  for (int j = 0; j < lat.dim; ++j) {
    if (region.lo[j] < lat.lo[j] - 1e-12 || region.hi[j] > lat.hi[j] + 1e-12) {
      throw domain_error("occupancy_measure: field does not cover the region");
    }
  }
  const double r2 = sq(ball.radius);
  int64_t count = 0;
  const int64_t n = lat.site_count();
  for (int64_t i = 0; i < n; ++i) {
    if (!region.contains(lat.site(i))) continue;
    double s = 0;
    for (int j = 0; j < field.components; ++j) s += sq(field.value(i, j) - ball.center[j]);
    if (s <= r2) ++count;
  }
  return (double)count * lat.cell_volume();
}

// --------------------------- dyadic cube nets -------------------------------

struct CubeFamily {
  int order = 0;  // cubes prod [k_j 2^{-q}, (k_j+1) 2^{-q}]
  std::vector<std::array<int64_t, 3>> indices;
  Region region;
};

inline CubeFamily dyadic_cover(const Region& region, int order) {
  CubeFamily fam;
  fam.order = order;
  fam.region = region;
  const double w = std::ldexp(1.0, -order);
  std::array<int64_t, 3> lo{{0, 0, 0}}, hi{{0, 0, 0}};
  for (int j = 0; j < region.dim; ++j) {
    lo[j] = (int64_t)std::floor(region.lo[j] / w + 1e-12);
    hi[j] = (int64_t)std::ceil(region.hi[j] / w - 1e-12);
  }
  if (region.dim == 1) {
    for (int64_t a = lo[0]; a < hi[0]; ++a) fam.indices.push_back({a, 0, 0});
  } else if (region.dim == 2) {
    for (int64_t a = lo[0]; a < hi[0]; ++a) {
      for (int64_t b = lo[1]; b < hi[1]; ++b) fam.indices.push_back({a, b, 0});
    }
  } else {
    throw domain_error("dyadic_cover: dim <= 2");
  }
  return fam;
}

// sites of the lattice falling in cube k (half-open except at the region top)
inline std::vector<int64_t> cube_sites(const Lattice& lat, int order,
                                       const std::array<int64_t, 3>& k) {
  const double w = std::ldexp(1.0, -order);
  std::vector<int64_t> out;
  const int64_t n = lat.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const auto t = lat.site(i);
    bool in = true;
    for (int j = 0; j < lat.dim; ++j) {
      const double a = (double)k[j] * w;
      if (t[j] < a - 1e-12 || t[j] >= a + w - 1e-12) {
        in = false;
        break;
      }
    }
    if (in) out.push_back(i);
  }
  return out;
}

inline std::array<double, 3> snap_to_lattice(const Lattice& lat,
                                             const std::array<double, 3>& t) {
  std::array<double, 3> s{{0, 0, 0}};
  for (int j = 0; j < lat.dim; ++j) {
    const int64_t k = (int64_t)std::floor((t[j] - lat.lo[j]) / lat.spacing + 0.5);
    const int64_t kk = std::max<int64_t>(0, std::min(lat.counts[j] - 1, k));
    s[j] = lat.lo[j] + (double)kk * lat.spacing;
  }
  return s;
}

// --------------------------- gauge sums ------------------------------------

struct GaugeReport {
  double total = 0;
  std::vector<std::pair<std::string, double>> parts;
  std::vector<double> offending_radii;  // 2r outside the phi domain
};

// Sum of phi(2 r_A) over a set of families of radii. Domain violations are
// collected and raised; silent clamping would corrupt the sums.
inline GaugeReport gauge_sum(const std::vector<std::pair<std::string, std::vector<double>>>& families,
                             const FieldParams& params, bool throw_on_domain = true) {
  GaugeReport rep;
  for (const auto& [name, radii] : families) {
    KahanSum s;
    for (double r : radii) {
      const double two_r = 2.0 * r;
      if (!(two_r > 0) || !(two_r < std::exp(-std::exp(1.0)))) {
        rep.offending_radii.push_back(two_r);
        continue;
      }
      s.add(phi_gauge(two_r, params));
    }
    rep.parts.push_back({name, s.value()});
    rep.total += s.value();
  }
  if (throw_on_domain && !rep.offending_radii.empty()) {
    std::string msg = "gauge_sum: radii outside the phi domain:";
    for (double r : rep.offending_radii) msg += " " + format_double(r);
    throw domain_error(msg);
  }
  return rep;
}

// ------------------------ heavy-ball families -------------------------------
// Image balls around net points X(t_Q) meeting the occupancy thresholds:
//   F1 (coarse rung r1): occupancy over I2 >= c1 r1^d Psi(r1) logloglog(1/r1)
//   F2 (fine rung r2):   occupancy over I1 >= c2 n0 r2^d Psi(r2), and
//                        disjoint from the 5x Vitali enlargement of F1.

struct HeavyFamilies {
  std::vector<Ball> f1, f2;
  std::vector<int> f1_kept, f2_kept;  // Vitali subfamily indices
  double f1_budget_sum = 0;           // sum over F1' of r^d Psi(r) lll(1/r)
  double f1_budget_cap = 0;           // c1^{-1} lambda_N(I2)
  bool budget_ok = false;
  std::vector<Ball> candidates;
};

inline double psi_value(double r, const FieldParams& p) { return psi(r, p); }

inline HeavyFamilies heavy_ball_families(const FieldSample& field, const Region& inner,
                                         const Region& outer, double r_coarse, double r_fine,
                                         double c1, double c2, int n0, int net_order,
                                         const FieldParams& params) {
  if (!(r_fine < r_coarse)) throw domain_error("heavy_ball_families: needs r_fine < r_coarse");
  const double lll_dom = std::exp(-std::exp(1.0));
  if (!(r_coarse < lll_dom)) {
    throw domain_error("heavy_ball_families: coarse rung outside the phi domain");
  }
  HeavyFamilies out;
  // candidate centers: image points of the dyadic net
  CubeFamily net = dyadic_cover(outer, net_order);
  const double w = std::ldexp(1.0, -net_order);
  if (w < 2.0 * field.lattice.spacing) {
    throw domain_error("heavy_ball_families: net finer than twice the lattice spacing");
  }
  std::vector<std::array<double, 3>> centers;
  for (const auto& k : net.indices) {
    std::array<double, 3> tq{{0, 0, 0}};
    for (int j = 0; j < outer.dim; ++j) tq[j] = ((double)k[j] + 0.5) * w;
    const auto idx = field.lattice.site_index_of(snap_to_lattice(field.lattice, tq));
    if (!idx) continue;
    std::array<double, 3> img{{0, 0, 0}};
    for (int j = 0; j < field.components; ++j) img[j] = field.value(*idx, j);
    centers.push_back(img);
  }
  const double psi1 = psi_value(r_coarse, params);
  const double lll1 = std::log(std::log(-std::log(r_coarse)));
  const double thresh1 = c1 * std::pow(r_coarse, params.d) * psi1 * lll1;
  for (const auto& cen : centers) {
    Ball b{field.components, cen, r_coarse};
    out.candidates.push_back(b);
    if (occupancy_measure(field, outer, b) >= thresh1) out.f1.push_back(b);
  }
  VitaliResult v1 = vitali_select(out.f1);
  out.f1_kept = v1.kept;
  KahanSum budget;
  for (int k : v1.kept) {
    budget.add(std::pow(out.f1[k].radius, params.d) * psi_value(out.f1[k].radius, params) *
               std::log(std::log(-std::log(out.f1[k].radius))));
  }
  out.f1_budget_sum = budget.value();
  out.f1_budget_cap = outer.volume() / c1;
  out.budget_ok = out.f1_budget_sum <= out.f1_budget_cap * (1.0 + 1e-12);
  // F2: fine rung, disjoint from 5x F1'
  const double psi2 = psi_value(r_fine, params);
  const double thresh2 = c2 * (double)n0 * std::pow(r_fine, params.d) * psi2;
  for (const auto& cen : centers) {
    Ball b{field.components, cen, r_fine};
    bool disjoint = true;
    for (int k : v1.kept) {
      if (ball_distance(b, out.f1[k]) <= b.radius + 5.0 * out.f1[k].radius) {
        disjoint = false;
        break;
      }
    }
    if (!disjoint) continue;
    if (occupancy_measure(field, inner, b) >= thresh2) out.f2.push_back(b);
  }
  VitaliResult v2 = vitali_select(out.f2);
  out.f2_kept = v2.kept;
  return out;
}

// ----------------------------- residual cover -------------------------------
// Dyadic cubes of the given order whose image is not already inside the
// excluded balls; each contributes an image ball around X(t_Q) whose radius
// is the observed oscillation of X on the cube.

struct ResidualCover {
  CubeFamily cubes;                      // included cubes
  std::vector<Ball> balls;               // their image balls
  std::vector<double> oscillations;      // observed sup |X - X(t_Q)| per cube
  bool cover_verified = false;           // every net image point covered
};

inline ResidualCover residual_cover(const FieldSample& field, const Region& region, int order,
                                    const std::vector<Ball>& excluded) {
  const Lattice& lat = field.lattice;
  const double w = std::ldexp(1.0, -order);
  if (w < 2.0 * lat.spacing) {
    throw domain_error("residual_cover: cube order finer than lattice resolution");
  }
  const auto in_excluded = [&](const std::array<double, 3>& img) {
    for (const Ball& b : excluded) {
      double s = 0;
      for (int j = 0; j < field.components; ++j) s += sq(img[j] - b.center[j]);
      if (s <= sq(b.radius)) return true;
    }
    return false;
  };
  ResidualCover out;
  out.cubes.order = order;
  out.cubes.region = region;
  CubeFamily all = dyadic_cover(region, order);
  for (const auto& k : all.indices) {
    const auto sites = cube_sites(lat, order, k);
    if (sites.empty()) continue;
    bool any_outside = false;
    for (int64_t i : sites) {
      std::array<double, 3> img{{0, 0, 0}};
      for (int j = 0; j < field.components; ++j) img[j] = field.value(i, j);
      if (!in_excluded(img)) {
        any_outside = true;
        break;
      }
    }
    if (!any_outside) continue;
    // center site of the cube
    std::array<double, 3> tq{{0, 0, 0}};
    for (int j = 0; j < lat.dim; ++j) tq[j] = ((double)k[j] + 0.5) * w;
    const auto cq = lat.site_index_of(snap_to_lattice(lat, tq));
    if (!cq) continue;
    Ball b;
    b.dim = field.components;
    for (int j = 0; j < field.components; ++j) b.center[j] = field.value(*cq, j);
    double osc = 0;
    for (int64_t i : sites) {
      double s = 0;
      for (int j = 0; j < field.components; ++j) s += sq(field.value(i, j) - b.center[j]);
      osc = std::max(osc, std::sqrt(s));
    }
    b.radius = osc;
    out.cubes.indices.push_back(k);
    out.balls.push_back(b);
    out.oscillations.push_back(osc);
  }
  // combined cover check over every region site image
  out.cover_verified = true;
  const int64_t n = lat.site_count();
  for (int64_t i = 0; i < n && out.cover_verified; ++i) {
    if (!region.contains(lat.site(i))) continue;
    std::array<double, 3> img{{0, 0, 0}};
    for (int j = 0; j < field.components; ++j) img[j] = field.value(i, j);
    if (in_excluded(img)) continue;
    bool covered = false;
    for (const Ball& b : out.balls) {
      double s = 0;
      for (int j = 0; j < field.components; ++j) s += sq(img[j] - b.center[j]);
      if (s <= sq(b.radius) * (1.0 + 1e-12)) {
        covered = true;
        break;
      }
    }
    out.cover_verified = covered;
  }
  return out;
}

}  // namespace critfield
