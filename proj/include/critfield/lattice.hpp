#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/params.hpp"

namespace critfield {

// Regular grid over an axis-aligned box in R^N, N <= 3.
struct Lattice {
  static constexpr int64_t kSiteBudget = int64_t(1) << 24;

  int dim = 1;
  std::array<double, 3> lo{{0, 0, 0}};
  std::array<double, 3> hi{{0, 0, 0}};
  double spacing = 1.0;
  std::array<int64_t, 3> counts{{1, 1, 1}};

  static Lattice box(int dim, const std::array<double, 3>& lo, const std::array<double, 3>& hi,
                     double spacing) {
    if (dim < 1 || dim > 3) throw domain_error("Lattice: dim must be 1..3");
    if (!(spacing > 0)) throw domain_error("Lattice: spacing must be positive");
    Lattice l;
    l.dim = dim;
    l.lo = lo;
    l.hi = hi;
    l.spacing = spacing;
    int64_t total = 1;
    for (int j = 0; j < dim; ++j) {
      const double len = hi[j] - lo[j];
      if (!(len >= 0)) throw domain_error("Lattice: hi < lo");
      const double steps = len / spacing;
      const int64_t n = (int64_t)std::floor(steps + 0.5);
      if (std::fabs(steps - (double)n) > 1e-9 * std::max(1.0, steps)) {
        throw domain_error("Lattice: spacing must divide extent lengths");
      }
      l.counts[j] = n + 1;
      total *= l.counts[j];
    }
    for (int j = dim; j < 3; ++j) l.counts[j] = 1;
    if (total > kSiteBudget) {
      throw domain_error("Lattice: site count " + std::to_string(total) + " exceeds budget " +
                         std::to_string(kSiteBudget));
    }
    return l;
  }

  static Lattice line(double a, double b, double spacing) {
    return box(1, {a, 0, 0}, {b, 0, 0}, spacing);
  }

  // [-radius, radius]^N grid through the origin
  static Lattice centered_ball(int dim, double radius, double spacing) {
    const int64_t half = (int64_t)std::floor(radius / spacing + 0.5);
    const double r = (double)half * spacing;
    std::array<double, 3> lo{{-r, -r, -r}}, hi{{r, r, r}};
    return box(dim, lo, hi, spacing);
  }

  int64_t site_count() const {
    int64_t t = 1;
    for (int j = 0; j < dim; ++j) t *= counts[j];
    return t;
  }

  std::array<double, 3> site(int64_t idx) const {
    std::array<double, 3> t{{0, 0, 0}};
    for (int j = 0; j < dim; ++j) {
      const int64_t k = idx % counts[j];
      idx /= counts[j];
      t[j] = lo[j] + (double)k * spacing;
    }
    return t;
  }

  bool origin_included() const {
    for (int j = 0; j < dim; ++j) {
      const double steps = -lo[j] / spacing;
      if (steps < -1e-9 || steps > (double)(counts[j] - 1) + 1e-9) return false;
      if (std::fabs(steps - std::floor(steps + 0.5)) > 1e-9) return false;
    }
    return true;
  }

  std::optional<int64_t> site_index_of(const std::array<double, 3>& t) const {
    int64_t idx = 0, mult = 1;
    for (int j = 0; j < dim; ++j) {
      const double steps = (t[j] - lo[j]) / spacing;
      const int64_t k = (int64_t)std::floor(steps + 0.5);
      if (k < 0 || k >= counts[j] || std::fabs(steps - (double)k) > 1e-6) return std::nullopt;
      idx += k * mult;
      mult *= counts[j];
    }
    return idx;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int j = 0; j < dim; ++j) v *= spacing;
    return v;
  }
};

// Sampled d-component field on a lattice with provenance.
struct FieldSample {
  Lattice lattice;
  int components = 1;
  std::vector<double> values;  // site-major: values[site*components + j]
  uint64_t seed = 0;
  std::optional<std::pair<double, double>> band;

  double value(int64_t site, int comp) const { return values[site * components + comp]; }
  double& value(int64_t site, int comp) { return values[site * components + comp]; }

  double norm_at(int64_t site) const {
    double s = 0;
    for (int j = 0; j < components; ++j) s += sq(value(site, j));
    return std::sqrt(s);
  }
};

// --------------------------- serialization --------------------------------
// Binary container: magic "CFLD1", params, lattice, seed, band, then the
// little-endian float64 value array. CSV export: site coordinates then
// component values, '.' decimal, LF endings.

namespace detail {
template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw domain_error("CFLD1: truncated stream");
  return v;
}
}  // namespace detail

inline void write_cfld(std::ostream& os, const FieldSample& fs, const FieldParams& p) {
  os.write("CFLD1", 5);
  detail::put<uint32_t>(os, (uint32_t)p.N);
  detail::put<uint32_t>(os, (uint32_t)p.d);
  detail::put<double>(os, p.H);
  detail::put<double>(os, p.gamma);
  detail::put<double>(os, p.delta0);
  detail::put<uint32_t>(os, (uint32_t)fs.lattice.dim);
  for (int j = 0; j < fs.lattice.dim; ++j) detail::put<double>(os, fs.lattice.lo[j]);
  for (int j = 0; j < fs.lattice.dim; ++j) detail::put<double>(os, fs.lattice.hi[j]);
  detail::put<double>(os, fs.lattice.spacing);
  detail::put<uint64_t>(os, fs.seed);
  detail::put<uint8_t>(os, fs.band ? 1 : 0);
  detail::put<double>(os, fs.band ? fs.band->first : 0.0);
  detail::put<double>(os, fs.band ? fs.band->second : 0.0);
  detail::put<uint32_t>(os, (uint32_t)fs.components);
  detail::put<uint64_t>(os, (uint64_t)fs.values.size());
  os.write(reinterpret_cast<const char*>(fs.values.data()),
           (std::streamsize)(fs.values.size() * sizeof(double)));
}

inline std::pair<FieldSample, FieldParams> read_cfld(std::istream& is) {
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "CFLD1", 5) != 0) throw domain_error("CFLD1: bad magic");
  FieldParams p;
  p.N = (int)detail::get<uint32_t>(is);
  p.d = (int)detail::get<uint32_t>(is);
  p.H = detail::get<double>(is);
  p.gamma = detail::get<double>(is);
  p.delta0 = detail::get<double>(is);
  p.validate();
  const int dim = (int)detail::get<uint32_t>(is);
  std::array<double, 3> lo{{0, 0, 0}}, hi{{0, 0, 0}};
  for (int j = 0; j < dim; ++j) lo[j] = detail::get<double>(is);
  for (int j = 0; j < dim; ++j) hi[j] = detail::get<double>(is);
  const double spacing = detail::get<double>(is);
  FieldSample fs;
  fs.lattice = Lattice::box(dim, lo, hi, spacing);
  fs.seed = detail::get<uint64_t>(is);
  const bool has_band = detail::get<uint8_t>(is) != 0;
  const double a = detail::get<double>(is);
  const double b = detail::get<double>(is);
  if (has_band) fs.band = {a, b};
  fs.components = (int)detail::get<uint32_t>(is);
  const uint64_t count = detail::get<uint64_t>(is);
  if (count != (uint64_t)fs.lattice.site_count() * (uint64_t)fs.components) {
    throw domain_error("CFLD1: value count mismatch");
  }
  fs.values.resize(count);
  is.read(reinterpret_cast<char*>(fs.values.data()), (std::streamsize)(count * sizeof(double)));
  if (!is) throw domain_error("CFLD1: truncated values");
  return {std::move(fs), p};
}

inline void write_csv(std::ostream& os, const FieldSample& fs) {
  for (int j = 0; j < fs.lattice.dim; ++j) os << "t" << (j + 1) << ",";
  for (int j = 0; j < fs.components; ++j) os << "x" << (j + 1) << (j + 1 < fs.components ? "," : "");
  os << "\n";
  const int64_t n = fs.lattice.site_count();
  for (int64_t i = 0; i < n; ++i) {
    const auto t = fs.lattice.site(i);
    for (int j = 0; j < fs.lattice.dim; ++j) os << format_double(t[j]) << ",";
    for (int j = 0; j < fs.components; ++j) {
      os << format_double(fs.value(i, j)) << (j + 1 < fs.components ? "," : "");
    }
    os << "\n";
  }
}

}  // namespace critfield
