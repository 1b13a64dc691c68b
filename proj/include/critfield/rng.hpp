#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace critfield {

// splitmix64 finalizer (Steele/Lea/Flood; Vigna's constants).
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

// Counter-based generator: output i of stream k is mix64(k + i*GAMMA).
// Streams are cheap to derive by hashing ids, so replication-parallel
// Monte Carlo needs no communication and replays bit-identically.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  uint64_t next_u64() { return mix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

  // uniform in (0,1), never exactly 0 or 1
  double uniform01() {
    const uint64_t x = next_u64();
    return ((double)(x >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller pair
  std::pair<double, double> normal_pair() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    auto [g1, g2] = normal_pair();
    spare_ = g2;
    has_spare_ = true;
    return g1;
  }

  // integer in [0, n)
  uint64_t below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream ids: hash of (seed, a, b, c). Disjoint id tuples give independent
// streams; identical tuples replay the same sequence.
inline CounterRng make_stream(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
  uint64_t k = mix64(seed);
  k = hash_combine(k, a);
  k = hash_combine(k, b);
  k = hash_combine(k, c);
  return CounterRng(k);
}

}  // namespace critfield
