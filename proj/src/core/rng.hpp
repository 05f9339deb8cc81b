#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "core/common.hpp"

namespace mc {

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Seeded generator (splitmix64-expanded xoshiro256**). Every random draw in
// the library goes through this type, never through std:: distributions whose
// output is implementation-defined, so a given seed yields the same draw
// sequence on every run and platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : s_) word = detail::splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer on the inclusive range [lo, hi].
  int64_t uniform_int(int64_t lo, int64_t hi) {
    MC_CHECK(lo <= hi, "uniform_int: empty range");
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const auto wide = static_cast<unsigned __int128>(next_u64()) * span;
    return lo + static_cast<int64_t>(wide >> 64);
  }

  // Standard normal via Marsaglia's polar method (sqrt/log only).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Independent child stream; advancing the child never touches the parent.
  Rng fork() { return Rng(mix(next_u64(), 0x5EED5EED5EED5EEDULL)); }

  // Hash-combine for derived streams (per-epoch, per-utterance, per-purpose).
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 0x100000001b3ULL);
    return detail::splitmix64(x);
  }

  static uint64_t mix(std::initializer_list<uint64_t> parts) {
    uint64_t acc = 0x243f6a8885a308d3ULL;
    for (uint64_t p : parts) acc = mix(acc, p);
    return acc;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mc
