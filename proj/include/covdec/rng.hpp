#pragma once

// Counter-seeded random streams for reproducible Monte Carlo.
//
// Each trajectory gets its own xoshiro256++ stream derived from
// (master_seed, stream_index) through SplitMix64, so results are independent
// of thread scheduling: trajectory k always consumes exactly the same random
// sequence no matter which worker runs it.  Distributions (uniform, normal,
// exponential) are implemented here rather than via <random> because the
// standard library's distribution algorithms are implementation-defined and
// would break bit-reproducibility across standard libraries.

#include <cstdint>

#include "covdec/common.hpp"

namespace covdec {

// SplitMix64 step (Vigna's public-domain construction); also usable as a
// stateless 64-bit mixer.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Xoshiro256pp {
 public:
  // Stream `stream` of the family identified by `master_seed`.  The golden
  // gamma offset keeps nearby stream indices statistically independent.
  Xoshiro256pp(std::uint64_t master_seed, std::uint64_t stream) {
    std::uint64_t sm = master_seed + stream * 0x9E3779B97F4A7C15ULL;
    for (auto& w : s_) w = splitmix64_next(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // never all-zero
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Random stream with the distributions the library needs.  Every draw maps a
// fixed number of engine outputs to a value through explicit arithmetic, so a
// given (master_seed, stream) pair yields the same sequence on every run.
class Rng {
 public:
  Rng(std::uint64_t master_seed, std::uint64_t stream = 0)
      : engine_(master_seed, stream) {}

  std::uint64_t next_u64() { return engine_.next(); }

  // Uniform on [0,1): 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_.next() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0,1): midpoint offset keeps 0 out of range (safe for log).
  double uniform_pos() {
    return (static_cast<double>(engine_.next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Exponential with unit rate.
  double exponential() { return -std::log(uniform_pos()); }

 private:
  Xoshiro256pp engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace covdec
