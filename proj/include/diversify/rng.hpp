#pragma once

// Pinned deterministic PRNG. <random> engines are portable but the standard
// distributions are implementation-defined, so a seeded run would not
// reproduce byte-identical artifacts across standard libraries. Everything
// random in this project draws from this generator instead.

#include <cstdint>
#include <vector>

namespace diversify {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// xoshiro256++ seeded through splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t st = seed;
    for (auto& word : s_) word = splitmix64(st);
  }

  // Independent stream derived from (seed, stream). Used to decouple draw
  // sequences that must not disturb each other (e.g. noise draws vs. the
  // final ordering shuffle).
  static Rng derive(uint64_t seed, uint64_t stream) {
    uint64_t st = seed;
    uint64_t a = splitmix64(st);
    uint64_t b = splitmix64(st);
    return Rng(a ^ (b + 0x9E3779B97F4A7C15ull * (stream + 1)));
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, bound), bound >= 1. Lemire's unbiased multiply-shift.
  uint64_t below(uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto lo = static_cast<uint64_t>(m);
    if (lo < bound) {
      const uint64_t threshold = -bound % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Uniform double in [0, 1) with 53 significant bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Always consumes exactly one draw, so p = 0 and p = 1 are exact without
  // perturbing the stream for later draws.
  bool bernoulli(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      using std::swap;
      swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

// Stream ids for Rng::derive. Centralized so streams cannot collide.
inline constexpr uint64_t kStreamProgram = 0;
inline constexpr uint64_t kStreamNoise = 1;
inline constexpr uint64_t kStreamShuffle = 2;
inline constexpr uint64_t kStreamPermBase = 3;
inline constexpr uint64_t kStreamQueue = 4;
inline constexpr uint64_t kStreamBernoulliBase = 16;  // + pattern index

}  // namespace diversify
