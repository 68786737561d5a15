#pragma once

#include <cmath>
#include <cstdint>

namespace hrc {

// Deterministic, platform-independent RNG. Trial seeds are derived from
// (base seed, stream id) with splitmix64 so every consumer gets an
// independent stream that does not depend on scheduling or call order
// elsewhere in the program.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t deriveSeed(uint64_t base, uint64_t stream) {
  uint64_t s = base ^ (0xa0761d6478bd642fULL * (stream + 1));
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (int i = 0; i < 4; ++i) s_[i] = splitmix64(sm);
  }

  // xoshiro256** core.
  uint64_t next() {
    auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
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

  // Uniform in [0, 1).
  double uniform() { return std::ldexp(static_cast<double>(next() >> 11), -53); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be > 0; modulo bias is irrelevant at our scales
  // but we reject the tail anyway to stay exactly uniform.
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

  int intBelow(int n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

  // Box-Muller without cached spare: two draws per call, state-free apart
  // from the engine, so interleaved consumers stay reproducible.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  uint64_t s_[4];
};

}  // namespace hrc
