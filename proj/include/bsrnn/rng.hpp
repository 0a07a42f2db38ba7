// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_RNG_HPP_
#define BSRNN_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace bsrnn {

// Deterministic generators with fixed output mapping, so that example streams
// and weight initialisation are reproducible across standard libraries.
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes an arbitrary number of seed words into one 64-bit stream seed.
inline uint64_t mix_seed(uint64_t a) {
  uint64_t s = a;
  return splitmix64(s);
}
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t s = a;
  uint64_t h = splitmix64(s);
  s = h ^ b;
  return splitmix64(s);
}
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  uint64_t s = mix_seed(a, b) ^ c;
  return splitmix64(s);
}

// xoshiro-free, allocation-free stream generator built on splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one value per call (the pair's second member is dropped to
  // keep the stream position independent of call parity).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace bsrnn

#endif  // BSRNN_RNG_HPP_
