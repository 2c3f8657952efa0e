#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gsa {

// All randomness in the project flows through this header so that datasets,
// training runs, and tests are reproducible bit-for-bit across platforms.
// std::mt19937 would also work, but the standard distributions on top of it
// are implementation-defined, which breaks cross-toolchain reproducibility.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** by Blackman & Vigna. 256-bit state, cheap to serialize into
// checkpoints and manifests.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  // Independent stream for (seed, salt), e.g. one stream per sample index.
  static Rng stream(uint64_t seed, uint64_t salt) {
    uint64_t sm = seed;
    uint64_t a = splitmix64(sm);
    sm = salt ^ 0x6a09e667f3bcc909ULL;
    uint64_t b = splitmix64(sm);
    Rng r;
    r.reseed(a ^ (b + 0x9e3779b97f4a7c15ULL));
    return r;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller. Consumes exactly two draws per call so
  // the state advance is independent of how results are used (no cached
  // spare that would have to live in checkpoints).
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> state_{};
};

}  // namespace gsa
