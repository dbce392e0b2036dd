// Deterministic random streams. All randomness in the library flows through
// RngStream so that results depend only on (seed, derivation path) and are
// identical across platforms; std::random distributions are avoided because
// their output is implementation-defined.
#pragma once

#include <cstdint>

namespace cecl {

// splitmix64 generator state. Small, fast, and fully specified.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  // Independent substream for record `index` under a global seed.
  static RngStream derive(std::uint64_t seed, std::uint64_t index) {
    RngStream mixer(seed ^ (0x9e3779b97f4a7c15ULL + index));
    mixer.next_u64();
    return RngStream(mixer.next_u64());
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace cecl
