#pragma once
#include <cstdint>

namespace pfn {

// Counter-based generator: the k-th draw is a pure function of (seed, k),
// so any consumer can be reproduced from its seed alone, independent of
// thread placement or call site.
struct SeededRng {
  uint64_t seed = 0;
  uint64_t counter = 0;
  bool have_spare = false;
  double spare = 0.0;

  SeededRng() = default;
  explicit SeededRng(uint64_t s) : seed(s) {}

  static uint64_t mix(uint64_t z);

  uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds
  double normal();                         // standard normal, Box-Muller

  // Child stream decorrelated from this one; counter starts at zero.
  SeededRng fork(uint64_t k) const;
};

}  // namespace pfn
