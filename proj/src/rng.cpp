#include "pfn/rng.hpp"

#include <cmath>

#include "pfn/error.hpp"

namespace pfn {

uint64_t SeededRng::mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint64_t SeededRng::next_u64() {
  ++counter;
  return mix(seed + 0x9E3779B97F4A7C15ull * counter);
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int64_t SeededRng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw ContractError("uniform_int: hi < lo");
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int64_t>(next_u64() % span);
}

double SeededRng::normal() {
  if (have_spare) {
    have_spare = false;
    return spare;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 6.283185307179586476925286766559 * u2;
  spare = r * std::sin(t);
  have_spare = true;
  return r * std::cos(t);
}

SeededRng SeededRng::fork(uint64_t k) const {
  return SeededRng(mix(seed ^ mix(k + 0x632BE59BD9B4E019ull)));
}

}  // namespace pfn
