#pragma once

#include <cmath>
#include <cstdint>

namespace wsod {

// Deterministic generator with hand-rolled variate transforms so that
// sequences are identical across standard libraries. xoshiro-free: a
// splitmix64-seeded 64-bit mixer is plenty for synthetic data and noise.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [lo,hi] inclusive
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    // Box-Muller, one value per call (cached pair dropped for simplicity)
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Logistic(0,1): difference of two Gumbel(0,1) draws
  double logistic() {
    double u = uniform();
    if (u < 1e-15) u = 1e-15;
    if (u > 1.0 - 1e-15) u = 1.0 - 1e-15;
    return std::log(u / (1.0 - u));
  }

  // Independent child stream; mixing the stream id keeps scenes reproducible
  // regardless of generation order.
  Rng fork(std::uint64_t stream) const {
    Rng child(state_ ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
    child.next_u64();
    return child;
  }

 private:
  std::uint64_t state_;
};

}  // namespace wsod
