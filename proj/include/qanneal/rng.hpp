#pragma once

#include <cstdint>
#include <random>

namespace qanneal {

// Deterministic randomness utilities.  All stochastic behavior in the
// library flows through this header so that a master seed reproduces every
// artifact bit-for-bit, independent of platform and thread count.

// Stateless splitmix64 step; used to derive well-separated substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the seed of substream `index` from a master seed.  Parallel tasks
// (multi-starts, ensemble members, sweep models) each own the stream of
// their index, which makes results independent of execution order.
inline std::uint64_t fork_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

// mt19937_64 with explicit bit-to-double conversion.  The standard pins the
// mt19937_64 sequence; converting via the top 53 bits avoids the
// implementation-defined behavior of std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on [-1, 1).
  double uniform_symmetric() { return 2.0 * uniform() - 1.0; }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qanneal
