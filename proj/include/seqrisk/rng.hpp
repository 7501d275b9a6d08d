// Deterministic random number generation. Every stochastic component in the
// toolkit draws from this wrapper so that a (seed, stream) pair fully fixes
// the outcome on any platform.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace seqrisk {

// splitmix64; used to mix seeds and derive independent child streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d4d049bb133111ull;
  return z ^ (z >> 31);
}

// mt19937_64 core (the engine update is pinned by the C++ standard), with
// hand-rolled draws on top.  std::uniform_real_distribution and friends are
// implementation-defined, so they are avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed;
    std::uint64_t mix = splitmix64(s);
    s = mix ^ (0x6a09e667f3bcc909ull + stream * 0x9e3779b97f4a7c15ull);
    engine_.seed(splitmix64(s));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Inclusive range draw.
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    return lo + below(hi - lo + 1);
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace seqrisk
