#pragma once

// Seeded random streams. The Gaussian transform is written out explicitly
// (Marsaglia polar) instead of using std::normal_distribution so that a
// given seed produces the same stream on any standard library.

#include "safex/core.hpp"

#include <cstdint>
#include <random>

namespace safex {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from a master seed. Used to split
// work across runs/trials so results do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  splitmix64(s);
  s ^= 0x632be59bd9b4e019ull * (stream + 1);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  double standard_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
  }

 private:
  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Draw x ~ N(mean, cov) using the cached symmetric square root.
inline Vector sample_gaussian(const GaussianNoise& noise, Rng& rng) {
  Vector z(noise.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.standard_normal();
  return noise.mean + noise.sqrt_cov * z;
}

}  // namespace safex
