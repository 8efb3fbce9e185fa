#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dgwm {

// Seeded random source. All sampling goes through explicit methods on top of
// a mt19937_64 stream so that a given seed and call sequence reproduces the
// same values on every platform; std::*_distribution is avoided because its
// output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; consumes two uniforms per sample.
  double normal();
  // Uniform integer in [0, n).
  int uniform_int(int n);

  // n i.i.d. draws from N(0, variance). variance == 0 returns exact zeros
  // without consuming any engine state.
  std::vector<double> gaussian(std::size_t n, double variance);

  // Distinct draw of k indices from [0, n) when k <= n, otherwise k draws
  // with replacement.
  std::vector<int> sample_indices(int n, int k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace dgwm
