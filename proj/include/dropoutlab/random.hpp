#pragma once

#include <cstdint>
#include <random>

namespace dropoutlab {

/// Seeded generator whose samplers are written out here rather than taken
/// from <random>'s distributions, whose algorithms are implementation
/// defined. std::mt19937_64 itself is fully specified by the standard, so
/// draws are identical on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double gamma(double shape);
  double beta(double a, double b);
  /// Poisson count; switches to a rounded normal approximation above
  /// lambda = 60.
  std::uint64_t poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace dropoutlab
