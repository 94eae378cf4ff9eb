#pragma once

#include <cstdint>
#include <random>

#include "cfmimo/types.hpp"

namespace cfmimo {

// Seeded generator used for every random draw in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard.  Uniform variates take the top 53 bits of one engine output and
// normals use the Box-Muller transform, so draws are reproducible across
// standard library implementations (std::*_distribution are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi].
  double uniform(double lo, double hi);
  /// Standard normal.
  double normal();
  /// Circularly symmetric CN(0, 1): real and imaginary parts have variance 1/2.
  cdouble complex_normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfmimo
