#pragma once

#include <cstdint>
#include <random>

#include "cbsa/matrix.hpp"

namespace cbsa {

// Seeded generator with portable transforms: std::mt19937_64 is fully
// specified by the standard, the distribution adaptors are not, so the
// uniform and Gaussian maps are done here to keep goldens stable across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // standard Gaussian (Box-Muller)
  std::uint64_t next_u64() { return engine_(); }

  Matrix gaussian(std::size_t rows, std::size_t cols, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Orthonormal copy of the columns of `m` (Gram-Schmidt, two passes). Throws if the columns are numerically dependent.
Matrix orthonormalize_columns(const Matrix& m);

// Random s x t matrix with orthonormal columns (t <= s).
Matrix random_orthonormal(Rng& rng, std::size_t s, std::size_t t);

}  // namespace cbsa
