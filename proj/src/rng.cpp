#include "cbsa/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cbsa {

double Rng::uniform() {
  // Top 53 bits -> [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Matrix Rng::gaussian(std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stddev * normal();
  return m;
}

Matrix orthonormalize_columns(const Matrix& m) {
  Matrix q = m;
  const std::size_t rows = q.rows();
  for (std::size_t c = 0; c < q.cols(); ++c) {
    const double original = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < rows; ++i) s += q(i, c) * q(i, c);
      return std::sqrt(s);
    }();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < c; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < rows; ++i) dot += q(i, k) * q(i, c);
        for (std::size_t i = 0; i < rows; ++i) q(i, c) -= dot * q(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += q(i, c) * q(i, c);
    norm = std::sqrt(norm);
    if (!(norm > 1e-10 * std::max(original, 1e-300))) {
      throw std::invalid_argument("orthonormalize_columns: column " + std::to_string(c) +
                                  " is linearly dependent on earlier columns");
    }
    for (std::size_t i = 0; i < rows; ++i) q(i, c) /= norm;
  }
  return q;
}

Matrix random_orthonormal(Rng& rng, std::size_t s, std::size_t t) {
  if (t > s) throw DimensionError("random_orthonormal: need t <= s");
  return orthonormalize_columns(rng.gaussian(s, t));
}

}  // namespace cbsa
