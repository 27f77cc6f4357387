#include "cbsa/subspace_bank.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cbsa/linalg.hpp"
#include "cbsa/rng.hpp"

namespace cbsa {

double incoherence(const std::vector<Matrix>& bases) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (std::size_t j = i; j < bases.size(); ++j) {
      const Matrix g = matmul_tn(bases[i], bases[j]);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) {
          const double target = (i == j && r == c) ? 1.0 : 0.0;
          worst = std::max(worst, std::abs(g(r, c) - target));
        }
    }
  }
  return worst;
}

SubspaceBank::SubspaceBank(std::vector<Matrix> bases, double tol) : bases_(std::move(bases)) {
  if (bases_.empty()) throw std::invalid_argument("SubspaceBank: need at least one basis");
  d_ = bases_.front().rows();
  p_ = bases_.front().cols();
  for (std::size_t k = 0; k < bases_.size(); ++k) {
    if (bases_[k].rows() != d_ || bases_[k].cols() != p_) {
      throw DimensionError("SubspaceBank: basis " + std::to_string(k) + " is " +
                           bases_[k].shape() + ", expected " + bases_.front().shape());
    }
  }
  if (p_ * bases_.size() != d_) {
    throw DimensionError("SubspaceBank: p * K = " + std::to_string(p_ * bases_.size()) +
                         " must equal d = " + std::to_string(d_));
  }
  const double dev = incoherence(bases_);
  if (dev > tol) {
    throw std::invalid_argument("SubspaceBank: bases deviate from orthonormal incoherence by " +
                                std::to_string(dev));
  }
}

SubspaceBank SubspaceBank::coordinate(std::size_t d, std::size_t heads) {
  return from_orthogonal(Matrix::identity(d), heads);
}

SubspaceBank SubspaceBank::from_orthogonal(const Matrix& u, std::size_t heads, double tol) {
  if (!u.is_square()) throw DimensionError("from_orthogonal: expected square, got " + u.shape());
  if (heads == 0 || u.cols() % heads != 0) {
    throw DimensionError("from_orthogonal: " + std::to_string(heads) + " heads do not divide d = " +
                         std::to_string(u.cols()));
  }
  const std::size_t p = u.cols() / heads;
  std::vector<Matrix> bases;
  bases.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k) bases.push_back(u.cols_range(k * p, p));
  return SubspaceBank(std::move(bases), tol);
}

SubspaceBank SubspaceBank::random(std::size_t d, std::size_t heads, std::uint64_t seed) {
  Rng rng(seed);
  return from_orthogonal(random_orthonormal(rng, d, d), heads);
}

Matrix SubspaceBank::project(std::size_t k, const Matrix& z) const {
  if (z.rows() != d_) {
    throw DimensionError("SubspaceBank::project: tokens are " + z.shape() + ", bank expects " +
                         std::to_string(d_) + " rows");
  }
  return matmul_tn(bases_.at(k), z);
}

}  // namespace cbsa
