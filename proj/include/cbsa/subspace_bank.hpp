#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cbsa/matrix.hpp"

namespace cbsa {

// K mutually orthogonal d x p orthonormal bases with p * K == d.
class SubspaceBank {
 public:
  // Validates orthonormality and mutual orthogonality to `tol` (max abs entry
  // of U_i^T U_j - delta_ij I).
  explicit SubspaceBank(std::vector<Matrix> bases, double tol = 1e-8);

  // Canonical split of I_d into K consecutive coordinate blocks.
  static SubspaceBank coordinate(std::size_t d, std::size_t heads);
  // Splits the columns of a d x d orthogonal matrix into K blocks.
  static SubspaceBank from_orthogonal(const Matrix& u, std::size_t heads, double tol = 1e-8);
  // Random orthogonal d x d (Gram-Schmidt on a seeded Gaussian draw), split into K blocks.
  static SubspaceBank random(std::size_t d, std::size_t heads, std::uint64_t seed);

  std::size_t ambient_dim() const { return d_; }
  std::size_t subspace_dim() const { return p_; }
  std::size_t heads() const { return bases_.size(); }
  const Matrix& basis(std::size_t k) const { return bases_.at(k); }
  const std::vector<Matrix>& bases() const { return bases_; }

  // U_k^T z, p x N.
  Matrix project(std::size_t k, const Matrix& z) const;

 private:
  std::vector<Matrix> bases_;
  std::size_t d_ = 0;
  std::size_t p_ = 0;
};

// Largest deviation of the stacked Gram [U_i^T U_j] from the identity. Useful
// for perturbed or learned banks that are only approximately incoherent.
double incoherence(const std::vector<Matrix>& bases);

}  // namespace cbsa
