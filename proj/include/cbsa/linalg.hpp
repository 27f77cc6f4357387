#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbsa/matrix.hpp"

namespace cbsa {

class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value);
  std::size_t pivot() const { return pivot_; }
  double value() const { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(int sweeps, double residual);
  double residual() const { return residual_; }
  int sweeps() const { return sweeps_; }

 private:
  int sweeps_;
  double residual_;
};

struct SymEig {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
};

struct SvdFactors {
  Matrix left;                  // s x t, orthonormal columns
  std::vector<double> singular; // t values, descending, nonnegative
  Matrix right;                 // n x t, orthonormal columns
};

// Dense product with a fixed i-k-j loop order; each output entry accumulates
// its terms in ascending k.
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a b^T without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// a^T a and a a^T.
Matrix gram(const Matrix& a);
Matrix outer_gram(const Matrix& a);

// Column-wise softmax with per-column max subtraction.
Matrix softmax_cols(const Matrix& x);

// Lower-triangular Cholesky factor. Throws NotPositiveDefinite on a non-positive pivot.
Matrix cholesky(const Matrix& x);
double logdet_psd(const Matrix& x);
Matrix inv_psd(const Matrix& x);

// Cyclic Jacobi. Stops when the off-diagonal Frobenius norm drops below
// 1e-12 * max(1, ||x||_F), or throws ConvergenceError after 100 sweeps.
SymEig sym_eig(const Matrix& x);

// Thin SVD through the eigendecomposition of the smaller Gram matrix.
SvdFactors thin_svd(const Matrix& x);

// Numerical rank: singular values above tol * sigma_max.
int numerical_rank(const Matrix& x, double tol = 1e-6);

// Flips each column so its largest-magnitude entry (first on ties) is positive.
// Returns the applied signs.
std::vector<double> canonicalize_column_signs(Matrix& m);

bool is_symmetric(const Matrix& x, double tol = 1e-10);

}  // namespace cbsa
