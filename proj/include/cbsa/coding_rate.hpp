#pragma once

#include <vector>

#include "cbsa/matrix.hpp"
#include "cbsa/subspace_bank.hpp"

namespace cbsa {

struct CodingRateConfig {
  double epsilon = 0.5;  // quantization precision; must be > 0

  void validate() const;
};

struct CodingRateReport {
  double ambient_rate = 0.0;                 // R(Z)
  std::vector<double> per_subspace_rates;    // R(U_k^T Z)
  std::vector<double> representative_rates;  // R(U_k^T Q)
  std::vector<double> constraint_gaps;       // |R(U_k^T Q) - R(U_k^T Z)|, measured not enforced
  double delta_r = 0.0;                      // R(Z) - sum_k R(U_k^T Z)
};

// R(Z) = 1/2 logdet(I_N + d/(N eps^2) Z^T Z) for Z of shape d x N. Evaluated on
// whichever Gram side is smaller.
double coding_rate(const Matrix& z, const CodingRateConfig& cfg);

// Coding rate after scaling each nonzero column to unit norm.
double coding_rate_normalized(const Matrix& z, const CodingRateConfig& cfg);

// Unit-norm copy of z's columns; zero columns stay zero.
Matrix normalize_columns(const Matrix& z);

// [R(U_1^T Z), ..., R(U_K^T Z)].
std::vector<double> compression_term(const Matrix& z, const SubspaceBank& bank,
                                     const CodingRateConfig& cfg);

// Gradient of R(Q) with respect to Q (p x m):
//   c Q (I_m + c Q^T Q)^{-1},  c = p / (m eps^2).
Matrix coding_rate_gradient(const Matrix& q_bar, const CodingRateConfig& cfg);

// R(before) - R(after); positive when `after` is more compressed.
double reduced_coding_rate(const Matrix& before, const Matrix& after, const CodingRateConfig& cfg);

// Full report for tokens z and per-head representative projections U_k^T Q.
CodingRateReport coding_rate_report(const Matrix& z, const std::vector<Matrix>& head_representatives,
                                    const SubspaceBank& bank, const CodingRateConfig& cfg);

}  // namespace cbsa
