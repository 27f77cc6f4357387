#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbsa/coding_rate.hpp"
#include "cbsa/matrix.hpp"
#include "cbsa/subspace_bank.hpp"

namespace cbsa {

enum class Operator { exact, softmax, mssa, linear, channel, agent };

std::string_view to_string(Operator op);
Operator parse_operator(std::string_view name);

struct AttentionConfig {
  std::size_t d = 0;      // ambient dimension
  std::size_t heads = 0;  // K
  std::size_t p = 0;      // d / K
  std::size_t m = 0;      // representatives
  std::size_t n = 0;      // tokens
  double epsilon = 0.5;
  double kappa = 1.0;     // residual step; either sign

  // m == 0 selects the default m = p.
  static AttentionConfig make(std::size_t d, std::size_t heads, std::size_t n,
                              double epsilon = 0.5, double kappa = 1.0, std::size_t m = 0);

  void validate() const;
  // Throws DimensionError unless z is d x n and the bank matches (d, K, p).
  void check_compatible(const Matrix& z, const SubspaceBank& bank) const;
  CodingRateConfig coding() const { return {epsilon}; }
};

// Representatives Q (d x m) with per-head coefficients A_k (N x m) and the
// per-head projections U_k^T Q = (U_k^T Z) A_k.
struct RepresentativeSet {
  Matrix q;
  std::vector<Matrix> coeffs;
  std::vector<Matrix> head_q;
};

struct HeadTrace {
  Matrix tokens;           // U_k^T Z
  Matrix representatives;  // U_k^T Q
  Matrix contraction;      // contracted U_k^T Q, p x m
  Matrix broadcast;        // contraction * A_k^T, p x N
  int attention_rank = 0;  // numerical rank of A_k
};

struct CbsaTrace {
  std::vector<HeadTrace> heads;
};

enum class Contraction { exact, softmax, identity };

struct PipelineOptions {
  // Replaces U_k in the final back-projection (one d x p matrix per head).
  // Empty means the rigorous U_k.
  std::span<const Matrix> back_projection;
  CbsaTrace* trace = nullptr;
  double rank_tol = 1e-6;
};

// Mean of m contiguous token segments; earlier segments absorb the remainder.
Matrix init_representatives_pool(const Matrix& z, std::size_t m);

// A_k = softmax_cols((U_k^T Z)^T (U_k^T Q0)), U_k^T Q = (U_k^T Z) A_k.
RepresentativeSet extract_representatives(const Matrix& z, const Matrix& q0,
                                          const SubspaceBank& bank);

// Q = Z, A_k = I_N.
RepresentativeSet self_expressed_representatives(const Matrix& z, const SubspaceBank& bank);

// U_k^T Q = L_k Sigma_k, A_k = R_k from the thin SVD of U_k^T Z.
RepresentativeSet svd_representatives(const Matrix& z, const SubspaceBank& bank);

// Q_bar (I_m + p/(m eps^2) Q_bar^T Q_bar)^{-1}.
Matrix contract_exact(const Matrix& q_bar, double epsilon);
// Q_bar softmax_cols(Q_bar^T Q_bar).
Matrix contract_softmax(const Matrix& q_bar);

// sum_k B_k contract(U_k^T Q) A_k^T with B_k = U_k unless overridden.
Matrix contract_and_broadcast(const SubspaceBank& bank, const RepresentativeSet& reps,
                              Contraction contraction, double epsilon,
                              const PipelineOptions& opts = {});

Matrix cbsa_exact(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                  const PipelineOptions& opts = {});
Matrix cbsa_softmax(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                    const PipelineOptions& opts = {});
Matrix cbsa_agent(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                  const PipelineOptions& opts = {});

// sum_k U_k (U_k^T Z) softmax((U_k^T Z)^T (U_k^T Z)).
Matrix mssa(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg);

// f(lambda) = eps^2 / (eps^2 + lambda).
double spectral_gate(double lambda, double epsilon);
// F(C) = V diag(f(lambda)) V^T for symmetric PSD C.
Matrix spectral_map(const Matrix& c, double epsilon);

// sum_k U_k F((U_k^T Z)(U_k^T Z)^T) U_k^T Z.
Matrix cbsa_linear(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg);
// sum_k U_k D_k U_k^T Z, D_k = Diag(f(||u_ki^T Z||^2)).
Matrix cbsa_channel(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg);

Matrix apply_operator(Operator op, const Matrix& z, const SubspaceBank& bank,
                      const AttentionConfig& cfg, const PipelineOptions& opts = {});

// Z - kappa * op(Z).
Matrix residual_step(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                     Operator op, const PipelineOptions& opts = {});

// Count of singular values of `a` above tol * sigma_max.
int attention_rank_diagnostic(const Matrix& a, double tol = 1e-6);

}  // namespace cbsa
