#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cbsa/attention.hpp"
#include "cbsa/config.hpp"
#include "cbsa/flops.hpp"
#include "cbsa/matrix.hpp"
#include "cbsa/rng.hpp"

namespace cbsa {

// ---------------------------------------------------------------------------
// Synthetic 3-D subspace data

struct SyntheticDataset {
  Matrix points;                    // 3 x (classes * samples_per_class)
  std::vector<std::size_t> labels;  // class of each column, grouped contiguously
  std::size_t classes = 0;
  std::size_t samples_per_class = 0;

  Matrix class_points(std::size_t c) const;
};

// Each class lives on a random line through the origin of R^3: s * u with
// s ~ U(-1, 1), plus isotropic Gaussian noise of stddev cfg.noise, then every
// point is scaled to unit norm.
SyntheticDataset gen_synthetic(const ExperimentConfig& cfg);

// Fixed checkpoints {0, 1, 256, 512, 640, 768, 896, 1024}, truncated to the
// iteration budget; the final iteration is always included.
std::vector<std::size_t> demo_checkpoints(std::size_t iterations);

struct DemoResult {
  SyntheticDataset data;
  std::vector<std::size_t> checkpoints;
  std::vector<Matrix> snapshots;             // all points, one per checkpoint
  std::vector<std::vector<double>> rates;    // [class][checkpoint], normalized coding rate
  std::vector<bool> monotone;                // per class, non-increasing up to roundoff

  bool all_monotone() const;
  double worst_compression_ratio() const;    // max over classes of final / initial rate
};

// Per class, iterates Z <- Z - kappa * linear(Z) in the ambient space (one head, U = I_3).
DemoResult demo_synthetic(const ExperimentConfig& cfg);
void write_demo_csv(std::ostream& out, const DemoResult& result);

// ---------------------------------------------------------------------------
// Coding-rate traces across a stack of random-bank layers

struct HeadLayerStats {
  double rate_z = 0.0;      // R(U_k^T Z) at the layer input
  double rate_q = 0.0;      // R(U_k^T Q)
  double reduced_z = 0.0;   // R(U_k^T Z) - R(U_k^T Z - kappa * broadcast_k)
  double reduced_q = 0.0;   // R(U_k^T Q) - R(U_k^T Q - kappa * contraction_k)
  double gap = 0.0;         // |rate_q - rate_z|
  int attention_rank = 0;
};

struct LayerRecord {
  std::size_t layer = 0;           // 0 = input
  double rate = 0.0;               // R(Z)
  double rate_normalized = 0.0;
  double compression = 0.0;        // sum_k R(U_k^T Z) on this layer's bank
  std::vector<HeadLayerStats> heads;  // empty for layer 0
};

struct CodingRateTrace {
  std::vector<LayerRecord> rows;
  std::vector<double> head_correlation;  // Pearson over layers, reduced_z vs reduced_q
  double positive_fraction = 0.0;
  double kappa = 0.0;
};

// Representatives and contraction that realize `op` through the generic
// contract-and-broadcast pipeline; the broadcast output equals apply_operator.
std::pair<RepresentativeSet, Contraction> operator_representatives(Operator op, const Matrix& z,
                                                                   const SubspaceBank& bank,
                                                                   const AttentionConfig& cfg);

// Head-wise Q_k = Diag(row norms of U_k^T Z), A_k = row-normalized (U_k^T Z)^T.
RepresentativeSet channel_representatives(const Matrix& z, const SubspaceBank& bank);

// Unit-norm Gaussian tokens pushed through cfg.layers residual steps, each on
// a freshly drawn random bank.
CodingRateTrace trace_coding_rate(const ExperimentConfig& cfg);
void write_trace_csv(std::ostream& out, const CodingRateTrace& trace);

// Pearson correlation; NaN when either series is constant or shorter than 2.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Gradient checking

using GradientFn = std::function<Matrix(const Matrix&, const CodingRateConfig&)>;

struct GradCheckOptions {
  std::vector<std::pair<std::size_t, std::size_t>> shapes{{2, 3}, {8, 8}, {5, 12}};
  std::size_t instances_per_shape = 20;
  double step = 1e-5;
  double threshold = 1e-5;
  double epsilon = 0.5;
  std::uint64_t seed = 0;
  GradientFn gradient;  // empty = coding_rate_gradient
};

struct GradCheckReport {
  std::size_t instances = 0;
  double max_relative_error = 0.0;
  // Location of the worst entry.
  std::size_t worst_instance = 0;
  std::size_t worst_rows = 0, worst_cols = 0;
  std::size_t worst_row = 0, worst_col = 0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  bool passed = false;
};

// Relative error of an entry: |analytic - numeric| / max(||numeric||_inf, 1e-12).
Matrix finite_difference_gradient(const Matrix& q_bar, const CodingRateConfig& cfg, double step);
GradCheckReport grad_check(const GradCheckOptions& opts);

// ---------------------------------------------------------------------------
// Degeneration-chain equivalences

// Tokens whose per-head covariances (U_k^T Z)(U_k^T Z)^T are all diagonal.
Matrix diagonal_covariance_tokens(const SubspaceBank& bank, std::size_t n, Rng& rng);

struct VariantsReport {
  std::size_t instances = 0;
  double softmax_vs_mssa = 0.0;        // self-expressed cbsa_softmax vs mssa
  double exact_vs_inverse_mssa = 0.0;  // self-expressed cbsa_exact vs inverse form
  double svd_exact_vs_linear = 0.0;    // SVD representatives vs cbsa_linear
  double linear_vs_channel = 0.0;      // diagonal covariance construction
  double tol_softmax_vs_mssa = 1e-10;
  double tol_exact_vs_inverse_mssa = 1e-8;
  double tol_svd_exact_vs_linear = 1e-8;
  double tol_linear_vs_channel = 1e-10;
  bool passed = false;
};

VariantsReport variants_check(std::uint64_t seed, std::size_t instances = 10);

// ---------------------------------------------------------------------------
// FLOPs table

void write_flops_csv(std::ostream& out, const std::vector<FlopsRow>& rows);
std::vector<FlopsRow> read_flops_csv(std::istream& in);

}  // namespace cbsa
