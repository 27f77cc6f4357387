#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cbsa {

// Cost of one attention layer summed over heads. A product of an a x b by a
// b x c matrix costs a*b*c (one multiply-add each). Softmax, normalization and
// pooling are not counted.
struct CostBreakdown {
  std::int64_t total = 0;
  std::int64_t extraction = 0;       // token/representative similarities, N m d
  std::int64_t contraction = 0;      // representative Gram (m^2 d), or the token Gram for MSSA
  std::int64_t broadcast = 0;        // contraction * A_k^T, N m d
  std::int64_t projection = 0;       // U_k^T Z, N d^2
  std::int64_t back_projection = 0;  // U_k (.), N d^2
  std::int64_t aggregation = 0;      // value-weighted sums not listed above
  std::int64_t pairwise_similarities = 0;

  std::int64_t component_sum() const {
    return projection + back_projection + extraction + contraction + broadcast + aggregation;
  }
};

CostBreakdown cost_mssa(std::int64_t n, std::int64_t d, std::int64_t heads);
CostBreakdown cost_cbsa(std::int64_t n, std::int64_t d, std::int64_t heads, std::int64_t m);

struct FlopsRow {
  std::string mechanism;  // "mssa" or "cbsa"
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::int64_t heads = 0;
  std::int64_t m = 0;
  CostBreakdown cost;
  bool crossover = false;  // MSSA and CBSA totals coincide at this N
};

// Two rows (mssa, cbsa) per N, in the order given.
std::vector<FlopsRow> sweep(const std::vector<std::int64_t>& n_values, std::int64_t d,
                            std::int64_t heads, std::int64_t m);

// Token counts for 16x16 patches on square images of side 128..1024, plus the
// N = 2p = 128 crossover point for d = 384, H = 6.
std::vector<std::int64_t> default_sweep_tokens();

}  // namespace cbsa
