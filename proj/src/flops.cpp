#include "cbsa/flops.hpp"

#include <stdexcept>

namespace cbsa {

namespace {

void check_dims(std::int64_t n, std::int64_t d, std::int64_t heads) {
  if (n <= 0 || d <= 0 || heads <= 0) throw std::invalid_argument("N, d, H must be positive");
  if (d % heads != 0) {
    throw std::invalid_argument("H = " + std::to_string(heads) + " does not divide d = " +
                                std::to_string(d));
  }
}

}  // namespace

CostBreakdown cost_mssa(std::int64_t n, std::int64_t d, std::int64_t heads) {
  check_dims(n, d, heads);
  CostBreakdown c;
  c.projection = n * d * d;
  c.back_projection = n * d * d;
  c.contraction = n * n * d;  // (U_k^T Z)^T (U_k^T Z) over all heads
  c.aggregation = n * n * d;  // (U_k^T Z) softmax(.)
  c.total = 2 * n * d * d + 2 * n * n * d;
  c.pairwise_similarities = heads * n * n;
  return c;
}

CostBreakdown cost_cbsa(std::int64_t n, std::int64_t d, std::int64_t heads, std::int64_t m) {
  check_dims(n, d, heads);
  if (m <= 0 || m > n) {
    throw std::invalid_argument("need 1 <= m <= N, got m = " + std::to_string(m));
  }
  CostBreakdown c;
  c.projection = n * d * d;
  c.back_projection = n * d * d;
  c.extraction = n * m * d;
  c.contraction = m * m * d;
  c.broadcast = n * m * d;
  // (U_k^T Z) A_k in extraction and Q_bar softmax(.) in contraction.
  c.aggregation = n * m * d + m * m * d;
  c.total = 2 * n * d * d + 3 * n * m * d + 2 * m * m * d;
  // The broadcast reuses A_k from extraction, so only extraction (N m) and
  // contraction (m^2) compute new similarities.
  c.pairwise_similarities = heads * (n * m + m * m);
  return c;
}

std::vector<FlopsRow> sweep(const std::vector<std::int64_t>& n_values, std::int64_t d,
                            std::int64_t heads, std::int64_t m) {
  std::vector<FlopsRow> rows;
  rows.reserve(2 * n_values.size());
  for (std::int64_t n : n_values) {
    const CostBreakdown full = cost_mssa(n, d, heads);
    const CostBreakdown cb = cost_cbsa(n, d, heads, m);
    const bool cross = full.total == cb.total;
    rows.push_back({"mssa", n, d, heads, m, full, cross});
    rows.push_back({"cbsa", n, d, heads, m, cb, cross});
  }
  return rows;
}

std::vector<std::int64_t> default_sweep_tokens() {
  return {64, 128, 196, 256, 576, 1024, 2304, 4096};
}

}  // namespace cbsa
