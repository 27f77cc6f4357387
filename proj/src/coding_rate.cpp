#include "cbsa/coding_rate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cbsa/linalg.hpp"

namespace cbsa {

void CodingRateConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be a positive finite number, got " +
                                std::to_string(epsilon));
  }
}

double coding_rate(const Matrix& z, const CodingRateConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<double>(z.rows());
  const auto n = static_cast<double>(z.cols());
  const double scale = d / (n * cfg.epsilon * cfg.epsilon);
  // logdet(I_N + c Z^T Z) == logdet(I_d + c Z Z^T).
  Matrix g = z.cols() <= z.rows() ? gram(z) : outer_gram(z);
  g *= scale;
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += 1.0;
  return 0.5 * logdet_psd(g);
}

Matrix normalize_columns(const Matrix& z) {
  Matrix out = z;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) norm += z(i, j) * z(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t i = 0; i < z.rows(); ++i) out(i, j) = z(i, j) / norm;
  }
  return out;
}

double coding_rate_normalized(const Matrix& z, const CodingRateConfig& cfg) {
  return coding_rate(normalize_columns(z), cfg);
}

std::vector<double> compression_term(const Matrix& z, const SubspaceBank& bank,
                                     const CodingRateConfig& cfg) {
  std::vector<double> rates(bank.heads());
  for (std::size_t k = 0; k < bank.heads(); ++k) rates[k] = coding_rate(bank.project(k, z), cfg);
  return rates;
}

Matrix coding_rate_gradient(const Matrix& q_bar, const CodingRateConfig& cfg) {
  cfg.validate();
  const double c = static_cast<double>(q_bar.rows()) /
                   (static_cast<double>(q_bar.cols()) * cfg.epsilon * cfg.epsilon);
  Matrix inner = gram(q_bar);
  inner *= c;
  for (std::size_t i = 0; i < inner.rows(); ++i) inner(i, i) += 1.0;
  Matrix g = matmul(q_bar, inv_psd(inner));
  g *= c;
  return g;
}

double reduced_coding_rate(const Matrix& before, const Matrix& after, const CodingRateConfig& cfg) {
  if (before.rows() != after.rows() || before.cols() != after.cols()) {
    throw DimensionError("reduced_coding_rate: shape mismatch " + before.shape() + " vs " +
                         after.shape());
  }
  return coding_rate(before, cfg) - coding_rate(after, cfg);
}

CodingRateReport coding_rate_report(const Matrix& z, const std::vector<Matrix>& head_representatives,
                                    const SubspaceBank& bank, const CodingRateConfig& cfg) {
  if (head_representatives.size() != bank.heads()) {
    throw DimensionError("coding_rate_report: " + std::to_string(head_representatives.size()) +
                         " representative projections for " + std::to_string(bank.heads()) +
                         " heads");
  }
  CodingRateReport report;
  report.ambient_rate = coding_rate(z, cfg);
  report.per_subspace_rates = compression_term(z, bank, cfg);
  double compression = 0.0;
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const double rq = coding_rate(head_representatives[k], cfg);
    report.representative_rates.push_back(rq);
    report.constraint_gaps.push_back(std::abs(rq - report.per_subspace_rates[k]));
    compression += report.per_subspace_rates[k];
  }
  report.delta_r = report.ambient_rate - compression;
  return report;
}

}  // namespace cbsa
