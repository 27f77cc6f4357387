#include "cbsa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cbsa/coding_rate.hpp"
#include "cbsa/csv.hpp"
#include "cbsa/linalg.hpp"

namespace cbsa {

// ---------------------------------------------------------------------------
// Synthetic data

Matrix SyntheticDataset::class_points(std::size_t c) const {
  return points.cols_range(c * samples_per_class, samples_per_class);
}

SyntheticDataset gen_synthetic(const ExperimentConfig& cfg) {
  if (cfg.classes == 0 || cfg.samples_per_class == 0) {
    throw std::invalid_argument("gen_synthetic: classes and samples_per_class must be positive");
  }
  if (cfg.noise < 0.0) throw std::invalid_argument("gen_synthetic: noise must be non-negative");
  Rng rng(cfg.seed);
  SyntheticDataset ds;
  ds.classes = cfg.classes;
  ds.samples_per_class = cfg.samples_per_class;
  ds.points = Matrix(3, cfg.classes * cfg.samples_per_class);
  ds.labels.reserve(ds.points.cols());
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const Matrix dir = random_orthonormal(rng, 3, 1);
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      const std::size_t col = c * cfg.samples_per_class + s;
      // Keep the coefficient away from zero so noiseless points stay on the line.
      double coef = rng.uniform(-1.0, 1.0);
      if (coef == 0.0) coef = 1.0;
      double norm = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        double v = coef * dir(i, 0);
        if (cfg.noise > 0.0) v += cfg.noise * rng.normal();
        ds.points(i, col) = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (std::size_t i = 0; i < 3; ++i) ds.points(i, col) /= norm;
      ds.labels.push_back(c);
    }
  }
  return ds;
}

std::vector<std::size_t> demo_checkpoints(std::size_t iterations) {
  std::vector<std::size_t> out;
  for (std::size_t t : {0, 1, 256, 512, 640, 768, 896, 1024})
    if (t <= iterations) out.push_back(t);
  if (out.back() != iterations) out.push_back(iterations);
  return out;
}

bool DemoResult::all_monotone() const {
  return std::all_of(monotone.begin(), monotone.end(), [](bool b) { return b; });
}

double DemoResult::worst_compression_ratio() const {
  double worst = 0.0;
  for (const auto& r : rates) worst = std::max(worst, r.back() / r.front());
  return worst;
}

// Once a class collapses onto its line the rate sits at a floor and only
// wiggles in the last few bits.
constexpr double kMonotoneSlack = 1e-9;

DemoResult demo_synthetic(const ExperimentConfig& cfg) {
  DemoResult result;
  result.data = gen_synthetic(cfg);
  result.checkpoints = demo_checkpoints(cfg.iterations);
  const std::size_t per = cfg.samples_per_class;
  const CodingRateConfig rate_cfg{cfg.epsilon};
  const SubspaceBank ambient = SubspaceBank::coordinate(3, 1);
  const AttentionConfig att = AttentionConfig::make(3, 1, per, cfg.epsilon, cfg.kappa, std::min<std::size_t>(3, per));

  result.snapshots.assign(result.checkpoints.size(), result.data.points);
  result.rates.assign(cfg.classes, std::vector<double>(result.checkpoints.size(), 0.0));
  result.monotone.assign(cfg.classes, true);

  for (std::size_t c = 0; c < cfg.classes; ++c) {
    Matrix z = result.data.class_points(c);
    std::size_t next = 0;
    for (std::size_t t = 0; t <= cfg.iterations; ++t) {
      if (t > 0) z = residual_step(z, ambient, att, Operator::linear);
      if (next < result.checkpoints.size() && result.checkpoints[next] == t) {
        Matrix& snap = result.snapshots[next];
        for (std::size_t i = 0; i < 3; ++i)
          for (std::size_t j = 0; j < per; ++j) snap(i, c * per + j) = z(i, j);
        result.rates[c][next] = coding_rate_normalized(z, rate_cfg);
        if (next > 0) {
          const double prev = result.rates[c][next - 1];
          if (result.rates[c][next] > prev + kMonotoneSlack * std::max(1.0, std::abs(prev)))
            result.monotone[c] = false;
        }
        ++next;
      }
    }
  }
  return result;
}

void write_demo_csv(std::ostream& out, const DemoResult& result) {
  csv::write_row(out, {"iteration", "class", "sample", "x", "y", "z", "class_normalized_rate"});
  const std::size_t per = result.data.samples_per_class;
  for (std::size_t k = 0; k < result.checkpoints.size(); ++k) {
    const Matrix& snap = result.snapshots[k];
    for (std::size_t c = 0; c < result.data.classes; ++c) {
      const std::string rate = csv::format_real(result.rates[c][k]);
      for (std::size_t s = 0; s < per; ++s) {
        const std::size_t col = c * per + s;
        csv::write_row(out, {std::to_string(result.checkpoints[k]), std::to_string(c),
                             std::to_string(s), csv::format_real(snap(0, col)),
                             csv::format_real(snap(1, col)), csv::format_real(snap(2, col)), rate});
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Coding-rate traces

RepresentativeSet channel_representatives(const Matrix& z, const SubspaceBank& bank) {
  RepresentativeSet reps;
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const Matrix zk = bank.project(k, z);
    Matrix q(zk.rows(), zk.rows());
    Matrix a(zk.cols(), zk.rows());
    for (std::size_t i = 0; i < zk.rows(); ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < zk.cols(); ++j) norm += zk(i, j) * zk(i, j);
      norm = std::sqrt(norm);
      q(i, i) = norm;
      if (norm > 0.0)
        for (std::size_t j = 0; j < zk.cols(); ++j) a(j, i) = zk(i, j) / norm;
    }
    reps.head_q.push_back(std::move(q));
    reps.coeffs.push_back(std::move(a));
  }
  reps.q = Matrix(bank.ambient_dim(), bank.subspace_dim());
  for (std::size_t k = 0; k < bank.heads(); ++k) reps.q += matmul(bank.basis(k), reps.head_q[k]);
  return reps;
}

std::pair<RepresentativeSet, Contraction> operator_representatives(Operator op, const Matrix& z,
                                                                   const SubspaceBank& bank,
                                                                   const AttentionConfig& cfg) {
  cfg.check_compatible(z, bank);
  switch (op) {
    case Operator::exact:
    case Operator::softmax:
    case Operator::agent: {
      RepresentativeSet reps = extract_representatives(z, init_representatives_pool(z, cfg.m), bank);
      const Contraction c = op == Operator::exact     ? Contraction::exact
                            : op == Operator::softmax ? Contraction::softmax
                                                      : Contraction::identity;
      return {std::move(reps), c};
    }
    case Operator::mssa: return {self_expressed_representatives(z, bank), Contraction::softmax};
    case Operator::linear: return {svd_representatives(z, bank), Contraction::exact};
    case Operator::channel: return {channel_representatives(z, bank), Contraction::exact};
  }
  throw std::logic_error("unhandled operator");
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

CodingRateTrace trace_coding_rate(const ExperimentConfig& cfg) {
  cfg.validate();
  CodingRateTrace trace;
  trace.kappa = cfg.fig5_mode ? 1.0 : cfg.kappa;
  const AttentionConfig att =
      AttentionConfig::make(cfg.d, cfg.heads, cfg.n, cfg.epsilon, trace.kappa, cfg.m);
  const CodingRateConfig rate_cfg{cfg.epsilon};

  Rng rng(cfg.seed);
  Matrix z = normalize_columns(rng.gaussian(cfg.d, cfg.n));
  std::vector<SubspaceBank> banks;
  for (std::size_t l = 0; l < std::max<std::size_t>(cfg.layers, 1); ++l) {
    banks.push_back(SubspaceBank::random(cfg.d, cfg.heads, rng.next_u64()));
  }

  auto stats = [&](std::size_t layer, const Matrix& tokens, const SubspaceBank& bank) {
    LayerRecord rec;
    rec.layer = layer;
    rec.rate = coding_rate(tokens, rate_cfg);
    rec.rate_normalized = coding_rate_normalized(tokens, rate_cfg);
    for (double r : compression_term(tokens, bank, rate_cfg)) rec.compression += r;
    return rec;
  };

  trace.rows.push_back(stats(0, z, banks.front()));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const SubspaceBank& bank = banks[l];
    auto [reps, contraction] = operator_representatives(cfg.op, z, bank, att);
    CbsaTrace heads;
    PipelineOptions opts;
    opts.trace = &heads;
    Matrix update = contract_and_broadcast(bank, reps, contraction, cfg.epsilon, opts);
    std::vector<HeadLayerStats> head_stats;
    for (std::size_t k = 0; k < bank.heads(); ++k) {
      const HeadTrace& h = heads.heads[k];
      const Matrix zk = bank.project(k, z);
      HeadLayerStats s;
      s.rate_z = coding_rate(zk, rate_cfg);
      s.rate_q = coding_rate(h.representatives, rate_cfg);
      s.reduced_z = reduced_coding_rate(zk, zk - trace.kappa * h.broadcast, rate_cfg);
      s.reduced_q = reduced_coding_rate(h.representatives,
                                        h.representatives - trace.kappa * h.contraction, rate_cfg);
      s.gap = std::abs(s.rate_q - s.rate_z);
      s.attention_rank = h.attention_rank;
      head_stats.push_back(s);
    }
    update *= trace.kappa;
    z -= update;
    LayerRecord rec = stats(l + 1, z, bank);
    rec.heads = std::move(head_stats);
    trace.rows.push_back(std::move(rec));
  }

  std::size_t positive = 0;
  for (std::size_t k = 0; k < cfg.heads; ++k) {
    std::vector<double> rz, rq;
    for (std::size_t r = 1; r < trace.rows.size(); ++r) {
      rz.push_back(trace.rows[r].heads[k].reduced_z);
      rq.push_back(trace.rows[r].heads[k].reduced_q);
    }
    const double corr = pearson(rz, rq);
    trace.head_correlation.push_back(corr);
    if (corr > 0.0) ++positive;
  }
  trace.positive_fraction = static_cast<double>(positive) / static_cast<double>(cfg.heads);
  return trace;
}

void write_trace_csv(std::ostream& out, const CodingRateTrace& trace) {
  const std::size_t heads = trace.head_correlation.size();
  csv::Row header{"layer", "rate", "rate_normalized", "compression"};
  for (std::size_t k = 0; k < heads; ++k) {
    const std::string h = "head" + std::to_string(k) + "_";
    for (const char* f : {"rate_z", "rate_q", "reduced_z", "reduced_q", "gap", "rank"})
      header.push_back(h + f);
  }
  csv::write_row(out, header);
  for (const LayerRecord& rec : trace.rows) {
    csv::Row row{std::to_string(rec.layer), csv::format_real(rec.rate),
                 csv::format_real(rec.rate_normalized), csv::format_real(rec.compression)};
    for (std::size_t k = 0; k < heads; ++k) {
      if (rec.heads.empty()) {
        row.insert(row.end(), 6, "");
        continue;
      }
      const HeadLayerStats& s = rec.heads[k];
      row.push_back(csv::format_real(s.rate_z));
      row.push_back(csv::format_real(s.rate_q));
      row.push_back(csv::format_real(s.reduced_z));
      row.push_back(csv::format_real(s.reduced_q));
      row.push_back(csv::format_real(s.gap));
      row.push_back(std::to_string(s.attention_rank));
    }
    csv::write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

Matrix finite_difference_gradient(const Matrix& q_bar, const CodingRateConfig& cfg, double step) {
  Matrix g(q_bar.rows(), q_bar.cols());
  Matrix probe = q_bar;
  for (std::size_t i = 0; i < q_bar.rows(); ++i) {
    for (std::size_t j = 0; j < q_bar.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = coding_rate(probe, cfg);
      probe(i, j) = orig - step;
      const double down = coding_rate(probe, cfg);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

GradCheckReport grad_check(const GradCheckOptions& opts) {
  const CodingRateConfig cfg{opts.epsilon};
  const GradientFn gradient = opts.gradient ? opts.gradient : GradientFn(coding_rate_gradient);
  Rng rng(opts.seed);
  GradCheckReport report;
  bool located = false;
  for (const auto& [rows, cols] : opts.shapes) {
    for (std::size_t inst = 0; inst < opts.instances_per_shape; ++inst) {
      const Matrix q = rng.gaussian(rows, cols);
      const Matrix analytic = gradient(q, cfg);
      const Matrix numeric = finite_difference_gradient(q, cfg, opts.step);
      const double scale = std::max(numeric.max_abs(), 1e-12);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          const double err = std::abs(analytic(i, j) - numeric(i, j)) / scale;
          if (!located || err > report.max_relative_error) {
            located = true;
            report.max_relative_error = err;
            report.worst_instance = report.instances;
            report.worst_rows = rows;
            report.worst_cols = cols;
            report.worst_row = i;
            report.worst_col = j;
            report.worst_analytic = analytic(i, j);
            report.worst_numeric = numeric(i, j);
          }
        }
      }
      ++report.instances;
    }
  }
  report.passed = report.max_relative_error < opts.threshold;
  return report;
}

// ---------------------------------------------------------------------------
// Degeneration chain

Matrix diagonal_covariance_tokens(const SubspaceBank& bank, std::size_t n, Rng& rng) {
  const std::size_t p = bank.subspace_dim();
  if (n < p) throw DimensionError("diagonal_covariance_tokens: need N >= p");
  Matrix z(bank.ambient_dim(), n);
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    // Rows of U_k^T Z are scaled orthonormal vectors, so their Gram is diagonal.
    const Matrix w = random_orthonormal(rng, n, p);  // n x p
    Matrix coeff(p, n);
    for (std::size_t i = 0; i < p; ++i) {
      const double scale = 0.5 + 2.0 * rng.uniform();
      for (std::size_t j = 0; j < n; ++j) coeff(i, j) = scale * w(j, i);
    }
    z += matmul(bank.basis(k), coeff);
  }
  return z;
}

VariantsReport variants_check(std::uint64_t seed, std::size_t instances) {
  constexpr std::size_t d = 12, heads = 3, n = 16, m = 4;
  constexpr double eps = 0.5;
  const AttentionConfig cfg = AttentionConfig::make(d, heads, n, eps, 1.0, m);
  VariantsReport rep;
  rep.instances = instances;
  Rng rng(seed);
  for (std::size_t t = 0; t < instances; ++t) {
    const SubspaceBank bank = SubspaceBank::random(d, heads, rng.next_u64());
    const Matrix z = rng.gaussian(d, n);

    const RepresentativeSet self = self_expressed_representatives(z, bank);
    rep.softmax_vs_mssa = std::max(
        rep.softmax_vs_mssa,
        max_abs_diff(contract_and_broadcast(bank, self, Contraction::softmax, eps), mssa(z, bank, cfg)));

    // Push-through form: Z_k (I_N + c Z_k^T Z_k)^{-1} = (I_p + c Z_k Z_k^T)^{-1} Z_k.
    Matrix inverse_form(d, n);
    const double c = static_cast<double>(bank.subspace_dim()) / (static_cast<double>(n) * eps * eps);
    for (std::size_t k = 0; k < heads; ++k) {
      const Matrix zk = bank.project(k, z);
      Matrix inner = outer_gram(zk);
      inner *= c;
      for (std::size_t i = 0; i < inner.rows(); ++i) inner(i, i) += 1.0;
      inverse_form += matmul(bank.basis(k), matmul(inv_psd(inner), zk));
    }
    rep.exact_vs_inverse_mssa = std::max(
        rep.exact_vs_inverse_mssa,
        max_abs_diff(contract_and_broadcast(bank, self, Contraction::exact, eps), inverse_form));

    const RepresentativeSet svd = svd_representatives(z, bank);
    rep.svd_exact_vs_linear = std::max(
        rep.svd_exact_vs_linear,
        max_abs_diff(contract_and_broadcast(bank, svd, Contraction::exact, eps), cbsa_linear(z, bank, cfg)));

    const Matrix zdiag = diagonal_covariance_tokens(bank, n, rng);
    rep.linear_vs_channel = std::max(
        rep.linear_vs_channel, max_abs_diff(cbsa_linear(zdiag, bank, cfg), cbsa_channel(zdiag, bank, cfg)));
  }
  rep.passed = rep.softmax_vs_mssa < rep.tol_softmax_vs_mssa &&
               rep.exact_vs_inverse_mssa < rep.tol_exact_vs_inverse_mssa &&
               rep.svd_exact_vs_linear < rep.tol_svd_exact_vs_linear &&
               rep.linear_vs_channel < rep.tol_linear_vs_channel;
  return rep;
}

// ---------------------------------------------------------------------------
// FLOPs table

namespace {

const csv::Row kFlopsHeader{"mechanism", "N", "d", "H", "m", "total", "projection",
                            "back_projection", "extraction", "contraction", "broadcast",
                            "aggregation", "pairwise_similarities", "crossover"};

}  // namespace

void write_flops_csv(std::ostream& out, const std::vector<FlopsRow>& rows) {
  csv::write_row(out, kFlopsHeader);
  for (const FlopsRow& r : rows) {
    const CostBreakdown& c = r.cost;
    csv::write_row(out, {r.mechanism, std::to_string(r.n), std::to_string(r.d),
                         std::to_string(r.heads), std::to_string(r.m), std::to_string(c.total),
                         std::to_string(c.projection), std::to_string(c.back_projection),
                         std::to_string(c.extraction), std::to_string(c.contraction),
                         std::to_string(c.broadcast), std::to_string(c.aggregation),
                         std::to_string(c.pairwise_similarities), r.crossover ? "1" : "0"});
  }
}

std::vector<FlopsRow> read_flops_csv(std::istream& in) {
  const std::vector<csv::Row> rows = csv::read_all(in);
  if (rows.empty() || rows.front() != kFlopsHeader) {
    throw std::runtime_error("flops table: missing or unexpected header");
  }
  std::vector<FlopsRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const csv::Row& r = rows[i];
    if (r.size() != kFlopsHeader.size()) {
      throw std::runtime_error("flops table: row " + std::to_string(i) + " has " +
                               std::to_string(r.size()) + " fields");
    }
    FlopsRow f;
    f.mechanism = r[0];
    f.n = std::stoll(r[1]);
    f.d = std::stoll(r[2]);
    f.heads = std::stoll(r[3]);
    f.m = std::stoll(r[4]);
    f.cost.total = std::stoll(r[5]);
    f.cost.projection = std::stoll(r[6]);
    f.cost.back_projection = std::stoll(r[7]);
    f.cost.extraction = std::stoll(r[8]);
    f.cost.contraction = std::stoll(r[9]);
    f.cost.broadcast = std::stoll(r[10]);
    f.cost.aggregation = std::stoll(r[11]);
    f.cost.pairwise_similarities = std::stoll(r[12]);
    f.crossover = r[13] == "1";
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace cbsa
