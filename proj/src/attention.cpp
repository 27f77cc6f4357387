#include "cbsa/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "cbsa/linalg.hpp"

namespace cbsa {

namespace {

Matrix assemble_ambient(const SubspaceBank& bank, const std::vector<Matrix>& head_q) {
  Matrix q(bank.ambient_dim(), head_q.front().cols());
  for (std::size_t k = 0; k < bank.heads(); ++k) q += matmul(bank.basis(k), head_q[k]);
  return q;
}

void require_tokens(const Matrix& z, const SubspaceBank& bank, const char* what) {
  if (z.empty()) throw DimensionError(std::string(what) + ": no tokens");
  if (z.rows() != bank.ambient_dim()) {
    throw DimensionError(std::string(what) + ": tokens are " + z.shape() + " but bank has d = " +
                         std::to_string(bank.ambient_dim()));
  }
}

const Matrix& back_projection_for(const SubspaceBank& bank, const PipelineOptions& opts,
                                  std::size_t k) {
  if (opts.back_projection.empty()) return bank.basis(k);
  if (opts.back_projection.size() != bank.heads()) {
    throw DimensionError("back projection needs one matrix per head");
  }
  const Matrix& b = opts.back_projection[k];
  if (b.rows() != bank.ambient_dim() || b.cols() != bank.subspace_dim()) {
    throw DimensionError("back projection " + std::to_string(k) + " is " + b.shape() +
                         ", expected " + bank.basis(k).shape());
  }
  return b;
}

}  // namespace

std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::exact: return "exact";
    case Operator::softmax: return "softmax";
    case Operator::mssa: return "mssa";
    case Operator::linear: return "linear";
    case Operator::channel: return "channel";
    case Operator::agent: return "agent";
  }
  return "unknown";
}

Operator parse_operator(std::string_view name) {
  for (Operator op : {Operator::exact, Operator::softmax, Operator::mssa, Operator::linear,
                      Operator::channel, Operator::agent}) {
    if (to_string(op) == name) return op;
  }
  throw std::invalid_argument("unknown operator '" + std::string(name) +
                              "' (expected exact|softmax|mssa|linear|channel|agent)");
}

AttentionConfig AttentionConfig::make(std::size_t d, std::size_t heads, std::size_t n,
                                      double epsilon, double kappa, std::size_t m) {
  AttentionConfig cfg;
  cfg.d = d;
  cfg.heads = heads;
  cfg.p = heads == 0 ? 0 : d / heads;
  cfg.m = m == 0 ? cfg.p : m;
  cfg.n = n;
  cfg.epsilon = epsilon;
  cfg.kappa = kappa;
  cfg.validate();
  return cfg;
}

void AttentionConfig::validate() const {
  if (d == 0 || heads == 0 || p == 0 || m == 0 || n == 0) {
    throw std::invalid_argument("attention dimensions must be positive (N = 0 is not supported)");
  }
  if (p * heads != d) {
    throw std::invalid_argument("p = " + std::to_string(p) + " with K = " + std::to_string(heads) +
                                " does not tile d = " + std::to_string(d));
  }
  if (m > n) {
    throw std::invalid_argument("m = " + std::to_string(m) + " exceeds N = " + std::to_string(n));
  }
  coding().validate();
  if (!std::isfinite(kappa)) throw std::invalid_argument("kappa must be finite");
}

void AttentionConfig::check_compatible(const Matrix& z, const SubspaceBank& bank) const {
  validate();
  if (z.rows() != d || z.cols() != n) {
    throw DimensionError("tokens are " + z.shape() + ", config expects " + std::to_string(d) + "x" +
                         std::to_string(n));
  }
  if (bank.ambient_dim() != d || bank.heads() != heads || bank.subspace_dim() != p) {
    throw DimensionError("bank (d=" + std::to_string(bank.ambient_dim()) +
                         ", K=" + std::to_string(bank.heads()) +
                         ") does not match config (d=" + std::to_string(d) +
                         ", K=" + std::to_string(heads) + ")");
  }
}

Matrix init_representatives_pool(const Matrix& z, std::size_t m) {
  const std::size_t n = z.cols();
  if (m == 0 || m > n) {
    throw std::invalid_argument("pooling needs 1 <= m <= N, got m = " + std::to_string(m) +
                                ", N = " + std::to_string(n));
  }
  const std::size_t base = n / m;
  const std::size_t extra = n % m;
  Matrix q(z.rows(), m);
  std::size_t start = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = start; j < start + len; ++j) sum += z(i, j);
      q(i, s) = sum / static_cast<double>(len);
    }
    start += len;
  }
  return q;
}

RepresentativeSet extract_representatives(const Matrix& z, const Matrix& q0,
                                          const SubspaceBank& bank) {
  require_tokens(z, bank, "extract_representatives");
  if (q0.rows() != z.rows()) {
    throw DimensionError("extract_representatives: initial representatives are " + q0.shape() +
                         ", tokens are " + z.shape());
  }
  RepresentativeSet reps;
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const Matrix zk = bank.project(k, z);
    const Matrix qk0 = bank.project(k, q0);
    Matrix a = softmax_cols(matmul_tn(zk, qk0));
    reps.head_q.push_back(matmul(zk, a));
    reps.coeffs.push_back(std::move(a));
  }
  reps.q = assemble_ambient(bank, reps.head_q);
  return reps;
}

RepresentativeSet self_expressed_representatives(const Matrix& z, const SubspaceBank& bank) {
  require_tokens(z, bank, "self_expressed_representatives");
  RepresentativeSet reps;
  reps.q = z;
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    reps.head_q.push_back(bank.project(k, z));
    reps.coeffs.push_back(Matrix::identity(z.cols()));
  }
  return reps;
}

RepresentativeSet svd_representatives(const Matrix& z, const SubspaceBank& bank) {
  require_tokens(z, bank, "svd_representatives");
  RepresentativeSet reps;
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    SvdFactors f = thin_svd(bank.project(k, z));
    Matrix ls = f.left;
    for (std::size_t i = 0; i < ls.rows(); ++i)
      for (std::size_t j = 0; j < ls.cols(); ++j) ls(i, j) *= f.singular[j];
    reps.head_q.push_back(std::move(ls));
    reps.coeffs.push_back(std::move(f.right));
  }
  reps.q = assemble_ambient(bank, reps.head_q);
  return reps;
}

Matrix contract_exact(const Matrix& q_bar, double epsilon) {
  const double c = static_cast<double>(q_bar.rows()) /
                   (static_cast<double>(q_bar.cols()) * epsilon * epsilon);
  Matrix inner = gram(q_bar);
  inner *= c;
  for (std::size_t i = 0; i < inner.rows(); ++i) inner(i, i) += 1.0;
  return matmul(q_bar, inv_psd(inner));
}

Matrix contract_softmax(const Matrix& q_bar) { return matmul(q_bar, softmax_cols(gram(q_bar))); }

Matrix contract_and_broadcast(const SubspaceBank& bank, const RepresentativeSet& reps,
                              Contraction contraction, double epsilon,
                              const PipelineOptions& opts) {
  if (reps.head_q.size() != bank.heads() || reps.coeffs.size() != bank.heads()) {
    throw DimensionError("representative set does not cover every head");
  }
  const std::size_t n = reps.coeffs.front().rows();
  Matrix out(bank.ambient_dim(), n);
  if (opts.trace) opts.trace->heads.clear();
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const Matrix& q_bar = reps.head_q[k];
    const Matrix& a = reps.coeffs[k];
    if (a.cols() != q_bar.cols() || a.rows() != n) {
      throw DimensionError("head " + std::to_string(k) + ": coefficients " + a.shape() +
                           " do not fit representatives " + q_bar.shape());
    }
    Matrix contracted;
    switch (contraction) {
      case Contraction::exact: contracted = contract_exact(q_bar, epsilon); break;
      case Contraction::softmax: contracted = contract_softmax(q_bar); break;
      case Contraction::identity: contracted = q_bar; break;
    }
    Matrix broadcast = matmul_nt(contracted, a);
    out += matmul(back_projection_for(bank, opts, k), broadcast);
    if (opts.trace) {
      HeadTrace h;
      h.representatives = q_bar;
      h.contraction = std::move(contracted);
      h.broadcast = std::move(broadcast);
      h.attention_rank = attention_rank_diagnostic(a, opts.rank_tol);
      opts.trace->heads.push_back(std::move(h));
    }
  }
  return out;
}

namespace {

Matrix run_pipeline(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                    Contraction contraction, const PipelineOptions& opts) {
  cfg.check_compatible(z, bank);
  const Matrix q0 = init_representatives_pool(z, cfg.m);
  const RepresentativeSet reps = extract_representatives(z, q0, bank);
  Matrix out = contract_and_broadcast(bank, reps, contraction, cfg.epsilon, opts);
  if (opts.trace) {
    for (std::size_t k = 0; k < bank.heads(); ++k) opts.trace->heads[k].tokens = bank.project(k, z);
  }
  return out;
}

}  // namespace

Matrix cbsa_exact(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                  const PipelineOptions& opts) {
  return run_pipeline(z, bank, cfg, Contraction::exact, opts);
}

Matrix cbsa_softmax(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                    const PipelineOptions& opts) {
  return run_pipeline(z, bank, cfg, Contraction::softmax, opts);
}

Matrix cbsa_agent(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                  const PipelineOptions& opts) {
  return run_pipeline(z, bank, cfg, Contraction::identity, opts);
}

Matrix mssa(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg) {
  cfg.check_compatible(z, bank);
  Matrix out(z.rows(), z.cols());
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const Matrix zk = bank.project(k, z);
    out += matmul(bank.basis(k), matmul(zk, softmax_cols(gram(zk))));
  }
  return out;
}

double spectral_gate(double lambda, double epsilon) {
  const double e2 = epsilon * epsilon;
  return e2 / (e2 + lambda);
}

Matrix spectral_map(const Matrix& c, double epsilon) {
  const SymEig eig = sym_eig(c);
  const std::size_t n = c.rows();
  Matrix f(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        // Tiny negative eigenvalues from roundoff are clamped to zero.
        const double gain = spectral_gate(std::max(eig.eigenvalues[t], 0.0), epsilon);
        s += eig.eigenvectors(i, t) * gain * eig.eigenvectors(j, t);
      }
      f(i, j) = s;
    }
  }
  return f;
}

Matrix cbsa_linear(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg) {
  cfg.check_compatible(z, bank);
  // With m = p representatives the contraction scale p/(m eps^2) is 1/eps^2,
  // which is exactly the gate f(lambda) = eps^2 / (eps^2 + lambda).
  Matrix out(z.rows(), z.cols());
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const Matrix zk = bank.project(k, z);
    out += matmul(bank.basis(k), matmul(spectral_map(outer_gram(zk), cfg.epsilon), zk));
  }
  return out;
}

Matrix cbsa_channel(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg) {
  cfg.check_compatible(z, bank);
  Matrix out(z.rows(), z.cols());
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    Matrix zk = bank.project(k, z);
    for (std::size_t i = 0; i < zk.rows(); ++i) {
      double moment = 0.0;
      for (std::size_t j = 0; j < zk.cols(); ++j) moment += zk(i, j) * zk(i, j);
      const double gain = spectral_gate(moment, cfg.epsilon);
      for (std::size_t j = 0; j < zk.cols(); ++j) zk(i, j) *= gain;
    }
    out += matmul(bank.basis(k), zk);
  }
  return out;
}

Matrix apply_operator(Operator op, const Matrix& z, const SubspaceBank& bank,
                      const AttentionConfig& cfg, const PipelineOptions& opts) {
  switch (op) {
    case Operator::exact: return cbsa_exact(z, bank, cfg, opts);
    case Operator::softmax: return cbsa_softmax(z, bank, cfg, opts);
    case Operator::agent: return cbsa_agent(z, bank, cfg, opts);
    case Operator::mssa: return mssa(z, bank, cfg);
    case Operator::linear: return cbsa_linear(z, bank, cfg);
    case Operator::channel: return cbsa_channel(z, bank, cfg);
  }
  throw std::logic_error("unhandled operator");
}

Matrix residual_step(const Matrix& z, const SubspaceBank& bank, const AttentionConfig& cfg,
                     Operator op, const PipelineOptions& opts) {
  Matrix update = apply_operator(op, z, bank, cfg, opts);
  update *= cfg.kappa;
  return z - update;
}

int attention_rank_diagnostic(const Matrix& a, double tol) { return numerical_rank(a, tol); }

}  // namespace cbsa
