#include "cbsa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cbsa {

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double value)
    : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                         " has value " + std::to_string(value)),
      pivot_(pivot),
      value_(value) {}

ConvergenceError::ConvergenceError(int sweeps, double residual)
    : std::runtime_error("Jacobi eigensolver did not converge after " + std::to_string(sweeps) +
                         " sweeps; off-diagonal residual " + std::to_string(residual)),
      sweeps_(sweeps),
      residual_(residual) {}

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTol = 1e-12;
constexpr double kSvdNullTol = 1e-10;

void require_square_symmetric(const Matrix& x, const char* what) {
  if (!x.is_square()) throw DimensionError(std::string(what) + ": expected square, got " + x.shape());
  if (!is_symmetric(x)) throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
}

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Fills every column not marked valid with a unit vector orthogonal to all
// filled columns, trying standard basis vectors in index order.
void complete_columns(Matrix& basis, const std::vector<bool>& valid) {
  const std::size_t dim = basis.rows();
  std::size_t candidate = 0;
  std::vector<bool> filled = valid;
  for (std::size_t c = 0; c < basis.cols(); ++c) {
    if (filled[c]) continue;
    for (; candidate < dim; ++candidate) {
      std::vector<double> v(dim, 0.0);
      v[candidate] = 1.0;
      // Two Gram-Schmidt passes against every column filled so far.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < basis.cols(); ++k) {
          if (!filled[k]) continue;
          double dot = 0.0;
          for (std::size_t i = 0; i < dim; ++i) dot += basis(i, k) * v[i];
          for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * basis(i, k);
        }
      }
      double norm = 0.0;
      for (double e : v) norm += e * e;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (std::size_t i = 0; i < dim; ++i) basis(i, c) = v[i] / norm;
        filled[c] = true;
        ++candidate;
        break;
      }
    }
    if (!filled[c]) throw std::logic_error("orthonormal completion ran out of candidates");
  }
}

// Other-side singular vectors: project(v) / sigma for well-separated sigma,
// orthonormal completion for the rest.
template <class Project>
Matrix recover_other_side(std::size_t other_dim, const Matrix& gram_vecs,
                          std::vector<double>& sigma, Project project) {
  const std::size_t t = gram_vecs.cols();
  const double sigma_max = sigma.empty() ? 0.0 : sigma.front();
  Matrix other(other_dim, t);
  std::vector<bool> valid(t, false);
  for (std::size_t c = 0; c < t; ++c) {
    if (sigma_max > 0.0 && sigma[c] > kSvdNullTol * sigma_max) {
      std::vector<double> v = project(gram_vecs.col(c));
      for (double& e : v) e /= sigma[c];
      other.set_col(c, v);
      valid[c] = true;
    } else {
      sigma[c] = std::max(sigma[c], 0.0);
    }
  }
  complete_columns(other, valid);
  return other;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape() + " * " + b.shape());
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: row counts differ, " + a.shape() + "^T * " + b.shape());
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: column counts differ, " + a.shape() + " * " + b.shape() + "^T");
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix gram(const Matrix& a) {
  Matrix g = matmul_tn(a, a);
  // Exact symmetry; the two triangles can differ in the last bit otherwise.
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = i + 1; j < g.cols(); ++j) g(j, i) = g(i, j);
  return g;
}

Matrix outer_gram(const Matrix& a) {
  Matrix g = matmul_nt(a, a);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = i + 1; j < g.cols(); ++j) g(j, i) = g(i, j);
  return g;
}

Matrix softmax_cols(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mx = x(0, j);
    for (std::size_t i = 1; i < x.rows(); ++i) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      out(i, j) = std::exp(x(i, j) - mx);
      sum += out(i, j);
    }
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) /= sum;
  }
  return out;
}

bool is_symmetric(const Matrix& x, double tol) {
  if (!x.is_square()) return false;
  const double scale = std::max(1.0, x.max_abs());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.cols(); ++j)
      if (std::abs(x(i, j) - x(j, i)) > tol * scale) return false;
  return true;
}

Matrix cholesky(const Matrix& x) {
  require_square_symmetric(x, "cholesky");
  const std::size_t n = x.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = x(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NotPositiveDefinite(j, d);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = x(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

double logdet_psd(const Matrix& x) {
  const Matrix l = cholesky(x);
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Matrix inv_psd(const Matrix& x) {
  const Matrix l = cholesky(x);
  const std::size_t n = l.rows();
  // Solve L L^T X = I column by column.
  Matrix inv(n, n);
  std::vector<double> y(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * inv(k, c);
      inv(ii, c) = s / l(ii, ii);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  return inv;
}

std::vector<double> canonicalize_column_signs(Matrix& m) {
  std::vector<double> signs(m.cols(), 1.0);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > std::abs(m(best, j))) best = i;
    if (m(best, j) < 0.0) {
      signs[j] = -1.0;
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = -m(i, j);
    }
  }
  return signs;
}

SymEig sym_eig(const Matrix& x) {
  require_square_symmetric(x, "sym_eig");
  const std::size_t n = x.rows();
  Matrix a = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(j, i) = a(i, j);
  Matrix v = Matrix::identity(n);
  const double threshold = kOffDiagonalTol * std::max(1.0, x.frobenius_norm());

  int sweep = 0;
  double off = off_diagonal_norm(a);
  while (off >= threshold) {
    if (sweep == kMaxSweeps) throw ConvergenceError(sweep, off);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    ++sweep;
    off = off_diagonal_norm(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymEig out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = a(order[c], order[c]);
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, c) = v(k, order[c]);
  }
  canonicalize_column_signs(out.eigenvectors);
  return out;
}

SvdFactors thin_svd(const Matrix& x) {
  const std::size_t s = x.rows();
  const std::size_t n = x.cols();
  SvdFactors out;
  if (s <= n) {
    SymEig eig = sym_eig(outer_gram(x));
    out.singular.resize(s);
    for (std::size_t i = 0; i < s; ++i) out.singular[i] = std::sqrt(std::max(eig.eigenvalues[i], 0.0));
    out.left = eig.eigenvectors;
    out.right = recover_other_side(n, out.left, out.singular, [&](const std::vector<double>& u) {
      std::vector<double> r(n, 0.0);
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < n; ++j) r[j] += x(i, j) * u[i];
      return r;
    });
  } else {
    SymEig eig = sym_eig(gram(x));
    out.singular.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.singular[i] = std::sqrt(std::max(eig.eigenvalues[i], 0.0));
    out.right = eig.eigenvectors;
    out.left = recover_other_side(s, out.right, out.singular, [&](const std::vector<double>& v) {
      std::vector<double> l(s, 0.0);
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < n; ++j) l[i] += x(i, j) * v[j];
      return l;
    });
  }
  return out;
}

int numerical_rank(const Matrix& x, double tol) {
  const SvdFactors f = thin_svd(x);
  if (f.singular.empty() || f.singular.front() <= 0.0) return 0;
  const double cutoff = tol * f.singular.front();
  return static_cast<int>(std::count_if(f.singular.begin(), f.singular.end(),
                                        [&](double v) { return v > cutoff; }));
}

}  // namespace cbsa
