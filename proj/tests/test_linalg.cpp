#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"

#include "cbsa/linalg.hpp"
#include "test_util.hpp"

using namespace cbsa;
using cbsa::testing::random_matrix;
using cbsa::testing::random_orthogonal;
using cbsa::testing::random_spd;
using cbsa::testing::random_symmetric;
using cbsa::testing::relative_frobenius;

namespace {

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_SUITE("matrix") {
  TEST_CASE("construction rejects non-finite entries and bad lengths") {
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}),
                    std::invalid_argument);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}),
                    std::invalid_argument);
    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), DimensionError);
    CHECK_THROWS_AS(Matrix(0, 3), DimensionError);
  }

  TEST_CASE("row-major layout") {
    const Matrix m{{1, 2, 3}, {4, 5, 6}};
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 0) == 4.0);
    CHECK(m.data()[3] == 4.0);
    CHECK(m.transpose()(2, 1) == 6.0);
  }
}

TEST_SUITE("matmul") {
  TEST_CASE("identity and hand arithmetic") {
    const Matrix x = random_matrix(1, 3, 4);
    CHECK(matmul(Matrix::identity(3), x) == x);
    CHECK(matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{0}, {1}}) == Matrix{{2}, {4}});
  }

  TEST_CASE("bit-identical to the naive triple loop") {
    const Matrix a = random_matrix(2, 7, 5);
    const Matrix b = random_matrix(3, 5, 3);
    CHECK(matmul(a, b) == naive_product(a, b));
    CHECK(matmul_tn(a.transpose(), b) == naive_product(a, b));
    CHECK(matmul_nt(a, b.transpose()) == naive_product(a, b));
  }

  TEST_CASE("dimension mismatch names both shapes") {
    try {
      (void)matmul(Matrix(2, 3), Matrix(4, 5));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("2x3") != std::string::npos);
      CHECK(msg.find("4x5") != std::string::npos);
    }
  }

  TEST_CASE("associativity on random triples") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Matrix a = random_matrix(10 + s, 4, 6);
      const Matrix b = random_matrix(20 + s, 6, 3);
      const Matrix c = random_matrix(30 + s, 3, 5);
      const Matrix left = matmul(matmul(a, b), c);
      CHECK(relative_frobenius(matmul(a, matmul(b, c)), left) < 1e-9);
    }
  }
}

TEST_SUITE("softmax_cols") {
  TEST_CASE("symmetric and overflow-safe columns") {
    const Matrix s = softmax_cols(Matrix{{0.0, 1000.0}, {0.0, 1000.0}});
    CHECK(s(0, 0) == doctest::Approx(0.5));
    CHECK(s(1, 0) == doctest::Approx(0.5));
    CHECK(s(0, 1) == doctest::Approx(0.5));
    CHECK(s(1, 1) == doctest::Approx(0.5));
  }

  TEST_CASE("matches a long double exp/sum oracle") {
    const Matrix x = random_matrix(4, 4, 4);
    const Matrix s = softmax_cols(x);
    for (std::size_t j = 0; j < 4; ++j) {
      long double total = 0.0L;
      for (std::size_t i = 0; i < 4; ++i) total += std::exp(static_cast<long double>(x(i, j)));
      double colsum = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        const double ref = static_cast<double>(std::exp(static_cast<long double>(x(i, j))) / total);
        CHECK(std::abs(s(i, j) - ref) < 1e-12);
        colsum += s(i, j);
      }
      CHECK(std::abs(colsum - 1.0) < 1e-12);
    }
  }
}

TEST_SUITE("logdet_psd / inv_psd") {
  TEST_CASE("known values") {
    CHECK(logdet_psd(Matrix::identity(5)) == 0.0);
    CHECK(logdet_psd(Matrix{{2, 0}, {0, 3}}) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
    CHECK(inv_psd(Matrix::identity(4)) == Matrix::identity(4));
    const Matrix inv = inv_psd(Matrix{{2, 0}, {0, 4}});
    CHECK(inv(0, 0) == doctest::Approx(0.5));
    CHECK(inv(1, 1) == doctest::Approx(0.25));
    CHECK(inv(0, 1) == 0.0);
  }

  TEST_CASE("logdet matches the eigenvalue sum") {
    const Matrix x = random_spd(5, 6);
    double ref = 0.0;
    for (double l : sym_eig(x).eigenvalues) ref += std::log(l);
    CHECK(std::abs(logdet_psd(x) - ref) < 1e-9);
  }

  TEST_CASE("inverse multiplies back to identity") {
    const Matrix x = random_spd(6, 6);
    CHECK(max_abs_diff(matmul(x, inv_psd(x)), Matrix::identity(6)) < 1e-8);
  }

  TEST_CASE("non-positive pivot reports its index") {
    const Matrix x{{1, 0, 0}, {0, 2, 0}, {0, 0, -1}};
    try {
      (void)logdet_psd(x);
      FAIL("expected NotPositiveDefinite");
    } catch (const NotPositiveDefinite& e) {
      CHECK(e.pivot() == 2);
    }
    CHECK_THROWS_AS(inv_psd(Matrix{{1, 2}, {2, 1}}), NotPositiveDefinite);
  }

  TEST_CASE("non-symmetric input is rejected") {
    CHECK_THROWS_AS(logdet_psd(Matrix{{1, 0.5}, {0, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(logdet_psd(Matrix(2, 3)), DimensionError);
  }

  TEST_CASE("logdet is invariant under orthogonal similarity") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Matrix x = random_spd(40 + s, 7);
      const Matrix o = random_orthogonal(50 + s, 7);
      Matrix sim = matmul(matmul_tn(o, x), o);
      for (std::size_t i = 0; i < 7; ++i)  // remove roundoff asymmetry
        for (std::size_t j = i + 1; j < 7; ++j) sim(j, i) = sim(i, j);
      CHECK(std::abs(logdet_psd(sim) - logdet_psd(x)) < 1e-9);
    }
  }
}

TEST_SUITE("sym_eig") {
  TEST_CASE("diagonal input") {
    const SymEig e = sym_eig(Matrix{{3, 0}, {0, 1}});
    CHECK(e.eigenvalues == std::vector<double>{3.0, 1.0});
    CHECK(e.eigenvectors == Matrix::identity(2));
  }

  TEST_CASE("known 2x2") {
    const SymEig e = sym_eig(Matrix{{0, 1}, {1, 0}});
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(e.eigenvalues[1] == doctest::Approx(-1.0));
  }

  TEST_CASE("random symmetric reconstructs, sorted, orthonormal, sign convention") {
    const Matrix x = random_symmetric(7, 8);
    const SymEig e = sym_eig(x);
    for (std::size_t i = 1; i < e.eigenvalues.size(); ++i) CHECK(e.eigenvalues[i - 1] >= e.eigenvalues[i]);
    const Matrix rec = cbsa::testing::diag_times(e.eigenvectors, e.eigenvalues, e.eigenvectors);
    CHECK(relative_frobenius(rec, x) < 1e-8);
    CHECK(max_abs_diff(gram(e.eigenvectors), Matrix::identity(8)) < 1e-8);
    for (std::size_t j = 0; j < 8; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < 8; ++i)
        if (std::abs(e.eigenvectors(i, j)) > std::abs(e.eigenvectors(best, j))) best = i;
      CHECK(e.eigenvectors(best, j) > 0.0);
    }
  }

  TEST_CASE("deterministic") {
    const Matrix x = random_symmetric(8, 9);
    const SymEig a = sym_eig(x);
    const SymEig b = sym_eig(x);
    CHECK(a.eigenvalues == b.eigenvalues);
    CHECK(a.eigenvectors == b.eigenvectors);
  }
}

TEST_SUITE("thin_svd") {
  TEST_CASE("diagonal") {
    const SvdFactors f = thin_svd(Matrix{{2, 0}, {0, 1}});
    CHECK(f.singular[0] == doctest::Approx(2.0));
    CHECK(f.singular[1] == doctest::Approx(1.0));
  }

  TEST_CASE("rank-1 outer product") {
    const Matrix u{{1}, {2}};
    const Matrix v{{3}, {-1}};
    const SvdFactors f = thin_svd(matmul_nt(u, v));
    CHECK(f.singular[0] == doctest::Approx(std::sqrt(5.0) * std::sqrt(10.0)).epsilon(1e-12));
    CHECK(f.singular[1] < 1e-7 * f.singular[0]);
    // The completed null column is still orthonormal.
    CHECK(max_abs_diff(gram(f.right), Matrix::identity(2)) < 1e-8);
  }

  TEST_CASE("random wide and tall reconstruct with orthonormal factors") {
    for (const auto& [rows, cols] : {std::pair{5, 9}, std::pair{9, 5}}) {
      const Matrix x = random_matrix(11, rows, cols);
      const SvdFactors f = thin_svd(x);
      const std::size_t t = std::min(rows, cols);
      CHECK(f.left.cols() == t);
      CHECK(f.right.cols() == t);
      CHECK(relative_frobenius(cbsa::testing::diag_times(f.left, f.singular, f.right), x) < 1e-8);
      CHECK(max_abs_diff(gram(f.left), Matrix::identity(t)) < 1e-8);
      CHECK(max_abs_diff(gram(f.right), Matrix::identity(t)) < 1e-8);
      for (std::size_t i = 1; i < t; ++i) CHECK(f.singular[i - 1] >= f.singular[i]);
    }
  }

  TEST_CASE("singular values invariant under orthogonal multiplication") {
    const Matrix x = random_matrix(12, 5, 7);
    const Matrix ol = random_orthogonal(13, 5);
    const Matrix orr = random_orthogonal(14, 7);
    const std::vector<double> base = thin_svd(x).singular;
    const std::vector<double> moved = thin_svd(matmul(matmul(ol, x), orr)).singular;
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(base[i] - moved[i]) < 1e-9);
  }

  TEST_CASE("numerical rank") {
    CHECK(numerical_rank(Matrix::identity(4)) == 4);
    CHECK(numerical_rank(Matrix::constant(5, 3, 0.2)) == 1);
    CHECK(numerical_rank(Matrix(3, 3)) == 0);
  }
}
