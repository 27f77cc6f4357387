#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbsa {

// Thrown when operand shapes do not fit together. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major real matrix. Entries are checked for finiteness when a
// matrix is built from external data; element writes through operator() are
// not re-checked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  static Matrix constant(std::size_t rows, std::size_t cols, double value);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  bool is_square() const { return rows_ == cols_; }
  std::string shape() const;

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix transpose() const;
  std::vector<double> col(std::size_t j) const;
  void set_col(std::size_t j, std::span<const double> values);
  Matrix cols_range(std::size_t first, std::size_t count) const;
  Matrix select_cols(std::span<const std::size_t> indices) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  double frobenius_norm() const;
  double max_abs() const;
  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

// Frobenius norm of a - b; shapes must agree.
double frobenius_distance(const Matrix& a, const Matrix& b);
// Largest entrywise |a - b|; shapes must agree.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Columns [a | b]. Row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

}  // namespace cbsa
