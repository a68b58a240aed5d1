#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mufnet {

// Dense row-major f64 matrix. A default-constructed Matrix is empty (0x0) and
// only serves as a placeholder; every constructor taking dimensions requires
// rows >= 1 and cols >= 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Plain kernels on values. These never record anything; the differentiable
// counterparts in tape.hpp are built on top of them.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
// y = x * weight + bias, bias a 1 x d_out row broadcast over every row of x.
Matrix linear(const Matrix& x, const Matrix& weight, const Matrix& bias);
// Row-wise softmax with per-row max subtraction.
Matrix softmax_rows(const Matrix& x);
// Mean over the row (token) axis; returns 1 x cols.
Matrix mean_rows(const Matrix& x);

struct AttentionResult {
  Matrix output;   // n_q x d_v
  Matrix weights;  // n_q x n_k, rows sum to 1
};

// softmax(Q K^T / sqrt(d_k)) V
AttentionResult scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v);

// Throws DimensionError naming both shapes when `ok` is false.
void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b);

}  // namespace mufnet
