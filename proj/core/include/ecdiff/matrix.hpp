#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ecdiff {

// Guard used by every row normalization in the library.
inline constexpr double kNormEps = 1e-12;
// Variance guard for layer normalization.
inline constexpr double kLayerNormEps = 1e-5;

// Dense row-major matrix of doubles. Carries node embeddings, couplings and
// adjacency alike. Values are plain data; copies are deep.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Exact product with a fixed i-k-j accumulation order.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
// a + s * b
Matrix axpy(const Matrix& a, double s, const Matrix& b);

// Divides each row by max(||row||_2, eps).
Matrix row_l2_normalize(const Matrix& m, double eps = kNormEps);
// True when every row has unit norm within tol.
bool rows_unit_norm(const Matrix& m, double tol);

std::vector<double> row_sums(const Matrix& m);
std::vector<double> col_sums(const Matrix& m);
double frobenius_sq(const Matrix& m);
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

// Central-difference gradient (f(x+h) - f(x-h)) / 2h of a scalar function,
// one entry at a time.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& fn,
                        const Matrix& at, double h);

void require_same_shape(const Matrix& a, const Matrix& b, const char* op);

}  // namespace ecdiff
