#include "ecdiff/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "ecdiff/errors.hpp"

namespace ecdiff {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() +
                         " vs " + b.shape_string());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.shape_string() + " by " +
                         b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) { return axpy(a, 1.0, b); }

Matrix sub(const Matrix& a, const Matrix& b) { return axpy(a, -1.0, b); }

Matrix axpy(const Matrix& a, double s, const Matrix& b) {
  require_same_shape(a, b, "axpy");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += s * bd[i];
  return out;
}

Matrix scale(const Matrix& m, double s) {
  Matrix out = m;
  for (double& v : out.data()) v *= s;
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Matrix row_l2_normalize(const Matrix& m, double eps) {
  if (!(eps > 0.0)) throw ParameterError("row_l2_normalize: eps must be positive");
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    const double norm = std::sqrt(dot(r, r));
    const double inv = 1.0 / std::max(norm, eps);
    for (double& v : r) v *= inv;
  }
  return out;
}

bool rows_unit_norm(const Matrix& m, double tol) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    if (std::abs(std::sqrt(dot(r, r)) - 1.0) > tol) return false;
  }
  return true;
}

std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row(i)) out[i] += v;
  return out;
}

std::vector<double> col_sums(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j];
  }
  return out;
}

double frobenius_sq(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) worst = std::max(worst, std::abs(ad[i] - bd[i]));
  return worst;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& fn, const Matrix& at,
                        double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_grad: h must be positive");
  Matrix grad(at.rows(), at.cols());
  Matrix probe = at;
  for (std::size_t k = 0; k < at.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + h;
    const double up = fn(probe);
    probe.data()[k] = orig - h;
    const double down = fn(probe);
    probe.data()[k] = orig;
    grad.data()[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace ecdiff
