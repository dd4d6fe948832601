#include "ecdiff/sparse.hpp"

#include <algorithm>

#include "ecdiff/errors.hpp"

namespace ecdiff {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  row_ptr_.assign(rows + 1, 0);
  col_idx_.reserve(entries.size());
  values_.reserve(entries.size());
  bool have_last = false;
  std::size_t last_row = 0, last_col = 0;
  for (const Entry& e : entries) {
    if (e.row >= rows || e.col >= cols) {
      throw DimensionError("sparse entry (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ") outside " + std::to_string(rows) +
                           "x" + std::to_string(cols));
    }
    if (have_last && e.row == last_row && e.col == last_col) {
      values_.back() += e.value;
      continue;
    }
    col_idx_.push_back(e.col);
    values_.push_back(e.value);
    ++row_ptr_[e.row + 1];
    have_last = true;
    last_row = e.row;
    last_col = e.col;
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

Matrix SparseMatrix::apply(const Matrix& x) const {
  if (x.rows() != cols_) {
    throw DimensionError("sparse apply: " + std::to_string(rows_) + "x" +
                         std::to_string(cols_) + " by " + x.shape_string());
  }
  Matrix out(rows_, x.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto o = out.row(r);
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      auto xr = x.row(col_idx_[p]);
      const double v = values_[p];
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * xr[j];
    }
  }
  return out;
}

Matrix SparseMatrix::apply_transpose(const Matrix& x) const {
  if (x.rows() != rows_) {
    throw DimensionError("sparse apply_transpose: " + std::to_string(rows_) + "x" +
                         std::to_string(cols_) + " by " + x.shape_string());
  }
  Matrix out(cols_, x.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto xr = x.row(r);
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      auto o = out.row(col_idx_[p]);
      const double v = values_[p];
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * xr[j];
    }
  }
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out(r, col_idx_[p]) += values_[p];
  return out;
}

}  // namespace ecdiff
