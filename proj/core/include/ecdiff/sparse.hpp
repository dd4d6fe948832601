#pragma once

#include <cstddef>
#include <vector>

#include "ecdiff/matrix.hpp"

namespace ecdiff {

// Compressed-sparse-row matrix. Only used to apply normalized adjacency
// to dense embeddings without materializing N x N.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseMatrix() = default;
  // Entries may arrive in any order; duplicates are summed.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  // this * x
  Matrix apply(const Matrix& x) const;
  // this^T * x
  Matrix apply_transpose(const Matrix& x) const;
  Matrix to_dense() const;

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace ecdiff
