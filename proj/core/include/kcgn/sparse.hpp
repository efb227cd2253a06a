#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kcgn/tensor.hpp"

namespace kcgn {

struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and all stored values are finite.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Builds from unordered triplets; duplicate coordinates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);
  /// Takes ownership of pre-built CSR arrays after validating the invariants.
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols,
                               std::vector<std::size_t> row_ptr,
                               std::vector<std::uint32_t> col_idx, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::uint32_t> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Entry (r, c), zero when not stored.
  double at(std::size_t r, std::size_t c) const;

  SparseMatrix transposed() const;
  Tensor to_dense() const;

  /// out = this * dense. Throws DimensionError on mismatch.
  Tensor multiply(const Tensor& dense) const;
  /// out += this * dense (out must already have the result shape).
  void multiply_accumulate(const Tensor& dense, Tensor& out) const;
  void multiply_accumulate(std::span<const double> dense, std::size_t dense_cols,
                           std::span<double> out) const;

 private:
  void validate() const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace kcgn
