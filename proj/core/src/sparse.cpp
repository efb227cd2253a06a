#include "kcgn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kcgn/error.hpp"

namespace kcgn {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw DimensionError("SparseMatrix: entry (" + std::to_string(t.row) + ", " +
                           std::to_string(t.col) + ") outside [" + std::to_string(rows) +
                           " x " + std::to_string(cols) + "]");
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix m(rows, cols);
  m.col_idx_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < triplets.size() && triplets[j].row == triplets[i].row &&
           triplets[j].col == triplets[i].col) {
      sum += triplets[j].value;
      ++j;
    }
    m.col_idx_.push_back(triplets[i].col);
    m.values_.push_back(sum);
    ++m.row_ptr_[triplets[i].row + 1];
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  m.validate();
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(n, n);
  m.col_idx_.resize(n);
  m.values_.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.col_idx_[i] = static_cast<std::uint32_t>(i);
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols,
                                    std::vector<std::size_t> row_ptr,
                                    std::vector<std::uint32_t> col_idx,
                                    std::vector<double> values) {
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_ = std::move(row_ptr);
  m.col_idx_ = std::move(col_idx);
  m.values_ = std::move(values);
  m.validate();
  return m;
}

void SparseMatrix::validate() const {
  if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 ||
      row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size()) {
    throw DimensionError("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) throw DimensionError("SparseMatrix: row_ptr decreasing");
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      if (col_idx_[p] >= cols_) throw DimensionError("SparseMatrix: column index out of range");
      if (p > row_ptr_[r] && col_idx_[p] <= col_idx_[p - 1]) {
        throw DimensionError("SparseMatrix: column indices not strictly increasing in row " +
                             std::to_string(r));
      }
      if (!std::isfinite(values_[p])) throw NumericalError("SparseMatrix: non-finite value");
    }
  }
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto idx = row_indices(r);
  auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(c));
  if (it == idx.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - idx.begin())];
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t(cols_, rows_);
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  for (std::uint32_t c : col_idx_) ++t.row_ptr_[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) t.row_ptr_[c + 1] += t.row_ptr_[c];
  std::vector<std::size_t> cursor(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  // Rows are visited in order, so each transposed row is filled with
  // increasing column indices.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const std::size_t dst = cursor[col_idx_[p]]++;
      t.col_idx_[dst] = static_cast<std::uint32_t>(r);
      t.values_[dst] = values_[p];
    }
  }
  return t;
}

Tensor SparseMatrix::to_dense() const {
  Tensor d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) d(r, col_idx_[p]) = values_[p];
  return d;
}

Tensor SparseMatrix::multiply(const Tensor& dense) const {
  Tensor out(rows_, dense.cols());
  multiply_accumulate(dense, out);
  return out;
}

void SparseMatrix::multiply_accumulate(const Tensor& dense, Tensor& out) const {
  if (dense.rows() != cols_ || out.rows() != rows_ || out.cols() != dense.cols()) {
    throw DimensionError("spmm: [" + std::to_string(rows_) + " x " + std::to_string(cols_) +
                         "] * " + dense.shape_string() + " -> " + out.shape_string());
  }
  multiply_accumulate(dense.values(), dense.cols(), out.values());
}

void SparseMatrix::multiply_accumulate(std::span<const double> dense, std::size_t dense_cols,
                                       std::span<double> out) const {
  const std::size_t w = dense_cols;
  for (std::size_t r = 0; r < rows_; ++r) {
    double* o = out.data() + r * w;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const double a = values_[p];
      const double* x = dense.data() + static_cast<std::size_t>(col_idx_[p]) * w;
      for (std::size_t j = 0; j < w; ++j) o[j] += a * x[j];
    }
  }
}

}  // namespace kcgn
