#include "kcgn/tensor.hpp"

#include <cmath>

#include "dense_kernels.hpp"
#include "kcgn/error.hpp"

namespace kcgn {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw DimensionError("Tensor: " + std::to_string(values_.size()) + " values for shape " +
                         shape_string());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Tensor::from_rows: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("Tensor::item on non-scalar " + shape_string());
  return values_[0];
}

std::span<double> Tensor::grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(values_.size(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  detail::view(out.values(), out.rows(), out.cols()).noalias() =
      detail::view(a.values(), a.rows(), a.cols()) * detail::view(b.values(), b.rows(), b.cols());
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

}  // namespace kcgn
