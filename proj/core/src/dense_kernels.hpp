#pragma once

#include <span>

#include <Eigen/Core>

namespace kcgn::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMatrix>;
using View = Eigen::Map<RowMatrix>;

inline ConstView view(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return ConstView(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline View view(std::span<double> v, std::size_t rows, std::size_t cols) {
  return View(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace kcgn::detail
