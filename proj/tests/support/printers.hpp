#pragma once

#include <ostream>

#include "kcgn/tensor.hpp"

namespace kcgn {

// gtest picks this up through ADL.
inline void PrintTo(const Tensor& t, std::ostream* os) {
  *os << t.shape_string() << " {";
  for (std::size_t r = 0; r < t.rows(); ++r) {
    *os << (r ? "; " : "");
    for (std::size_t c = 0; c < t.cols(); ++c) *os << (c ? ", " : "") << t(r, c);
  }
  *os << "}";
}

}  // namespace kcgn
