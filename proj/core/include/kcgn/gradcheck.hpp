#pragma once

#include <functional>
#include <span>

#include "kcgn/tape.hpp"

namespace kcgn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked_entries = 0;
  /// Flat position (parameter index, entry index) of the worst entry.
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

/// Builds a scalar loss on the given tape from the bound parameters.
using LossBuilder = std::function<Var(Tape&, std::span<Tensor* const>)>;

/// Compares reverse-mode gradients with central finite differences.
///
/// The error for each entry is |analytic - numeric| / max(1, |analytic|);
/// the maximum over all entries of all parameters is reported and
/// `passed` is set when it is below `tolerance`. The loss must be
/// deterministic. Throws NumericalError on a non-finite loss and
/// ConfigError when step <= 0.
GradCheckResult gradient_check(const LossBuilder& loss, std::span<Tensor* const> params,
                               double step = 1e-5, double tolerance = 1e-6);

}  // namespace kcgn
