#pragma once

#include <span>
#include <vector>

#include "kcgn/tensor.hpp"

namespace kcgn {

struct AdamOptions {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers, one pair per parameter tensor.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long step = 0;

  static AdamState for_params(std::span<const Tensor* const> params);
};

/// Bias-corrected Adam update applied in place to every parameter using its
/// gradient buffer (absent buffers count as zero gradient).
/// Throws ConfigError when lr <= 0 or the state does not match the params.
void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamOptions& options);

}  // namespace kcgn
