#include "kcgn/optim.hpp"

#include <cmath>
#include <utility>

#include "kcgn/error.hpp"

namespace kcgn {

AdamState AdamState::for_params(std::span<const Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.first_moment.emplace_back(p->rows(), p->cols());
    s.second_moment.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamOptions& options) {
  if (!(options.learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ConfigError("adam: state holds " + std::to_string(state.first_moment.size()) +
                      " moments for " + std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (!m.same_shape(p) || !v.same_shape(p)) {
      throw DimensionError("adam: moment shape " + m.shape_string() + " for parameter " +
                           p.shape_string());
    }
    const bool has_grad = p.has_grad();
    auto g = std::as_const(p).grad();
    for (std::size_t e = 0; e < p.size(); ++e) {
      const double ge = has_grad ? g[e] : 0.0;
      m[e] = options.beta1 * m[e] + (1.0 - options.beta1) * ge;
      v[e] = options.beta2 * v[e] + (1.0 - options.beta2) * ge * ge;
      const double m_hat = m[e] / c1;
      const double v_hat = v[e] / c2;
      p[e] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

}  // namespace kcgn
