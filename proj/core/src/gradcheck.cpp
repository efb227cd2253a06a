#include "kcgn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "kcgn/error.hpp"

namespace kcgn {

namespace {

double evaluate(const LossBuilder& loss, std::span<Tensor* const> params) {
  Tape tape;
  const double v = loss(tape, params).value().item();
  if (!std::isfinite(v)) throw NumericalError("gradient_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult gradient_check(const LossBuilder& loss, std::span<Tensor* const> params,
                               double step, double tolerance) {
  if (!(step > 0.0)) throw ConfigError("gradient_check: step must be positive");

  for (Tensor* p : params) p->zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Var l = loss(tape, params);
    if (!std::isfinite(l.value().item())) {
      throw NumericalError("gradient_check: non-finite loss");
    }
    tape.backward(l);
    for (Tensor* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t e = 0; e < p.size(); ++e) {
      const double saved = p[e];
      p[e] = saved + step;
      const double up = evaluate(loss, params);
      p[e] = saved - step;
      const double down = evaluate(loss, params);
      p[e] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][e];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.checked_entries;
      if (err > result.max_relative_error || result.checked_entries == 1) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        result.worst_param = pi;
        result.worst_entry = e;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  result.passed = result.max_relative_error < tolerance;
  return result;
}

}  // namespace kcgn
