#include "kcgn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dense_kernels.hpp"
#include "kcgn/error.hpp"

namespace kcgn {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
  }
}

void require_same_shape(Var a, Var b, const char* op) {
  require_same_tape(a, b, op);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": " + a.value().shape_string() + " vs " +
                         b.value().shape_string());
  }
}

// Stable log(sigmoid(x)) = -softplus(-x).
double log_sigmoid_value(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::constant(Tensor value) {
  value.drop_grad();
  nodes_.push_back(Node{std::move(value), false, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor& param) {
  Tensor copy(param.rows(), param.cols(),
              std::vector<double>(param.values().begin(), param.values().end()));
  nodes_.push_back(Node{std::move(copy), true, &param, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (&in.tape() != this) throw std::invalid_argument("Tape::record: foreign operand");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  value.drop_grad();
  nodes_.push_back(Node{std::move(value), needs, nullptr, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("Tape::backward: foreign loss");
  if (loss.value().size() != 1) {
    throw DimensionError("backward: loss must be scalar, got " + loss.value().shape_string());
  }
  for (auto& node : nodes_) node.value.drop_grad();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.value.has_grad()) continue;
    if (node.backward) node.backward(*this, id);
    if (node.bound != nullptr) {
      auto src = node.value.grad();
      auto dst = node.bound->grad();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    }
  }
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    auto gy = t.output_grad(self);
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    const auto gy_view = detail::view(std::span<const double>(gy), n, m);
    if (t.requires_grad(ia)) {
      detail::view(t.grad_buffer(ia), n, k).noalias() +=
          gy_view * detail::view(B.values(), k, m).transpose();
    }
    if (t.requires_grad(ib)) {
      detail::view(t.grad_buffer(ib), k, m).noalias() +=
          detail::view(A.values(), n, k).transpose() * gy_view;
    }
  });
}

Var spmm(const SparseMatrix& a, Var x, const Tensor* bias) {
  Tensor out;
  if (bias != nullptr) {
    if (bias->rows() != a.rows() || bias->cols() != x.cols()) {
      throw DimensionError("spmm: bias " + bias->shape_string() + " for output [" +
                           std::to_string(a.rows()) + " x " + std::to_string(x.cols()) + "]");
    }
    out = *bias;
    a.multiply_accumulate(x.value(), out);
  } else {
    out = a.multiply(x.value());
  }
  const std::size_t ix = x.id();
  const SparseMatrix* mat = &a;
  return x.tape().record(std::move(out), {x}, [ix, mat](Tape& t, std::size_t self) {
    auto gy = t.output_grad(self);
    auto gx = t.grad_buffer(ix);
    const std::size_t w = t.value(ix).cols();
    auto row_ptr = mat->row_ptr();
    auto cols = mat->col_idx();
    auto vals = mat->values();
    for (std::size_t r = 0; r < mat->rows(); ++r) {
      const double* g = gy.data() + r * w;
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
        double* dst = gx.data() + static_cast<std::size_t>(cols[p]) * w;
        const double v = vals[p];
        for (std::size_t j = 0; j < w; ++j) dst[j] += v * g[j];
      }
    }
  });
}

namespace {

template <typename Fwd, typename Bwd>
Var binary_elementwise(Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
  require_same_shape(a, b, name);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.rows(), A.cols());
  {
    double* o = out.values().data();
    const double* x = A.values().data();
    const double* y = B.values().data();
    for (std::size_t i = 0, n = out.size(); i < n; ++i) o[i] = fwd(x[i], y[i]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, bwd](Tape& t, std::size_t self) {
    auto gy = t.output_grad(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    std::span<double> ga, gb;
    if (need_a) ga = t.grad_buffer(ia);
    if (need_b) gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      auto [da, db] = bwd(A[i], B[i]);
      if (need_a) ga[i] += gy[i] * da;
      if (need_b) gb[i] += gy[i] * db;
    }
  });
}

template <typename Fwd, typename Deriv>
Var unary_elementwise(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols());
  {
    double* o = out.values().data();
    const double* x = A.values().data();
    for (std::size_t i = 0, n = out.size(); i < n; ++i) o[i] = fwd(x[i]);
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, deriv](Tape& t, std::size_t self) {
    auto gy = t.output_grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * deriv(x[i], y[i]);
  });
}

struct Pair {
  double a, b;
};

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return Pair{1.0, 1.0}; });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return Pair{1.0, -1.0}; });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y) { return Pair{y, x}; });
}

Var scale(Var a, double factor) {
  return unary_elementwise(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var scale_rows(Var a, std::vector<double> factors) {
  const Tensor& A = a.value();
  if (factors.size() != A.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(factors.size()) + " factors for " +
                         A.shape_string());
  }
  Tensor out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) = factors[r] * A(r, c);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, f = std::move(factors)](Tape& t, std::size_t self) {
                           auto gy = t.output_grad(self);
                           auto ga = t.grad_buffer(ia);
                           const std::size_t w = t.value(ia).cols();
                           for (std::size_t r = 0; r < f.size(); ++r)
                             for (std::size_t c = 0; c < w; ++c)
                               ga[r * w + c] += f[r] * gy[r * w + c];
                         });
}

Var leaky_relu(Var a, double slope) {
  return unary_elementwise(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var a) {
  return unary_elementwise(
      a, [](double x) { return sigmoid_value(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary_elementwise(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var log_sigmoid(Var a, double clamp) {
  const double lo = clamp > 0.0 ? std::log(clamp) : -INFINITY;
  const double hi = clamp > 0.0 ? std::log1p(-clamp) : 0.0;
  return unary_elementwise(
      a,
      [clamp, lo, hi](double x) {
        const double v = log_sigmoid_value(x);
        if (clamp > 0.0) return std::clamp(v, lo, hi);
        return v;
      },
      [clamp, lo, hi](double x, double y) {
        if (clamp > 0.0 && (y <= lo || y >= hi)) return 0.0;
        return sigmoid_value(-x);
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t width = 0;
  for (Var p : parts) {
    require_same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().value().shape_string() +
                           " vs " + p.value().shape_string());
    }
    width += p.cols();
  }
  Tensor out(rows, width);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.cols();
  }
  Tape& tape = parts.front().tape();
  return tape.record(std::move(out), parts,
                     [ids, offsets, width, rows](Tape& t, std::size_t self) {
                       auto gy = t.output_grad(self);
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.requires_grad(ids[k])) continue;
                         auto g = t.grad_buffer(ids[k]);
                         const std::size_t w = t.value(ids[k]).cols();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < w; ++c)
                             g[r * w + c] += gy[r * width + offsets[k] + c];
                       }
                     });
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  const Tensor& A = a.value();
  Tensor out(indices.size(), A.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= A.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " outside " +
                           A.shape_string());
    }
    std::copy(A.row(indices[i]).begin(), A.row(indices[i]).end(), out.row(i).begin());
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, idx = std::move(indices)](Tape& t, std::size_t self) {
                           auto gy = t.output_grad(self);
                           auto ga = t.grad_buffer(ia);
                           const std::size_t w = t.value(ia).cols();
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             for (std::size_t c = 0; c < w; ++c)
                               ga[idx[i] * w + c] += gy[i * w + c];
                         });
}

Var scatter_add_rows(Var a, std::vector<std::size_t> indices, std::size_t out_rows) {
  const Tensor& A = a.value();
  if (indices.size() != A.rows()) {
    throw DimensionError("scatter_add_rows: " + std::to_string(indices.size()) +
                         " indices for " + A.shape_string());
  }
  Tensor out(out_rows, A.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= out_rows) {
      throw DimensionError("scatter_add_rows: index " + std::to_string(indices[i]) +
                           " outside " + std::to_string(out_rows) + " rows");
    }
    auto dst = out.row(indices[i]);
    auto src = A.row(i);
    for (std::size_t c = 0; c < A.cols(); ++c) dst[c] += src[c];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, idx = std::move(indices)](Tape& t, std::size_t self) {
                           auto gy = t.output_grad(self);
                           auto ga = t.grad_buffer(ia);
                           const std::size_t w = t.value(ia).cols();
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             for (std::size_t c = 0; c < w; ++c)
                               ga[i * w + c] += gy[idx[i] * w + c];
                         });
}

Var segment_mean(Var a, std::vector<std::size_t> labels, std::size_t segments) {
  const Tensor& A = a.value();
  if (labels.size() != A.rows()) {
    throw DimensionError("segment_mean: " + std::to_string(labels.size()) + " labels for " +
                         A.shape_string());
  }
  std::vector<double> counts(segments, 0.0);
  for (std::size_t l : labels) {
    if (l >= segments) throw DimensionError("segment_mean: label outside segment count");
    counts[l] += 1.0;
  }
  Tensor out(segments, A.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto dst = out.row(labels[i]);
    auto src = A.row(i);
    for (std::size_t c = 0; c < A.cols(); ++c) dst[c] += src[c];
  }
  for (std::size_t s = 0; s < segments; ++s) {
    if (counts[s] == 0.0) continue;
    for (double& v : out.row(s)) v /= counts[s];
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {a},
      [ia, lab = std::move(labels), cnt = std::move(counts)](Tape& t, std::size_t self) {
        auto gy = t.output_grad(self);
        auto ga = t.grad_buffer(ia);
        const std::size_t w = t.value(ia).cols();
        for (std::size_t i = 0; i < lab.size(); ++i) {
          const double inv = 1.0 / cnt[lab[i]];
          for (std::size_t c = 0; c < w; ++c) ga[i * w + c] += inv * gy[lab[i] * w + c];
        }
      });
}

Var rowwise_dot(Var a, Var b) {
  require_same_shape(a, b, "rowwise_dot");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < A.cols(); ++c) s += A(r, c) * B(r, c);
    out(r, 0) = s;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    auto gy = t.output_grad(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    const std::size_t w = A.cols();
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia);
      for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = 0; c < w; ++c) ga[r * w + c] += gy[r] * B(r, c);
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = 0; c < w; ++c) gb[r * w + c] += gy[r] * A(r, c);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.output_grad(self)[0];
    for (double& v : t.grad_buffer(ia)) v += g;
  });
}

Var squared_norm(Var a) {
  const double s = a.value().squared_norm();
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.output_grad(self)[0];
    const Tensor& x = t.value(ia);
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * x[i];
  });
}

Var softmax_rows(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto x = A.row(r);
    auto y = out.row(r);
    const double mx = x.empty() ? 0.0 : *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) z += (y[c] = std::exp(x[c] - mx));
    for (double& v : y) v /= z;
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto gy = t.output_grad(self);
    const Tensor& y = t.value(self);
    auto ga = t.grad_buffer(ia);
    const std::size_t w = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < w; ++c) dot += gy[r * w + c] * y(r, c);
      for (std::size_t c = 0; c < w; ++c) ga[r * w + c] += y(r, c) * (gy[r * w + c] - dot);
    }
  });
}

Var group_weighted_sum(Var weights, Var values) {
  require_same_tape(weights, values, "group_weighted_sum");
  const Tensor& Wt = weights.value();
  const Tensor& V = values.value();
  const std::size_t groups = Wt.rows(), k = Wt.cols(), w = V.cols();
  if (V.rows() != groups * k) {
    throw DimensionError("group_weighted_sum: weights " + Wt.shape_string() + " vs values " +
                         V.shape_string());
  }
  Tensor out(groups, w);
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t j = 0; j < k; ++j) {
      const double a = Wt(g, j);
      auto src = V.row(g * k + j);
      auto dst = out.row(g);
      for (std::size_t c = 0; c < w; ++c) dst[c] += a * src[c];
    }
  const std::size_t iw = weights.id(), iv = values.id();
  return weights.tape().record(
      std::move(out), {weights, values}, [iw, iv, groups, k, w](Tape& t, std::size_t self) {
        auto gy = t.output_grad(self);
        const Tensor& Wt = t.value(iw);
        const Tensor& V = t.value(iv);
        if (t.requires_grad(iw)) {
          auto gw = t.grad_buffer(iw);
          for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t j = 0; j < k; ++j) {
              double s = 0.0;
              for (std::size_t c = 0; c < w; ++c) s += gy[g * w + c] * V(g * k + j, c);
              gw[g * k + j] += s;
            }
        }
        if (t.requires_grad(iv)) {
          auto gv = t.grad_buffer(iv);
          for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t j = 0; j < k; ++j) {
              const double a = Wt(g, j);
              for (std::size_t c = 0; c < w; ++c) gv[(g * k + j) * w + c] += a * gy[g * w + c];
            }
        }
      });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& A = a.value();
  if (rows * cols != A.size()) {
    throw DimensionError("reshape: " + A.shape_string() + " to [" + std::to_string(rows) +
                         " x " + std::to_string(cols) + "]");
  }
  Tensor out(rows, cols, std::vector<double>(A.values().begin(), A.values().end()));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto gy = t.output_grad(self);
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  });
}

}  // namespace kcgn
