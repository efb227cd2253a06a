#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kcgn/sparse.hpp"
#include "kcgn/tensor.hpp"

namespace kcgn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as
/// the tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Operations append nodes in execution order; `backward` walks them in
/// exact reverse order and accumulates gradients additively. Nodes that do
/// not depend on any parameter carry no backward rule.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Records a copy of `param`; backward adds the total gradient into
  /// `param.grad()`.
  Var parameter(Tensor& param);

  /// Propagates d(loss)/d(node) to every reachable node and accumulates it
  /// into bound parameters. `loss` must be 1 x 1.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient of a node after backward; empty when the node has none.
  std::span<const double> grad(Var v) const { return nodes_[v.id()].value.grad(); }
  std::size_t size() const { return nodes_.size(); }

  // Used by operation implementations.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  std::span<double> grad_buffer(std::size_t id) { return nodes_[id].value.grad(); }
  std::span<const double> output_grad(std::size_t id) const { return nodes_[id].value.grad(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    Tensor* bound = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// Operation family. Every op throws DimensionError naming the offending
// shapes when operands do not conform.

Var matmul(Var a, Var b);
/// a * x (+ bias) with a constant sparse left operand. `a` and `bias` must
/// outlive the tape's backward pass; the bias is a constant.
Var spmm(const SparseMatrix& a, Var x, const Tensor* bias = nullptr);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Row r multiplied by the constant factors[r].
Var scale_rows(Var a, std::vector<double> factors);
Var leaky_relu(Var a, double slope = 0.2);
Var sigmoid(Var a);
Var log(Var a);
/// log(sigmoid(a)), evaluated stably. With clamp > 0 the sigmoid is first
/// clamped to [clamp, 1 - clamp] (zero gradient where the clamp is active).
Var log_sigmoid(Var a, double clamp = 0.0);
Var concat_cols(std::span<const Var> parts);
/// out[i] = a[indices[i]].
Var gather_rows(Var a, std::vector<std::size_t> indices);
/// out has out_rows rows; out[indices[i]] += a[i].
Var scatter_add_rows(Var a, std::vector<std::size_t> indices, std::size_t out_rows);
/// out[s] = mean of the rows of a labelled s; empty segments give zero rows.
Var segment_mean(Var a, std::vector<std::size_t> labels, std::size_t segments);
/// n x 1 column of per-row inner products.
Var rowwise_dot(Var a, Var b);
Var sum(Var a);
Var squared_norm(Var a);
Var softmax_rows(Var a);
/// weights is G x K, values is (G*K) x W; out[g] = sum_k weights[g,k] * values[g*K + k].
Var group_weighted_sum(Var weights, Var values);
Var reshape(Var a, std::size_t rows, std::size_t cols);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace kcgn
