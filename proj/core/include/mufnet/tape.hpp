#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mufnet/matrix.hpp"

namespace mufnet {

// A named trainable tensor. Parameters live in ModelParams; a Tape only ever
// sees copies of their values and hands gradients back by identity.
struct Parameter {
  std::string name;
  Matrix value;
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid as long as the
// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::uint32_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

// Reverse-mode gradient tape. Nodes are recorded in creation order, which is
// a topological order, so backward is a single reverse sweep.
//
// backward() may run once per tape. A second call throws ContractError; build
// a new tape for the next step.
class Tape {
 public:
  // Called with the node's own index and its accumulated output gradient.
  using BackwardFn = std::function<void(Tape&, std::uint32_t self, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value);
  // Leaf bound to a parameter. Repeated binds of the same Parameter return the
  // same node, so a weight used twice receives the sum of both gradients.
  Var param(const Parameter& p);

  // Records a new node. `inputs` decide whether the node requires gradients.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(fn));
  }

  void backward(Var loss);
  bool backward_done() const noexcept { return backward_done_; }

  // Gradient of the loss w.r.t. `v`; zeros when nothing flowed into it.
  Matrix grad(Var v) const;
  // Gradient for a bound parameter; zeros if the parameter was bound but
  // received nothing. Throws LookupError if it was never bound.
  Matrix param_grad(const Parameter& p) const;
  bool is_bound(const Parameter& p) const { return bound_.count(&p) != 0; }
  std::size_t bound_parameter_count() const noexcept { return bound_.size(); }

  std::size_t node_count() const noexcept { return nodes_.size(); }

  // Used by op implementations inside backward closures.
  const Matrix& value_of(std::uint32_t index) const { return nodes_[index].value; }
  bool needs_grad(std::uint32_t index) const { return nodes_[index].requires_grad; }
  // Lazily allocated gradient buffer shaped like the node's value.
  Matrix& grad_buffer(std::uint32_t index);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> bound_;
  bool backward_done_ = false;
};

// Differentiable ops. Every op checks shapes and throws DimensionError naming
// both operands on mismatch.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
// x + bias, with a 1 x cols bias broadcast over rows.
Var add_row(Var x, Var bias);
Var linear(Var x, Var weight, Var bias);
Var scale(Var a, double factor);
Var hadamard(Var a, Var b);
// w * a + (1 - w) * b, with w a 1 x 1 node (differentiable) ...
Var mix(Var a, Var b, Var weight);
// ... or a constant.
Var mix(Var a, Var b, double weight);
Var sigmoid(Var a);
// Exact (erf-based) GELU.
Var gelu(Var a);
Var softmax_rows(Var a);
Var mean_rows(Var a);
Var concat_cols(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
Var stack_rows(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var sum(Var a);
// Mean of several 1 x 1 nodes.
Var mean_scalars(std::span<const Var> scalars);
Var scaled_dot_attention(Var q, Var k, Var v);
// -[y log(p1) + (1 - y) log(1 - p1)] for a 1 x 2 probability row, with the
// log argument floored at 1e-12.
Var binary_cross_entropy(Var probs, int label);

}  // namespace mufnet
