#pragma once

#include <functional>
#include <memory>

#include "gav/tensor.hpp"

namespace gav {

class Tape;

/// A value that may participate in reverse-mode differentiation.
/// id < 0 marks a constant: it carries no tape and receives no gradient.
struct Var {
  std::shared_ptr<const Tensor> val;
  int64_t id = -1;
  Tape* tape = nullptr;

  const Tensor& value() const { return *val; }
  const Shape& shape() const { return val->shape(); }
  bool is_const() const { return id < 0; }
};

/// Wrap a tensor as an untracked constant.
Var constant(Tensor t);
Var constant(double v);

/// Step-scoped record of executed operations. Create one per optimization
/// step, run the forward computation through it, call backward() once, read
/// gradients, discard. A tape is confined to a single execution context.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Register a leaf variable (an input we want gradients for).
  Var leaf(Tensor t);

  /// Custom-op interface: reserve an output slot, then record the node that
  /// propagates gradients from the reserved slots back to the inputs.
  /// Nodes run in reverse recording order exactly once.
  int64_t fresh(Shape out_shape);
  void record(std::function<void(Tape&)> back);
  Var wrap(Tensor value, int64_t id) {
    return Var{std::make_shared<Tensor>(std::move(value)), id, this};
  }

  /// Accumulate a gradient contribution into slot `id`.
  void accum(int64_t id, const Tensor& g);
  void accum_at(int64_t id, int64_t flat_index, double g);

  /// Gradient read during backprop; nullptr when nothing has flowed yet.
  const Tensor* grad_in(int64_t id) const;

  /// Run reverse accumulation from a scalar output. Throws if the output is
  /// not scalar, does not belong to this tape, or backward already ran.
  void backward(const Var& out);

  /// Gradient of a recorded variable after backward(); exact zeros when the
  /// variable did not participate in the output.
  Tensor grad(const Var& v) const;

  bool backward_done() const { return done_; }
  int64_t num_nodes() const { return static_cast<int64_t>(nodes_.size()); }

 private:
  struct Node {
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;   // by variable id
  std::vector<Shape> shapes_;   // by variable id
  std::vector<bool> inited_;    // by variable id; false == zero so far
  bool done_ = false;
};

/// Asserts that all tracked inputs live on the same tape; returns it
/// (nullptr when every input is a constant).
Tape* common_tape(std::initializer_list<const Var*> vars);

}  // namespace gav
