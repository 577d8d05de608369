// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "percept/tensor.hpp"

namespace percept {

/// A learnable tensor with a gradient accumulator of identical shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad();
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records differentiable operations in execution order and replays them in
/// reverse to accumulate gradients.
///
/// A tape belongs to the thread that builds it. backward() may run once.
class Tape {
public:
  /// Receives the output gradient; adds input gradients via grad_slot().
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a fixed value. No gradient is tracked.
  Var constant(Tensor value);
  /// Leaf input; gradients are tracked when `requires_grad` is set.
  /// Rejects non-finite values.
  Var input(Tensor value, bool requires_grad = true);
  /// Leaf bound to a parameter; backward() accumulates into `param.grad`.
  Var parameter(Parameter& param);

  /// Records an operation node. `backward` may be empty when no input
  /// requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient buffer for node `id`, allocated as zeros on first use.
  Tensor& grad_slot(std::size_t id);
  bool wants_grad(const Var& v) const { return requires_grad(v.id()); }

  /// Reverse pass from a scalar output. Every parameter bound to this tape
  /// receives d(output)/d(param), zero when unreachable.
  void backward(const Var& output);

  /// Gradient of the last backward pass with respect to `v`; zeros when `v`
  /// was unreachable.
  Tensor grad(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace percept
