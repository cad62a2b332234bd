#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dua/tensor.hpp"

namespace dua::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

using GradientMap = std::map<std::string, Tensor>;

/// View handed to a primitive's backward function.
class BackwardContext {
 public:
  BackwardContext(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}

  const Tensor& out_value() const;
  const Tensor& out_grad() const;
  std::size_t input_count() const;
  const Tensor& input(std::size_t i) const;
  /// Gradient accumulator of input i, or nullptr when that input needs none.
  Tensor* input_grad(std::size_t i);

 private:
  Tape& tape_;
  std::size_t node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Ordered record of executed primitives. Confined to one thread; the
/// parameter tensors it references must outlive it and stay unchanged.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(Tensor value);
  /// Named trainable leaf referencing caller-owned storage (no copy).
  Var parameter(const std::string& name, const Tensor& value);

  /// Appends a primitive result. Inputs must already be on this tape.
  Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar. Returns a gradient for every parameter
  /// registered on the tape; unreached parameters get zeros.
  GradientMap backward(Var loss);

  const Tensor& value(std::size_t id) const;
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  /// Throw NonFiniteError after any primitive producing NaN/Inf.
  void set_check_finite(bool enabled) noexcept { check_finite_ = enabled; }
  bool check_finite() const noexcept { return check_finite_; }

 private:
  friend class BackwardContext;

  struct Node {
    std::string_view op;
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    const std::string* param_name = nullptr;
  };

  Tensor& grad_slot(std::size_t id);

  std::deque<Node> nodes_;  // deque: values stay put while the tape grows
  std::map<std::string, std::size_t> params_;
  bool check_finite_;
};

}  // namespace dua::ad
