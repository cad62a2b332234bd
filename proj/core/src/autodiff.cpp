#include "dua/autodiff.hpp"

#include "dua/error.hpp"

namespace dua::ad {

const Tensor& Var::value() const { return tape->value(id); }

const Tensor& BackwardContext::out_value() const { return tape_.value(node_); }
const Tensor& BackwardContext::out_grad() const { return tape_.nodes_[node_].grad; }
std::size_t BackwardContext::input_count() const { return tape_.nodes_[node_].inputs.size(); }

const Tensor& BackwardContext::input(std::size_t i) const {
  return tape_.value(tape_.nodes_[node_].inputs.at(i));
}

Tensor* BackwardContext::input_grad(std::size_t i) {
  const std::size_t id = tape_.nodes_[node_].inputs.at(i);
  if (!tape_.nodes_[id].requires_grad) return nullptr;
  return &tape_.grad_slot(id);
}

Tape::Tape() {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (params_.contains(name)) throw ContractError("parameter '" + name + "' registered twice on one tape");
  Node node;
  node.op = "parameter";
  node.external = &value;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  const std::size_t id = nodes_.size() - 1;
  auto it = params_.emplace(name, id).first;
  nodes_[id].param_name = &it->first;
  return Var{this, id};
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (check_finite_ && !value.all_finite()) throw NonFiniteError(std::string(op));
  Node node;
  node.op = op;
  node.owned = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw ContractError("primitive '" + std::string(op) + "' references a future record");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape());
    n.has_grad = true;
  }
  return n.grad;
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("loss belongs to a different tape");
  if (value(loss.id).size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(value(loss.id).shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (nodes_[loss.id].requires_grad) {
    grad_slot(loss.id).fill(Real{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      BackwardContext ctx(*this, i);
      n.backward(ctx);
    }
  }
  GradientMap grads;
  for (const auto& [name, id] : params_) {
    Node& n = nodes_[id];
    grads.emplace(name, n.has_grad ? std::move(n.grad) : Tensor(value(id).shape()));
    n.has_grad = false;
  }
  return grads;
}

}  // namespace dua::ad
