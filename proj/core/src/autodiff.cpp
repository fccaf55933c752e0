#include "snn/autodiff.hpp"

#include <algorithm>

#include "snn/error.hpp"

namespace snn {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

const Tensor& BackwardContext::output() const { return tape_.nodes_[node_].value; }

const Tensor& BackwardContext::input(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(k)].value;
}

bool BackwardContext::needs_grad(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(k)].requires_grad;
}

std::span<double> BackwardContext::input_grad(std::size_t k) {
  const std::size_t id = tape_.nodes_[node_].inputs.at(k);
  if (!tape_.nodes_[id].requires_grad) return {};
  return tape_.grad_buffer(id);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::parameter(Tensor& param) {
  if (!param.has_grad()) param.enable_grad();
  Node node;
  node.value = param;
  node.value.storage().shrink_to_fit();
  node.sink = &param;
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardRule rule) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("Var belongs to a different tape");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.rule = std::move(rule);
  return push(std::move(node));
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw ContractError("loss belongs to a different tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  for (Node& node : nodes_) node.grad.clear();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.rule) {
      BackwardContext ctx(*this, id, node.grad);
      node.rule(ctx);
    }
    if (node.sink) {
      std::span<double> dst = node.sink->grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
    }
  }
}

std::span<const double> Tape::grad(const Var& v) const {
  if (&v.tape() != this) throw ContractError("Var belongs to a different tape");
  return nodes_[v.id()].grad;
}

}  // namespace snn
