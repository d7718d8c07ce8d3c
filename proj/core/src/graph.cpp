#include "m2oe2/diff/graph.hpp"

#include <stdexcept>

namespace m2oe2::diff {

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.value.set_requires_grad(false);
  return push(std::move(n));
}

Var Graph::input(Tensor t) {
  Node n;
  n.needs_grad = t.requires_grad();
  n.value = std::move(t);
  return push(std::move(n));
}

Var Graph::param(const ParamSet& params, std::size_t index) {
  if (bound_ && bound_ != &params)
    throw std::logic_error("graph already bound to a different parameter set");
  bound_ = &params;
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = params[index].value;
  n.needs_grad = true;
  n.param = static_cast<std::int64_t>(index);
  Var v = push(std::move(n));
  param_nodes_.emplace(index, v.id());
  return v;
}

Var Graph::param(const ParamSet& params, std::string_view name) {
  return param(params, params.index_of(name));
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, Backward back) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  return push(std::move(n));
}

Var Graph::record(Tensor value, const std::vector<Var>& parents, Backward back) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  return push(std::move(n));
}

Tensor* Graph::accumulator(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return &n.grad;
}

void Graph::sweep(Var loss) {
  if (loss.graph_ != this) throw std::logic_error("backward: loss was recorded on another graph");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " + to_string(lv.shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id()].needs_grad) return;
  nodes_[loss.id()].grad = Tensor(lv.shape(), 1.0);
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty() || !n.back) continue;
    n.back(*this, static_cast<std::uint32_t>(i));
  }
}

void Graph::backward(Var loss) { sweep(loss); }

Gradients Graph::backward(Var loss, const ParamSet& params) {
  if (bound_ && bound_ != &params)
    throw std::logic_error("backward: parameter set differs from the one bound to this graph");
  sweep(loss);
  Gradients out(params);
  for (const auto& [index, node] : param_nodes_) {
    const Tensor& g = nodes_[node].grad;
    if (!g.empty()) out[index] = g;
  }
  return out;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

}  // namespace m2oe2::diff
