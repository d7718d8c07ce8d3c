#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "m2oe2/diff/params.hpp"
#include "m2oe2/diff/tensor.hpp"

namespace m2oe2::diff {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the
/// owning Graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// One recording of a computation (a tape). Operations append nodes as they
/// evaluate; backward() walks the tape in reverse and accumulates adjoints.
///
/// A Graph is single-threaded. Separate graphs over the same read-only
/// ParamSet may be used concurrently.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::uint32_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// A value that never receives a gradient.
  Var constant(Tensor t);
  /// A leaf that receives a gradient when t.requires_grad() is set.
  Var input(Tensor t);
  /// Leaf bound to a parameter. Each parameter maps to a single node per graph.
  Var param(const ParamSet& params, std::size_t index);
  Var param(const ParamSet& params, std::string_view name);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Returns one gradient per parameter of
  /// `params`, zero-filled where the loss does not depend on it.
  Gradients backward(Var loss, const ParamSet& params);
  /// Reverse sweep without a parameter set; gradients are read with grad().
  void backward(Var loss);
  /// Adjoint of a node after backward(); zeros when nothing reached it.
  Tensor grad(Var v) const;

  // Building blocks for operations.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward back);
  Var record(Tensor value, const std::vector<Var>& parents, Backward back);
  const Tensor& node_value(std::uint32_t id) const { return nodes_[id].value; }
  const Tensor& node_grad(std::uint32_t id) const { return nodes_[id].grad; }
  /// Adjoint buffer of a parent, or nullptr when it needs no gradient.
  Tensor* accumulator(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward back;
    std::int64_t param = -1;
    bool needs_grad = false;
  };

  Var push(Node node);
  void sweep(Var loss);

  std::vector<Node> nodes_;
  const ParamSet* bound_ = nullptr;
  std::unordered_map<std::size_t, std::uint32_t> param_nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(*this); }

}  // namespace m2oe2::diff
