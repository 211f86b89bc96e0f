#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nams/autodiff/parameters.hpp"
#include "nams/autodiff/tensor.hpp"

namespace nams::ad {

using NodeId = std::size_t;

enum class Mode { Train, Eval };

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order and backward() walks it in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  /// Leaf holding a constant or a differentiable input.
  NodeId input(Tensor value, bool requires_grad = false, std::string label = "input");

  /// Leaf bound to a ModelParameters entry (copied by value). Requires a
  /// gradient when the entry is trainable and parameters are not frozen.
  NodeId parameter(const ModelParameters& params, const std::string& name);

  /// While frozen, parameter leaves created afterwards carry no gradient.
  void freeze_parameters(bool frozen) { frozen_ = frozen; }

  /// Appends an operation node. `backward` may be empty for
  /// non-differentiable results.
  NodeId record(std::string op, Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const;
  const std::string& op(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Adds `delta` into the gradient of `id` (no-op if it needs no gradient).
  void accumulate(NodeId id, const Tensor& delta);
  /// Mutable gradient buffer, only valid during backward.
  Tensor& grad_buffer(NodeId id);

  /// Runs reverse-mode differentiation from a scalar node.
  void backward(NodeId loss);

  /// Gradients w.r.t. every trainable entry of `params`; entries that were not
  /// reached by the last backward pass get zeros.
  ParameterGrads parameter_grads(const ModelParameters& params) const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::string parameter;
  };

  const Node& node(NodeId id) const;

  std::vector<Node> nodes_;
  bool frozen_ = false;
  bool backward_done_ = false;
};

}  // namespace nams::ad
