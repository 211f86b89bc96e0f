#include "nams/autodiff/graph.hpp"

#include "nams/common/error.hpp"

namespace nams::ad {

NodeId Graph::input(Tensor value, bool requires_grad, std::string label) {
  Node n;
  n.op = std::move(label);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::parameter(const ModelParameters& params, const std::string& name) {
  const ParameterEntry& e = params.entry(name);
  Node n;
  n.op = "param:" + name;
  n.value = e.value;
  n.requires_grad = e.trainable && !frozen_;
  n.parameter = name;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::record(std::string op, Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) throw InvalidArgument("Graph: node '" + n.op + "' references unknown input");
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  if (!backward) n.requires_grad = false;
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) throw InvalidArgument("Graph: unknown node id " + std::to_string(id));
  return nodes_[id];
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }
const Tensor& Graph::grad(NodeId id) const { return node(id).grad; }
bool Graph::requires_grad(NodeId id) const { return node(id).requires_grad; }
const std::string& Graph::op(NodeId id) const { return node(id).op; }

Tensor& Graph::grad_buffer(NodeId id) {
  node(id);
  return nodes_[id].grad;
}

void Graph::accumulate(NodeId id, const Tensor& delta) {
  Node& n = nodes_.at(id);
  if (!n.requires_grad) return;
  if (!delta.same_shape(n.value)) {
    throw InvalidArgument("Graph: gradient shape " + delta.shape_string() + " does not match node '" + n.op +
                          "' of shape " + n.value.shape_string());
  }
  auto& g = n.grad.values();
  const auto& d = delta.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

void Graph::backward(NodeId loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw InvalidArgument("Graph::backward: loss node '" + l.op + "' is not scalar (shape " +
                          l.value.shape_string() + ")");
  }
  for (auto& n : nodes_) n.grad = n.requires_grad ? Tensor(n.value.shape(), 0.0) : Tensor();
  if (!nodes_[loss].requires_grad) {
    backward_done_ = true;
    return;
  }
  nodes_[loss].grad.values()[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backward) n.backward(*this, id);
  }
  backward_done_ = true;
}

ParameterGrads Graph::parameter_grads(const ModelParameters& params) const {
  ParameterGrads grads = params.zero_grads();
  if (!backward_done_) return grads;
  for (const auto& n : nodes_) {
    if (n.parameter.empty() || !n.requires_grad) continue;
    auto it = grads.find(n.parameter);
    if (it == grads.end()) continue;
    auto& g = it->second.values();
    const auto& d = n.grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
  }
  return grads;
}

}  // namespace nams::ad
