#pragma once

#include <string>
#include <vector>

#include "nams/autodiff/graph.hpp"
#include "nams/autodiff/ops.hpp"
#include "nams/autodiff/parameters.hpp"
#include "nams/common/rng.hpp"

namespace nams::ad {

enum class Activation { None, LeakyRelu, Relu, Sigmoid };

/// Fully connected stack: each hidden layer is
/// affine -> [batchnorm] -> activation -> [dropout]; the output layer is
/// affine -> output activation.
struct MlpSpec {
  std::string name;
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  bool batchnorm = true;
  Activation hidden_activation = Activation::LeakyRelu;
  double leaky_slope = 0.2;
  double dropout = 0.0;
  Activation output_activation = Activation::None;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  /// Registers weights (Glorot-uniform), zero biases, unit gamma, zero beta
  /// and batchnorm running buffers under "<name>.<layer>.<kind>".
  void init(ModelParameters& params, Rng& rng) const;

  /// Builds the forward pass on `g`. In train mode batchnorm running stats
  /// in `params` are updated and dropout draws from `dropout_rng`.
  NodeId forward(Graph& g, NodeId x, ModelParameters& params, Mode mode, Rng* dropout_rng) const;

  const MlpSpec& spec() const { return spec_; }

 private:
  std::string key(std::size_t layer, const char* kind) const;

  MlpSpec spec_;
};

}  // namespace nams::ad
