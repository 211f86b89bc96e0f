#include "nams/autodiff/mlp.hpp"

#include <cmath>

#include "nams/common/error.hpp"

namespace nams::ad {

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0) throw InvalidArgument("Mlp '" + spec_.name + "': zero dimension");
}

std::string Mlp::key(std::size_t layer, const char* kind) const {
  return spec_.name + ".l" + std::to_string(layer) + "." + kind;
}

void Mlp::init(ModelParameters& params, Rng& rng) const {
  std::size_t in = spec_.input_dim;
  const std::size_t layers = spec_.hidden.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool is_output = l + 1 == layers;
    const std::size_t out = is_output ? spec_.output_dim : spec_.hidden[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::matrix(in, out);
    for (auto& v : w.values()) v = rng.uniform(-limit, limit);
    params.add(key(l, "weight"), std::move(w));
    params.add(key(l, "bias"), Tensor({out}, 0.0));
    if (!is_output && spec_.batchnorm) {
      params.add(key(l, "gamma"), Tensor({out}, 1.0));
      params.add(key(l, "beta"), Tensor({out}, 0.0));
      params.add(key(l, "running_mean"), Tensor({out}, 0.0), false);
      params.add(key(l, "running_var"), Tensor({out}, 1.0), false);
    }
    in = out;
  }
}

namespace {

NodeId activate(Graph& g, NodeId x, Activation a, double slope) {
  switch (a) {
    case Activation::None:
      return x;
    case Activation::LeakyRelu:
      return leaky_relu(g, x, slope);
    case Activation::Relu:
      return relu(g, x);
    case Activation::Sigmoid:
      return sigmoid(g, x);
  }
  return x;
}

}  // namespace

NodeId Mlp::forward(Graph& g, NodeId x, ModelParameters& params, Mode mode, Rng* dropout_rng) const {
  const std::size_t layers = spec_.hidden.size() + 1;
  NodeId h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool is_output = l + 1 == layers;
    NodeId w = g.parameter(params, key(l, "weight"));
    NodeId b = g.parameter(params, key(l, "bias"));
    h = affine(g, h, w, b, spec_.name + ".l" + std::to_string(l));
    if (is_output) {
      h = activate(g, h, spec_.output_activation, spec_.leaky_slope);
      break;
    }
    if (spec_.batchnorm) {
      NodeId gamma = g.parameter(params, key(l, "gamma"));
      NodeId beta = g.parameter(params, key(l, "beta"));
      BatchNormOptions opts;
      opts.mode = mode;
      h = batchnorm(g, h, gamma, beta, opts, &params.get(key(l, "running_mean")),
                    &params.get(key(l, "running_var")), spec_.name + ".l" + std::to_string(l) + ".bn");
    }
    h = activate(g, h, spec_.hidden_activation, spec_.leaky_slope);
    if (spec_.dropout > 0.0 && mode == Mode::Train) {
      if (!dropout_rng) throw InvalidArgument("Mlp '" + spec_.name + "': train-mode dropout needs an rng");
      h = dropout(g, h, spec_.dropout, mode, *dropout_rng);
    }
  }
  return h;
}

}  // namespace nams::ad
