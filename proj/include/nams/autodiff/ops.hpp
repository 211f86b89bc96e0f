#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nams/autodiff/graph.hpp"
#include "nams/common/rng.hpp"

namespace nams::ad {

// Elementwise and structural ops. All work on rank-2 [batch, features]
// tensors unless stated otherwise; shape mismatches throw InvalidArgument
// naming the offending node.

/// x[B,in] * w[in,out] + b[out].
NodeId affine(Graph& g, NodeId x, NodeId w, NodeId b, const std::string& label = "affine");
NodeId leaky_relu(Graph& g, NodeId x, double slope);
NodeId relu(Graph& g, NodeId x);
NodeId sigmoid(Graph& g, NodeId x);
NodeId exp(Graph& g, NodeId x);
NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId mul(Graph& g, NodeId a, NodeId b);
NodeId scale(Graph& g, NodeId x, double factor);
/// Column-wise concatenation of tensors with equal row counts.
NodeId concat(Graph& g, const std::vector<NodeId>& parts);
/// Columns [begin, end) of x.
NodeId slice_cols(Graph& g, NodeId x, std::size_t begin, std::size_t end);
/// Splits x into columns [0, at) and [at, cols).
std::pair<NodeId, NodeId> split(Graph& g, NodeId x, std::size_t at);
NodeId sum(Graph& g, NodeId x);
NodeId sum_squares(Graph& g, NodeId x);

struct BatchNormOptions {
  Mode mode = Mode::Train;
  double momentum = 0.1;
  double epsilon = 1e-8;
};

/// Per-feature batch normalization followed by the gamma/beta affine.
/// Train mode uses batch statistics (batch size 1 is an error) and, when the
/// running buffers are given, updates them with an exponential moving
/// average. Eval mode normalizes with the running buffers.
NodeId batchnorm(Graph& g, NodeId x, NodeId gamma, NodeId beta, const BatchNormOptions& options,
                 Tensor* running_mean, Tensor* running_var, const std::string& label = "batchnorm");

/// Inverted dropout: retained units are scaled by 1/(1-rate) in train mode;
/// identity in eval mode.
NodeId dropout(Graph& g, NodeId x, double rate, Mode mode, Rng& rng);

// Losses, all returning a [1,1] node.

/// Mean over all elements of (pred - target)^2.
NodeId mse(Graph& g, NodeId pred, NodeId target);
/// Sum over all elements of (pred - target)^2.
NodeId sse(Graph& g, NodeId pred, NodeId target);
/// Mean binary cross-entropy; predictions are clamped to [1e-7, 1-1e-7].
NodeId bce(Graph& g, NodeId pred, NodeId target);
/// KL(N(mu, diag sigma^2) || N(0, I)) summed over features, averaged over
/// rows: 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2).
NodeId kl_gaussian(Graph& g, NodeId mu, NodeId sigma);

}  // namespace nams::ad
