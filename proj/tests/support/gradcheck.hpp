#pragma once

// Central finite-difference oracle for the autodiff tape. Independent of the
// backward implementations: it only evaluates forward passes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nams/autodiff/graph.hpp"

namespace nams::testing {

/// Builds a scalar loss from leaves that were registered as graph inputs.
using LossBuilder = std::function<ad::NodeId(ad::Graph&, const std::vector<ad::NodeId>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Compares analytic gradients of every leaf entry to central differences.
inline GradCheckResult check_gradients(const LossBuilder& build, std::vector<ad::Tensor> leaves, double h = 1e-5) {
  auto evaluate = [&](const std::vector<ad::Tensor>& values) {
    ad::Graph g;
    std::vector<ad::NodeId> ids;
    for (const auto& t : values) ids.push_back(g.input(t, true));
    return g.value(build(g, ids)).item();
  };

  ad::Graph g;
  std::vector<ad::NodeId> ids;
  for (const auto& t : leaves) ids.push_back(g.input(t, true));
  ad::NodeId loss = build(g, ids);
  g.backward(loss);

  GradCheckResult result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const ad::Tensor analytic = g.grad(ids[l]);
    for (std::size_t i = 0; i < leaves[l].size(); ++i) {
      const double saved = leaves[l][i];
      leaves[l][i] = saved + h;
      const double up = evaluate(leaves);
      leaves[l][i] = saved - h;
      const double down = evaluate(leaves);
      leaves[l][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i], numeric));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace nams::testing
