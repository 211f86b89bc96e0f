#pragma once

#include <cstdint>

#include "nams/autodiff/parameters.hpp"
#include "nams/autodiff/tensor.hpp"

namespace nams::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws InvalidArgument unless 0 < beta1, beta2 < 1 and lr, eps > 0.
  void validate() const;
};

/// One bias-corrected ADAM update of every trainable entry that has a
/// gradient. Throws NumericalError naming the entry on a non-finite gradient.
/// A zero learning rate still counts as a step but leaves values unchanged.
void adam_step(ModelParameters& params, const ParameterGrads& grads, const AdamConfig& config);

/// Free-standing ADAM state for optimizing a tensor that is not part of a
/// ModelParameters set (e.g. latent codes during search). Elementwise, so a
/// batch of independent variables can share one state.
class AdamState {
 public:
  explicit AdamState(const Tensor& like);
  void step(Tensor& value, const Tensor& grad, const AdamConfig& config);
  std::uint64_t steps() const { return steps_; }

 private:
  Tensor m_;
  Tensor v_;
  std::uint64_t steps_ = 0;
};

}  // namespace nams::ad
