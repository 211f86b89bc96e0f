#include "nams/autodiff/adam.hpp"

#include <cmath>

#include "nams/common/error.hpp"

namespace nams::ad {
namespace {

void apply(Tensor& value, Tensor& m, Tensor& v, std::uint64_t step, const Tensor& grad, const AdamConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  auto& w = value.values();
  auto& mv = m.values();
  auto& vv = v.values();
  const auto& gv = grad.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    mv[i] = c.beta1 * mv[i] + (1.0 - c.beta1) * gv[i];
    vv[i] = c.beta2 * vv[i] + (1.0 - c.beta2) * gv[i] * gv[i];
    const double mhat = mv[i] / bc1;
    const double vhat = vv[i] / bc2;
    w[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
  }
}

}  // namespace

void AdamConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw InvalidArgument("AdamConfig: beta1 must be in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw InvalidArgument("AdamConfig: beta2 must be in (0,1)");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("AdamConfig: learning_rate must be non-negative");
  if (!(epsilon > 0.0)) throw InvalidArgument("AdamConfig: epsilon must be positive");
}

void adam_step(ModelParameters& params, const ParameterGrads& grads, const AdamConfig& config) {
  config.validate();
  for (const auto& [name, grad] : grads) {
    const ParameterEntry& e = params.entry(name);
    if (!grad.same_shape(e.value)) {
      throw InvalidArgument("adam_step: gradient for '" + name + "' has shape " + grad.shape_string() +
                            ", parameter has " + e.value.shape_string());
    }
    if (!grad.all_finite()) throw NumericalError("adam_step: non-finite gradient for parameter '" + name + "'");
  }
  for (const auto& [name, grad] : grads) {
    ParameterEntry& e = params.entry(name);
    if (!e.trainable) continue;
    ++e.step;
    apply(e.value, e.first_moment, e.second_moment, e.step, grad, config);
  }
}

AdamState::AdamState(const Tensor& like) : m_(like.shape(), 0.0), v_(like.shape(), 0.0) {}

void AdamState::step(Tensor& value, const Tensor& grad, const AdamConfig& config) {
  if (!grad.same_shape(value) || !value.same_shape(m_)) {
    throw InvalidArgument("AdamState::step: shape mismatch " + grad.shape_string() + " vs " + value.shape_string());
  }
  ++steps_;
  apply(value, m_, v_, steps_, grad, config);
}

}  // namespace nams::ad
