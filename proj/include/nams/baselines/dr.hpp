#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "nams/autodiff/adam.hpp"
#include "nams/autodiff/mlp.hpp"
#include "nams/features/features.hpp"
#include "nams/sim/design.hpp"

namespace nams::baselines {

struct DrConfig {
  std::vector<std::size_t> hidden = std::vector<std::size_t>(5, 500);
  int epochs = 200;
  /// Upper bound; the effective batch is min(batch, max(2, n / 10)).
  std::size_t batch = 1000;
  double validation_fraction = 0.2;
  /// L2 strength alpha; the penalty is 0.5 * alpha * sum(w^2) / batch_rows.
  double l2 = 0.5;
  ad::AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DrConfig from_json(const nlohmann::json& j);
};

struct DrExample {
  features::FeatureVector features;
  sim::DiscreteDesign design;
};

/// Direct regression from features to the concatenated one-hot design.
class DrModel {
 public:
  DrModel() = default;
  DrModel(std::size_t feature_dim, sim::DesignSpace space, std::vector<std::size_t> hidden, std::uint64_t seed);

  std::size_t feature_dim() const { return feature_dim_; }
  const sim::DesignSpace& space() const { return space_; }
  ad::ModelParameters& params() { return params_; }
  const ad::ModelParameters& params() const { return params_; }

  ad::NodeId forward(ad::Graph& g, ad::NodeId x, ad::Mode mode);
  /// Eval-mode prediction for a batch of feature rows.
  ad::Tensor predict(const ad::Tensor& x) const;

  void save(const std::filesystem::path& dir) const;
  static DrModel load(const std::filesystem::path& dir);

 private:
  std::size_t feature_dim_ = 0;
  sim::DesignSpace space_;
  std::vector<std::size_t> hidden_;
  ad::Mlp net_;
  ad::ModelParameters params_;

  void build();
};

struct DrTrainReport {
  std::vector<double> train_loss;       // per epoch, data term only
  std::vector<double> validation_loss;  // per epoch
  /// Held-out MSE of the trained model and of the training-mean predictor.
  double validation_mse = 0.0;
  double mean_predictor_mse = 0.0;
  std::size_t batch = 0;
};

DrTrainReport train_dr(DrModel& model, std::span<const DrExample> data, const DrConfig& config);

/// Per-group argmax of the regressed design. Always returns a valid design.
sim::DiscreteDesign infer_dr(const DrModel& model, std::span<const double> features);

}  // namespace nams::baselines
