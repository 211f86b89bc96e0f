#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "nams/core/model.hpp"
#include "nams/features/features.hpp"

namespace nams::core {

/// One training pair: a design and the (standardized) averaged features of
/// its nine renders.
struct TrainingExample {
  sim::DiscreteDesign design;
  features::FeatureVector target;
};

struct NamsTrainConfig {
  int epochs = 5000;
  std::size_t batch = 64;
  double validation_fraction = 0.1;
  ad::AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static NamsTrainConfig from_json(const nlohmann::json& j);
};

/// Unweighted loss terms; total applies the model's lambdas.
struct LossTerms {
  double total = 0.0;
  double predict = 0.0;
  double decode = 0.0;
  double kld = 0.0;
};

struct NamsTrainReport {
  std::vector<LossTerms> train;       // per epoch, mean over batches
  std::vector<LossTerms> validation;  // per epoch, empty when no split
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Trains encoder, decoder and predictor jointly, then stores the
/// per-dimension std of the training mu's as the model's latent sigma.
/// Throws NumericalError naming the epoch on divergence.
NamsTrainReport train_nams(NamsModel& model, std::span<const TrainingExample> data, const NamsTrainConfig& config);

/// Loss terms of the model on `data` in eval mode with e = 0.
LossTerms evaluate_losses(const NamsModel& model, std::span<const TrainingExample> data);

}  // namespace nams::core
