#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "nams/autodiff/adam.hpp"
#include "nams/autodiff/graph.hpp"
#include "nams/autodiff/mlp.hpp"
#include "nams/autodiff/parameters.hpp"
#include "nams/sim/design.hpp"

namespace nams::core {

using ad::Graph;
using ad::Mode;
using ad::NodeId;
using ad::Tensor;

struct NamsConfig {
  std::size_t latent_dim = 10;
  std::size_t feature_dim = 46;
  std::vector<std::size_t> hidden{256, 512};
  double dropout = 0.5;
  double leaky_slope = 0.2;
  double lambda_p = 0.005;
  double lambda_d = 1.0;
  double lambda_kld = 0.0005;

  void validate() const;
  nlohmann::json to_json() const;
  static NamsConfig from_json(const nlohmann::json& j);
};

/// Batched latent codes; every tensor is [rows, latent_dim].
struct LatentCode {
  Tensor z;
  Tensor mu;
  Tensor sigma;
};

/// Encoder E(d) -> (mu, log sigma^2), decoder D(z) -> relaxed design and
/// predictor P(z) -> feature vector, sharing one parameter set.
class NamsModel {
 public:
  NamsModel() = default;
  NamsModel(NamsConfig config, sim::DesignSpace space, std::uint64_t seed);

  const NamsConfig& config() const { return config_; }
  const sim::DesignSpace& space() const { return space_; }
  std::size_t design_dim() const { return static_cast<std::size_t>(space_.dim()); }
  ad::ModelParameters& params() { return params_; }
  const ad::ModelParameters& params() const { return params_; }

  struct EncodeNodes {
    NodeId mu;
    NodeId logvar;
    NodeId sigma;
    NodeId z;
  };
  /// z = mu + e * sigma with sigma = exp(0.5 * logvar).
  EncodeNodes encode(Graph& g, NodeId design, NodeId noise, Mode mode, Rng* dropout_rng);
  NodeId decode(Graph& g, NodeId z, Mode mode, Rng* dropout_rng);
  NodeId predict(Graph& g, NodeId z, Mode mode, Rng* dropout_rng);

  /// Eval-mode conveniences; rows are independent samples.
  LatentCode encode(const Tensor& designs, const Tensor& noise) const;
  Tensor decode(const Tensor& z) const;
  Tensor predict(const Tensor& z) const;

  /// Per-dimension spread of the training mu's, used to size search inits.
  const std::vector<double>& latent_sigma() const { return latent_sigma_; }
  void set_latent_sigma(std::vector<double> sigma);

  /// Writes <dir>/model.json (config, space, latent sigma) and <dir>/params.json.
  void save(const std::filesystem::path& dir) const;
  static NamsModel load(const std::filesystem::path& dir);

 private:
  NamsConfig config_;
  sim::DesignSpace space_;
  ad::Mlp encoder_;
  ad::Mlp decoder_;
  ad::Mlp predictor_;
  ad::ModelParameters params_;
  std::vector<double> latent_sigma_;

  void build_networks();
  ad::ModelParameters& mutable_params() const { return const_cast<ad::ModelParameters&>(params_); }
};

/// Rows of one-hot designs, [n, K_f + K_s].
Tensor design_matrix(std::span<const sim::DiscreteDesign> designs, const sim::DesignSpace& space);

/// Per-group argmax of a relaxed [K_f + K_s] row.
sim::DiscreteDesign discretize(std::span<const double> relaxed, const sim::DesignSpace& space);

}  // namespace nams::core
