#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "nams/features/features.hpp"

namespace nams::baselines {

using Point = std::vector<double>;

/// log[(1/N) sum_i N(x; x_i, h^2 I)], evaluated with log-sum-exp.
double kde_log_density(std::span<const Point> samples, std::span<const double> x, double h);

/// Silverman's rule of thumb for an isotropic kernel: the mean per-dimension
/// std times (4 / ((d + 2) n))^(1 / (d + 4)).
double silverman_bandwidth(std::span<const Point> samples);

/// Principal-component projection fitted on a corpus.
class Pca {
 public:
  Pca() = default;
  /// Keeps the top `components` directions; sign fixed so the largest
  /// absolute loading of each component is positive.
  static Pca fit(std::span<const Point> data, std::size_t components);

  Point project(std::span<const double> x) const;
  std::size_t input_dim() const { return mean_.size(); }
  std::size_t output_dim() const { return basis_.size(); }
  const std::vector<double>& explained_variance() const { return variance_; }

  nlohmann::json to_json() const;
  static Pca from_json(const nlohmann::json& j);

 private:
  std::vector<double> mean_;
  std::vector<std::vector<double>> basis_;
  std::vector<double> variance_;
};

/// Standardize then project: the map from raw per-image features to the
/// low-dimensional space the KDEs live in.
struct FeatureProjection {
  features::FeatureScaler scaler;
  Pca pca;

  Point operator()(std::span<const double> raw) const { return pca.project(scaler.transform(raw)); }
  nlohmann::json to_json() const { return {{"scaler", scaler.to_json()}, {"pca", pca.to_json()}}; }
  static FeatureProjection from_json(const nlohmann::json& j);
};

}  // namespace nams::baselines
