#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "nams/sim/design.hpp"
#include "nams/sim/image.hpp"

namespace nams::features {

/// Layout of the hand-crafted feature vector.
namespace layout {
inline constexpr std::size_t kBins = 8;
inline constexpr std::size_t kHueHist = 0;        // 8, saturation-weighted hue histogram
inline constexpr std::size_t kSatHist = 8;        // 8
inline constexpr std::size_t kValHist = 16;       // 8
inline constexpr std::size_t kChannelMean = 24;   // 3, RGB in [0,1]
inline constexpr std::size_t kChannelStd = 27;    // 3
inline constexpr std::size_t kGradient = 30;      // 4: horizontal, vertical, diagonal, anti-diagonal
inline constexpr std::size_t kGrid = 34;          // 12: 2x2 quadrants x mean (h, s, v)
inline constexpr std::size_t kDim = 46;
}  // namespace layout

using FeatureVector = std::vector<double>;

/// Deterministic 46-D descriptor of an RGB image.
FeatureVector extract(const sim::Image& image);

/// The dihedral images: four rotations of the input followed by the four
/// rotations of its horizontal mirror. Throws on non-square input.
std::array<sim::Image, 8> augment8(const sim::Image& image);

/// Mean of extract() over augment8(image).
FeatureVector extract_augmented(const sim::Image& image);

inline constexpr std::size_t kGroupSize = 9;

/// The atomic matching unit: nine renders sharing one design.
struct FeatureGroup {
  sim::DiscreteDesign design;
  std::vector<std::uint64_t> zetas;
  /// extract_augmented() of each member image.
  std::vector<FeatureVector> members;
  /// Mean over all 72 augmented member images.
  FeatureVector averaged;
};

/// Requires exactly nine images.
FeatureGroup group_features(std::span<const sim::Image> images, const sim::DiscreteDesign& design = {},
                            std::vector<std::uint64_t> zetas = {});

/// Arithmetic mean of equally sized vectors.
FeatureVector mean_of(std::span<const FeatureVector> vectors);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

inline constexpr int kFeatureFormatVersion = 1;

/// One JSON-lines record per group: design indices, zeta list, averaged
/// features and member features.
nlohmann::json to_json(const FeatureGroup& group);
FeatureGroup feature_group_from_json(const nlohmann::json& j);
void write_feature_jsonl(const std::filesystem::path& path, std::span<const FeatureGroup> groups);
std::vector<FeatureGroup> read_feature_jsonl(const std::filesystem::path& path);

/// Per-dimension standardization fitted on a corpus.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  static FeatureScaler fit(std::span<const FeatureVector> corpus);
  /// Identity scaler of the given dimension.
  static FeatureScaler identity(std::size_t dim);

  FeatureVector transform(std::span<const double> x) const;
  FeatureVector inverse(std::span<const double> x) const;
  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace nams::features
