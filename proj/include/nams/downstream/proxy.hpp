#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "nams/autodiff/adam.hpp"
#include "nams/autodiff/mlp.hpp"
#include "nams/core/population.hpp"
#include "nams/sim/simulator.hpp"

namespace nams::downstream {

/// 3x3 RGB neighbourhood, row-major, channels interleaved, scaled to [0,1].
constexpr std::size_t kPatchDim = 27;

/// Row-major [n, 27] patches with one building/background label per row.
struct PixelDataset {
  std::vector<double> features;
  std::vector<std::uint8_t> labels;
  std::size_t sim_calls = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * kPatchDim, kPatchDim}; }
  void append(std::span<const double> patch, bool building);
};

/// Patch centred on (x, y). Coordinates outside the image are clamped to the
/// edge, which only matters for the 1-pixel border at evaluation time.
void extract_patch(const sim::Image& image, int x, int y, std::span<double> out);

struct SampleConfig {
  int tiles_per_design = 2;
  /// Cap on sampled pixels of each class per tile.
  int pixels_per_class = 200;
};

/// Simulates `tiles_per_design` fresh tiles for every population entry and
/// draws an equal number of building and background interior pixels from
/// each. Tiles with only one class contribute up to the cap of that class.
PixelDataset build_training_set(const core::DesignPopulation& population, const sim::Simulator& simulator,
                                const SampleConfig& config, std::uint64_t seed);

/// Same sampling applied to already-rendered tiles (no simulator calls).
void sample_tile(const sim::SimOutput& tile, int pixels_per_class, Rng& rng, PixelDataset& out);

struct ProxyConfig {
  std::size_t hidden = 32;
  int epochs = 30;
  std::size_t batch = 256;
  ad::AdamConfig adam{0.01, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ProxyConfig from_json(const nlohmann::json& j);
};

/// Per-pixel building classifier: 27 -> hidden (sigmoid) -> 1 (sigmoid).
class ProxyClassifier {
 public:
  ProxyClassifier() = default;
  ProxyClassifier(std::size_t hidden, std::uint64_t seed);

  ad::ModelParameters& params() { return params_; }
  const ad::ModelParameters& params() const { return params_; }
  ad::NodeId forward(ad::Graph& g, ad::NodeId x);

  /// Building probabilities for a row-major [n, 27] block.
  std::vector<double> probabilities(std::span<const double> patches) const;
  /// Thresholded (p >= 0.5) building mask for a whole tile.
  sim::LabelMap segment(const sim::Image& image) const;

 private:
  ad::Mlp net_;
  ad::ModelParameters params_;
};

struct ProxyTrainReport {
  std::vector<double> epoch_loss;  // mean BCE per epoch
  double train_accuracy = 0.0;
};

/// Full-batch-shuffled minibatch ADAM on BCE. Throws NumericalError when the
/// loss stops being finite and InvalidArgument on an empty dataset.
ProxyTrainReport train_proxy(ProxyClassifier& model, const PixelDataset& data, const ProxyConfig& config);

struct IoUCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  std::uint64_t pixels = 0;
};

/// Building-class counts; any non-background label counts as building.
IoUCounts iou_counts(const sim::LabelMap& predicted, const sim::LabelMap& truth);
/// intersection / union; 1 when both prediction and truth are empty.
double iou(const IoUCounts& c);

struct IoUReport {
  double iou = 0.0;
  std::size_t tiles = 0;
  IoUCounts counts;
};

/// Pooled building IoU of the thresholded classifier over all target tiles.
IoUReport eval_iou(const ProxyClassifier& model, std::span<const sim::SimOutput> targets);

}  // namespace nams::downstream
