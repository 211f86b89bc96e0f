#pragma once

#include <atomic>
#include <cstdint>

#include "nams/sim/design.hpp"
#include "nams/sim/image.hpp"
#include "nams/sim/texture.hpp"

namespace nams::sim {

struct SimConfig {
  int tile_size = 64;
  int min_buildings = 3;
  int max_buildings = 8;
  int min_building_side = 12;
  int max_building_side = 24;
  /// Per-channel uniform noise amplitude on ground and roof pixels.
  int ground_noise = 10;
  int roof_noise = 4;
  /// Value multiplier for the shaded half of a sloped roof.
  double ridge_shade = 0.8;
};

/// Optional post-process emulating a rendering/sensor mismatch. Only ever
/// applied to target renders.
struct AppearanceGap {
  bool enabled = false;
  double gamma = 1.3;
  int blur_radius = 1;
  double noise_amplitude = 6.0;
};

struct SimOutput {
  Image image;
  LabelMap mask;
  DiscreteDesign design;
  std::uint64_t zeta = 0;
  BankId bank = BankId::InDomain;
};

/// The black-box renderer: a pure function of (design, zeta, bank, config).
SimOutput simulate(const DiscreteDesign& design, std::uint64_t zeta, const TextureBank& bank,
                   const SimConfig& config = {});
/// Accepts only discrete one-hot designs; relaxed designs throw InvalidArgument.
SimOutput simulate(const DesignVector& design, std::uint64_t zeta, const TextureBank& bank,
                   const SimConfig& config = {});

/// Deterministic in-place post-process; no-op when disabled.
void apply_appearance_gap(Image& image, const AppearanceGap& gap, std::uint64_t seed);

/// Simulator handle bound to one bank that counts its invocations.
class Simulator {
 public:
  explicit Simulator(TextureBank bank, SimConfig config = {}, std::atomic<std::uint64_t>* calls = nullptr);

  SimOutput operator()(const DiscreteDesign& design, std::uint64_t zeta) const;

  const TextureBank& bank() const { return bank_; }
  const SimConfig& config() const { return config_; }
  DesignSpace space() const { return bank_.space(); }
  void set_counter(std::atomic<std::uint64_t>* calls) { calls_ = calls; }

 private:
  TextureBank bank_;
  SimConfig config_;
  std::atomic<std::uint64_t>* calls_;
};

/// Fraction of mask pixels that belong to a building.
double building_fraction(const LabelMap& mask);

}  // namespace nams::sim
