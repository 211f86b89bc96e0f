#include "nams/sim/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "nams/common/error.hpp"
#include "nams/common/rng.hpp"

namespace nams::sim {
namespace {

struct GroundType {
  Hsv color;
};

// Soil, grass and asphalt. Soil and grass deliberately sit close to some
// low-saturation roof tiers.
constexpr std::array<GroundType, 3> kGround = {{
    {{30.0, 0.35, 0.50}},
    {{100.0, 0.40, 0.42}},
    {{210.0, 0.08, 0.40}},
}};

std::uint8_t jitter(std::uint8_t base, int amplitude, Rng& rng) {
  if (amplitude <= 0) return base;
  int delta = rng.between(-amplitude, amplitude);
  return static_cast<std::uint8_t>(std::clamp(static_cast<int>(base) + delta, 0, 255));
}

}  // namespace

SimOutput simulate(const DiscreteDesign& design, std::uint64_t zeta, const TextureBank& bank,
                   const SimConfig& config) {
  const TextureSpec& flat_tex = bank.texture(Family::Flat, design.flat);
  const TextureSpec& sloped_tex = bank.texture(Family::Sloped, design.sloped);
  const int size = config.tile_size;
  if (size < config.max_building_side) throw InvalidArgument("simulate: tile smaller than a building");

  Rng layout(zeta, 1);
  Rng noise(zeta, 2);

  SimOutput out;
  out.image = Image(size, size);
  out.mask = LabelMap(size, size);
  out.design = design;
  out.zeta = zeta;
  out.bank = bank.id;

  const auto ground = hsv_to_rgb(kGround[layout.below(kGround.size())].color);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      out.image.set(x, y,
                    {jitter(ground[0], config.ground_noise, noise), jitter(ground[1], config.ground_noise, noise),
                     jitter(ground[2], config.ground_noise, noise)});
    }

  const int buildings = layout.between(config.min_buildings, config.max_buildings);
  for (int b = 0; b < buildings; ++b) {
    const int w = layout.between(config.min_building_side, config.max_building_side);
    const int h = layout.between(config.min_building_side, config.max_building_side);
    const int x0 = layout.between(0, size - w);
    const int y0 = layout.between(0, size - h);
    const bool sloped = layout.bernoulli(0.5);
    const TextureSpec& tex = sloped ? sloped_tex : flat_tex;
    const bool ridge_horizontal = w >= h;
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) {
        const int u = x - x0;
        const int v = y - y0;
        double shade = 1.0;
        if (sloped) {
          const bool shaded_side = ridge_horizontal ? (v >= h / 2) : (u >= w / 2);
          if (shaded_side) shade = config.ridge_shade;
        }
        auto rgb = texture_color(tex, u, v, shade);
        out.image.set(x, y,
                      {jitter(rgb[0], config.roof_noise, noise), jitter(rgb[1], config.roof_noise, noise),
                       jitter(rgb[2], config.roof_noise, noise)});
        out.mask.set(x, y, sloped ? kSlopedBuilding : kFlatBuilding);
      }
  }
  return out;
}

SimOutput simulate(const DesignVector& design, std::uint64_t zeta, const TextureBank& bank, const SimConfig& config) {
  if (design.space().flat_count != bank.space().flat_count || design.space().sloped_count != bank.space().sloped_count) {
    throw InvalidArgument("simulate: design dimensions do not match the texture bank");
  }
  return simulate(design.to_discrete(), zeta, bank, config);
}

void apply_appearance_gap(Image& image, const AppearanceGap& gap, std::uint64_t seed) {
  if (!gap.enabled) return;
  Rng rng(seed, 3);
  Image src = image;
  const int r = std::max(0, gap.blur_radius);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      std::array<double, 3> acc{0, 0, 0};
      int n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int xx = std::clamp(x + dx, 0, image.width - 1);
          int yy = std::clamp(y + dy, 0, image.height - 1);
          auto p = src.at(xx, yy);
          for (int c = 0; c < 3; ++c) acc[c] += p[c];
          ++n;
        }
      std::array<std::uint8_t, 3> px{};
      for (int c = 0; c < 3; ++c) {
        double val = std::pow(acc[c] / n / 255.0, gap.gamma) * 255.0;
        val += rng.uniform(-gap.noise_amplitude, gap.noise_amplitude);
        px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
      image.set(x, y, px);
    }
}

Simulator::Simulator(TextureBank bank, SimConfig config, std::atomic<std::uint64_t>* calls)
    : bank_(std::move(bank)), config_(config), calls_(calls) {}

SimOutput Simulator::operator()(const DiscreteDesign& design, std::uint64_t zeta) const {
  if (calls_) calls_->fetch_add(1, std::memory_order_relaxed);
  return simulate(design, zeta, bank_, config_);
}

double building_fraction(const LabelMap& mask) {
  if (mask.labels.empty()) return 0.0;
  std::size_t n = std::count_if(mask.labels.begin(), mask.labels.end(), [](std::uint8_t l) { return l != kBackground; });
  return static_cast<double>(n) / static_cast<double>(mask.labels.size());
}

}  // namespace nams::sim
