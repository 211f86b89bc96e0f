#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nams/sim/color.hpp"
#include "nams/sim/design.hpp"
#include "nams/sim/image.hpp"

namespace nams::sim {

enum class Pattern { Solid, Stripe, Checker, Speckle };

struct TextureSpec {
  int id = 0;
  Hsv base;
  Pattern pattern = Pattern::Solid;
  int pattern_scale = 1;
  /// Fractional darkening of the pattern's dark phase, in [0, 1].
  double pattern_contrast = 0.0;
};

enum class BankId { InDomain, HeldOut };

std::string to_string(BankId id);
BankId parse_bank(const std::string& name);

/// Flat-roof and sloped-roof textures of one named bank.
///
/// Textures are laid out on a hue ring crossed with four saturation/value
/// tiers: index i uses hue slot i % n and tier i / n, where n = ceil(K / 4).
/// Flat hues sit on the slots and sloped hues halfway between them; the
/// held-out bank shifts every hue by 0.6 of a slot so each held-out texture
/// has a unique nearest in-domain texture (next slot, same tier).
struct TextureBank {
  BankId id = BankId::InDomain;
  std::vector<TextureSpec> flat;
  std::vector<TextureSpec> sloped;

  const std::vector<TextureSpec>& family(Family f) const { return f == Family::Flat ? flat : sloped; }
  /// Throws InvalidArgument on a bad index.
  const TextureSpec& texture(Family f, int index) const;
  DesignSpace space() const { return {static_cast<int>(flat.size()), static_cast<int>(sloped.size())}; }
};

/// Deterministic bank construction. Building the held-out bank also checks
/// that it is disjoint from the in-domain bank in hue/saturation.
TextureBank make_bank(BankId id, const DesignSpace& space);

/// Minimum hue/saturation distance enforced between in-domain and held-out textures.
inline constexpr double kMinBankSeparation = 0.05;

/// Hue/saturation distance used for the bank-disjointness check.
double hue_sat_distance(const Hsv& a, const Hsv& b);

/// Noise-free color of a texture at local coordinates (u, v); `shade`
/// scales the value channel (1 = lit side).
std::array<std::uint8_t, 3> texture_color(const TextureSpec& spec, int u, int v, double shade = 1.0);

inline constexpr int kSwatchSize = 16;

/// Deterministic 16x16 rendering of one texture.
Image texture_swatch(const TextureBank& bank, Family family, int index);

/// Mean HSV of a patch with a circular hue mean.
Hsv mean_hsv(const Image& patch);

/// Distance between mean-HSV triples: hue is circular (fraction of a turn)
/// and the components are weighted [2, 1, 1].
double hsv_patch_distance(const Hsv& a, const Hsv& b);

struct RankedTexture {
  int id = 0;
  double distance = 0.0;
};

/// All textures of one family ordered by ascending distance to the query
/// patch (ties broken by lower id).
std::vector<RankedTexture> texture_similarity_rank(const Image& query, const TextureBank& bank, Family family);

/// Position (0-based) of `id` in a ranking; throws if absent.
int rank_of(const std::vector<RankedTexture>& ranking, int id);

}  // namespace nams::sim
