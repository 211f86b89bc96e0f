#include "nams/sim/texture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nams/common/error.hpp"
#include "nams/common/rng.hpp"

namespace nams::sim {
namespace {

struct Tier {
  double s;
  double v;
  Pattern pattern;
  int scale;
};

constexpr std::array<Tier, 4> kFlatTiers = {{
    {1.00, 1.00, Pattern::Solid, 1},
    {0.55, 1.00, Pattern::Stripe, 2},
    {1.00, 0.72, Pattern::Checker, 4},
    {0.55, 0.72, Pattern::Speckle, 1},
}};

constexpr std::array<Tier, 4> kSlopedTiers = {{
    {0.85, 0.55, Pattern::Solid, 1},
    {0.40, 0.55, Pattern::Stripe, 2},
    {0.85, 0.38, Pattern::Checker, 4},
    {0.40, 0.38, Pattern::Speckle, 1},
}};

constexpr double kPatternContrast = 0.15;
// Held-out hues sit 60% of the way from one slot to the next.
constexpr double kHeldOutShift = 0.6;

std::vector<TextureSpec> make_family(int count, const std::array<Tier, 4>& tiers, double slot_offset) {
  const int hues = (count + 3) / 4;
  std::vector<TextureSpec> out;
  for (int i = 0; i < count; ++i) {
    const int slot = i % hues;
    const Tier& tier = tiers[static_cast<std::size_t>(i / hues)];
    TextureSpec t;
    t.id = i;
    t.base.h = std::fmod(360.0 * (slot + slot_offset) / hues, 360.0);
    t.base.s = tier.s;
    t.base.v = tier.v;
    t.pattern = tier.pattern;
    t.pattern_scale = tier.scale;
    t.pattern_contrast = tier.pattern == Pattern::Solid ? 0.0 : kPatternContrast;
    out.push_back(t);
  }
  return out;
}

double speckle_noise(int id, int u, int v) {
  std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(id)) << 40) ^
                      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 20) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

}  // namespace

std::string to_string(BankId id) { return id == BankId::InDomain ? "in_domain" : "held_out"; }

BankId parse_bank(const std::string& name) {
  if (name == "in_domain") return BankId::InDomain;
  if (name == "held_out") return BankId::HeldOut;
  throw InvalidArgument("unknown texture bank '" + name + "'");
}

const TextureSpec& TextureBank::texture(Family f, int index) const {
  const auto& fam = family(f);
  if (index < 0 || index >= static_cast<int>(fam.size())) {
    throw InvalidArgument("texture index " + std::to_string(index) + " outside bank " + to_string(id) + " of size " +
                          std::to_string(fam.size()));
  }
  return fam[static_cast<std::size_t>(index)];
}

double hue_sat_distance(const Hsv& a, const Hsv& b) {
  const double dh = hue_distance(a.h, b.h);
  const double ds = a.s - b.s;
  return std::sqrt(dh * dh + ds * ds);
}

TextureBank make_bank(BankId id, const DesignSpace& space) {
  if (space.flat_count < 1 || space.sloped_count < 1) throw InvalidArgument("make_bank: empty design space");
  const double shift = id == BankId::HeldOut ? kHeldOutShift : 0.0;
  TextureBank bank;
  bank.id = id;
  bank.flat = make_family(space.flat_count, kFlatTiers, shift);
  bank.sloped = make_family(space.sloped_count, kSlopedTiers, 0.5 + shift);
  if (id == BankId::HeldOut) {
    TextureBank reference = make_bank(BankId::InDomain, space);
    for (Family f : {Family::Flat, Family::Sloped}) {
      for (const auto& held : bank.family(f)) {
        for (const auto& in : reference.family(f)) {
          if (hue_sat_distance(held.base, in.base) < kMinBankSeparation) {
            throw InvalidArgument("make_bank: held-out texture " + std::to_string(held.id) +
                                  " overlaps in-domain texture " + std::to_string(in.id));
          }
        }
      }
    }
  }
  return bank;
}

std::array<std::uint8_t, 3> texture_color(const TextureSpec& spec, int u, int v, double shade) {
  double factor = 1.0;
  const int scale = std::max(1, spec.pattern_scale);
  switch (spec.pattern) {
    case Pattern::Solid:
      break;
    case Pattern::Stripe:
      if ((u / scale) % 2 == 1) factor = 1.0 - spec.pattern_contrast;
      break;
    case Pattern::Checker:
      if ((u / scale + v / scale) % 2 == 1) factor = 1.0 - spec.pattern_contrast;
      break;
    case Pattern::Speckle:
      factor = 1.0 - spec.pattern_contrast * speckle_noise(spec.id, u / scale, v / scale);
      break;
  }
  Hsv c = spec.base;
  c.v = std::clamp(c.v * factor * shade, 0.0, 1.0);
  return hsv_to_rgb(c);
}

Image texture_swatch(const TextureBank& bank, Family family, int index) {
  const TextureSpec& spec = bank.texture(family, index);
  Image img(kSwatchSize, kSwatchSize);
  for (int y = 0; y < kSwatchSize; ++y)
    for (int x = 0; x < kSwatchSize; ++x) img.set(x, y, texture_color(spec, x, y));
  return img;
}

Hsv mean_hsv(const Image& patch) {
  if (patch.width <= 0 || patch.height <= 0) throw InvalidArgument("mean_hsv: empty patch");
  double sx = 0.0, sy = 0.0, ss = 0.0, sv = 0.0;
  const double n = static_cast<double>(patch.width) * patch.height;
  for (int y = 0; y < patch.height; ++y)
    for (int x = 0; x < patch.width; ++x) {
      auto p = patch.at(x, y);
      Hsv c = rgb_to_hsv(p[0], p[1], p[2]);
      const double a = c.h * std::numbers::pi / 180.0;
      sx += std::cos(a);
      sy += std::sin(a);
      ss += c.s;
      sv += c.v;
    }
  Hsv out;
  double h = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
  if (h < 0.0) h += 360.0;
  // atan2 noise around 0 can land a hair below 360.
  if (h >= 360.0 - 1e-9) h = 0.0;
  out.h = h;
  out.s = ss / n;
  out.v = sv / n;
  return out;
}

double hsv_patch_distance(const Hsv& a, const Hsv& b) {
  const double dh = 2.0 * hue_distance(a.h, b.h);
  const double ds = a.s - b.s;
  const double dv = a.v - b.v;
  return std::sqrt(dh * dh + ds * ds + dv * dv);
}

std::vector<RankedTexture> texture_similarity_rank(const Image& query, const TextureBank& bank, Family family) {
  const Hsv q = mean_hsv(query);
  std::vector<RankedTexture> out;
  const int count = static_cast<int>(bank.family(family).size());
  for (int i = 0; i < count; ++i) {
    out.push_back({i, hsv_patch_distance(q, mean_hsv(texture_swatch(bank, family, i)))});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedTexture& a, const RankedTexture& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  return out;
}

int rank_of(const std::vector<RankedTexture>& ranking, int id) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].id == id) return static_cast<int>(i);
  }
  throw InvalidArgument("rank_of: texture " + std::to_string(id) + " not ranked");
}

}  // namespace nams::sim
