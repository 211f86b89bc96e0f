#include "nams/sim/color.hpp"

#include <algorithm>
#include <cmath>

namespace nams::sim {

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0;
  const double g = g8 / 255.0;
  const double b = b8 / 255.0;
  const double maxc = std::max({r, g, b});
  const double minc = std::min({r, g, b});
  const double delta = maxc - minc;
  Hsv out;
  out.v = maxc;
  out.s = maxc > 0.0 ? delta / maxc : 0.0;
  if (delta <= 0.0) return out;
  double h = 0.0;
  if (maxc == r) {
    h = (g - b) / delta;
  } else if (maxc == g) {
    h = 2.0 + (b - r) / delta;
  } else {
    h = 4.0 + (r - g) / delta;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& hsv) {
  const double s = std::clamp(hsv.s, 0.0, 1.0);
  const double v = std::clamp(hsv.v, 0.0, 1.0);
  double h = std::fmod(hsv.h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto to_byte = [](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0)); };
  return {to_byte(r + m), to_byte(g + m), to_byte(b + m)};
}

double hue_distance(double h1, double h2) {
  double d = std::abs(h1 - h2) / 360.0;
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

}  // namespace nams::sim
