#pragma once

#include <array>
#include <cstdint>

namespace nams::sim {

/// Hue in degrees [0, 360); saturation and value in [0, 1].
struct Hsv {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

/// Achromatic colors get hue 0.
Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& hsv);

/// Smallest angular difference between two hues, as a fraction of a turn in [0, 0.5].
double hue_distance(double h1_degrees, double h2_degrees);

}  // namespace nams::sim
