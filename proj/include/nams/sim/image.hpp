#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace nams::sim {

/// 8-bit interleaved RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t offset(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  std::array<std::uint8_t, 3> at(int x, int y) const {
    std::size_t o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
  void set(int x, int y, std::array<std::uint8_t, 3> rgb) {
    std::size_t o = offset(x, y);
    pixels[o] = rgb[0];
    pixels[o + 1] = rgb[1];
    pixels[o + 2] = rgb[2];
  }
  bool operator==(const Image&) const = default;
};

enum Label : std::uint8_t { kBackground = 0, kFlatBuilding = 1, kSlopedBuilding = 2 };

/// Per-pixel labels, row-major.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, kBackground) {}

  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, std::uint8_t v) { labels[static_cast<std::size_t>(y) * width + x] = v; }
  bool operator==(const LabelMap&) const = default;
};

/// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
/// Binary PGM (P5) holding raw label values.
void write_pgm(const std::filesystem::path& path, const LabelMap& mask);
LabelMap read_pgm(const std::filesystem::path& path);

}  // namespace nams::sim
