#include "nams/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "nams/common/error.hpp"
#include "nams/sim/color.hpp"

namespace nams::features {
namespace {

using sim::Image;

std::size_t hue_bin(double h) {
  // Bins are centered on multiples of 45 degrees so pure red is not split.
  auto b = static_cast<std::size_t>(std::floor((h + 22.5) / 45.0));
  return b % layout::kBins;
}

std::size_t unit_bin(double x) { return std::min<std::size_t>(layout::kBins - 1, static_cast<std::size_t>(x * 8.0)); }

Image rotate90(const Image& src) {
  // Clockwise: (x, y) -> (n-1-y, x).
  const int n = src.width;
  Image out(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out.set(n - 1 - y, x, src.at(x, y));
  return out;
}

Image mirror(const Image& src) {
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) out.set(src.width - 1 - x, y, src.at(x, y));
  return out;
}

}  // namespace

FeatureVector extract(const Image& image) {
  const int w = image.width;
  const int h = image.height;
  if (w <= 0 || h <= 0 || image.pixels.size() != static_cast<std::size_t>(w) * h * 3) {
    throw InvalidArgument("extract: malformed image");
  }
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<sim::Hsv> hsv(n);
  FeatureVector f(layout::kDim, 0.0);

  std::array<double, 3> sum{0, 0, 0};
  std::array<double, 3> sum_sq{0, 0, 0};
  double hue_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = &image.pixels[i * 3];
    hsv[i] = sim::rgb_to_hsv(p[0], p[1], p[2]);
    f[layout::kHueHist + hue_bin(hsv[i].h)] += hsv[i].s;
    hue_weight += hsv[i].s;
    f[layout::kSatHist + unit_bin(hsv[i].s)] += 1.0;
    f[layout::kValHist + unit_bin(hsv[i].v)] += 1.0;
    for (int c = 0; c < 3; ++c) sum[c] += p[c] / 255.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  std::array<double, 3> mean{sum[0] * inv_n, sum[1] * inv_n, sum[2] * inv_n};
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      const double d = image.pixels[i * 3 + c] / 255.0 - mean[c];
      sum_sq[c] += d * d;
    }
  if (hue_weight > 0.0) {
    for (std::size_t b = 0; b < layout::kBins; ++b) f[layout::kHueHist + b] /= hue_weight;
  } else {
    // Achromatic image: every pixel has hue 0.
    f[layout::kHueHist] = 1.0;
  }
  for (std::size_t b = 0; b < layout::kBins; ++b) {
    f[layout::kSatHist + b] *= inv_n;
    f[layout::kValHist + b] *= inv_n;
  }
  for (int c = 0; c < 3; ++c) {
    f[layout::kChannelMean + c] = mean[c];
    f[layout::kChannelStd + c] = std::sqrt(sum_sq[c] * inv_n);
  }

  auto value = [&](int x, int y) { return hsv[static_cast<std::size_t>(y) * w + x].v; };
  std::array<double, 4> energy{0, 0, 0, 0};
  std::array<double, 4> count{0, 0, 0, 0};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = value(x, y);
      if (x + 1 < w) {
        energy[0] += std::pow(value(x + 1, y) - v, 2);
        count[0] += 1;
      }
      if (y + 1 < h) {
        energy[1] += std::pow(value(x, y + 1) - v, 2);
        count[1] += 1;
      }
      if (x + 1 < w && y + 1 < h) {
        energy[2] += std::pow(value(x + 1, y + 1) - v, 2);
        count[2] += 1;
      }
      if (x >= 1 && y + 1 < h) {
        energy[3] += std::pow(value(x - 1, y + 1) - v, 2);
        count[3] += 1;
      }
    }
  for (int k = 0; k < 4; ++k) f[layout::kGradient + k] = count[k] > 0 ? energy[k] / count[k] : 0.0;

  const int hw = w / 2;
  const int hh = h / 2;
  for (int q = 0; q < 4; ++q) {
    const int qx0 = (q % 2) * hw;
    const int qy0 = (q / 2) * hh;
    const int qx1 = (q % 2) ? w : hw;
    const int qy1 = (q / 2) ? h : hh;
    double cx = 0, cy = 0, ss = 0, sv = 0, cnt = 0;
    for (int y = qy0; y < qy1; ++y)
      for (int x = qx0; x < qx1; ++x) {
        const sim::Hsv& c = hsv[static_cast<std::size_t>(y) * w + x];
        const double a = c.h * std::numbers::pi / 180.0;
        cx += c.s * std::cos(a);
        cy += c.s * std::sin(a);
        ss += c.s;
        sv += c.v;
        cnt += 1;
      }
    double hue = 0.0;
    if (cnt > 0 && std::hypot(cx, cy) > 1e-12) {
      hue = std::atan2(cy, cx) / (2.0 * std::numbers::pi);
      if (hue < 0.0) hue += 1.0;
      if (hue >= 1.0) hue = 0.0;
    }
    f[layout::kGrid + 3 * q] = hue;
    f[layout::kGrid + 3 * q + 1] = cnt > 0 ? ss / cnt : 0.0;
    f[layout::kGrid + 3 * q + 2] = cnt > 0 ? sv / cnt : 0.0;
  }
  return f;
}

std::array<Image, 8> augment8(const Image& image) {
  if (image.width != image.height) throw InvalidArgument("augment8: image must be square");
  std::array<Image, 8> out;
  out[0] = image;
  for (int k = 1; k < 4; ++k) out[k] = rotate90(out[k - 1]);
  out[4] = mirror(image);
  for (int k = 5; k < 8; ++k) out[k] = rotate90(out[k - 1]);
  return out;
}

FeatureVector extract_augmented(const Image& image) {
  auto views = augment8(image);
  std::vector<FeatureVector> feats;
  feats.reserve(views.size());
  for (const auto& v : views) feats.push_back(extract(v));
  return mean_of(feats);
}

FeatureGroup group_features(std::span<const Image> images, const sim::DiscreteDesign& design,
                            std::vector<std::uint64_t> zetas) {
  if (images.size() != kGroupSize) {
    throw InvalidArgument("group_features: expected exactly 9 images, got " + std::to_string(images.size()));
  }
  FeatureGroup g;
  g.design = design;
  g.zetas = std::move(zetas);
  for (const auto& img : images) g.members.push_back(extract_augmented(img));
  g.averaged = mean_of(g.members);
  return g;
}

FeatureVector mean_of(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw InvalidArgument("mean_of: no vectors");
  FeatureVector out(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != out.size()) throw InvalidArgument("mean_of: dimension mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  }
  for (auto& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_similarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

nlohmann::json to_json(const FeatureGroup& group) {
  return {{"format_version", kFeatureFormatVersion},
          {"design", {group.design.flat, group.design.sloped}},
          {"zetas", group.zetas},
          {"features", group.averaged},
          {"members", group.members}};
}

FeatureGroup feature_group_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kFeatureFormatVersion) {
      throw ConfigError("feature record: unsupported format_version " + j.at("format_version").dump());
    }
    FeatureGroup g;
    g.design = {j.at("design").at(0).get<int>(), j.at("design").at(1).get<int>()};
    g.zetas = j.at("zetas").get<std::vector<std::uint64_t>>();
    g.averaged = j.at("features").get<FeatureVector>();
    if (j.contains("members")) g.members = j.at("members").get<std::vector<FeatureVector>>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feature record: ") + e.what());
  }
}

void write_feature_jsonl(const std::filesystem::path& path, std::span<const FeatureGroup> groups) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& g : groups) out << to_json(g).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<FeatureGroup> read_feature_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<FeatureGroup> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    out.push_back(feature_group_from_json(j));
  }
  return out;
}

FeatureScaler FeatureScaler::fit(std::span<const FeatureVector> corpus) {
  FeatureScaler s;
  s.mean_ = mean_of(corpus);
  s.scale_.assign(s.mean_.size(), 0.0);
  for (const auto& v : corpus)
    for (std::size_t i = 0; i < v.size(); ++i) s.scale_[i] += (v[i] - s.mean_[i]) * (v[i] - s.mean_[i]);
  for (auto& x : s.scale_) {
    x = std::sqrt(x / static_cast<double>(corpus.size()));
    // Constant dimensions pass through centered but unscaled.
    if (x < 1e-9) x = 1.0;
  }
  return s;
}

FeatureScaler FeatureScaler::identity(std::size_t dim) {
  FeatureScaler s;
  s.mean_.assign(dim, 0.0);
  s.scale_.assign(dim, 1.0);
  return s;
}

FeatureVector FeatureScaler::transform(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw InvalidArgument("FeatureScaler: dimension mismatch");
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean_[i]) / scale_[i];
  return out;
}

FeatureVector FeatureScaler::inverse(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw InvalidArgument("FeatureScaler: dimension mismatch");
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale_[i] + mean_[i];
  return out;
}

nlohmann::json FeatureScaler::to_json() const { return {{"mean", mean_}, {"scale", scale_}}; }

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
  FeatureScaler s;
  s.mean_ = j.at("mean").get<std::vector<double>>();
  s.scale_ = j.at("scale").get<std::vector<double>>();
  if (s.mean_.size() != s.scale_.size()) throw ConfigError("FeatureScaler: mean/scale size mismatch");
  return s;
}

}  // namespace nams::features
