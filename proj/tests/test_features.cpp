#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "nams/common/error.hpp"
#include "nams/features/features.hpp"
#include "nams/sim/simulator.hpp"

using namespace nams;
using namespace nams::features;
using sim::Image;

namespace {

Image constant_image(int n, std::array<std::uint8_t, 3> rgb) {
  Image img(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img.set(x, y, rgb);
  return img;
}

Image random_image(int n, std::uint64_t seed) {
  Rng rng(seed);
  Image img(n, n);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

double block_sum(const FeatureVector& f, std::size_t offset) {
  return std::accumulate(f.begin() + offset, f.begin() + offset + layout::kBins, 0.0);
}

void check_close(const FeatureVector& a, const FeatureVector& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= tol);
}

std::vector<std::array<std::uint8_t, 3>> sorted_pixels(const Image& img) {
  std::vector<std::array<std::uint8_t, 3>> px;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) px.push_back(img.at(x, y));
  std::sort(px.begin(), px.end());
  return px;
}

}  // namespace

TEST_CASE("constant image features") {
  FeatureVector f = extract(constant_image(16, {200, 40, 40}));
  REQUIRE(f.size() == layout::kDim);
  for (std::size_t off : {layout::kHueHist, layout::kSatHist, layout::kValHist}) {
    int nonzero = 0;
    for (std::size_t b = 0; b < layout::kBins; ++b) nonzero += f[off + b] > 0.0;
    CHECK(nonzero == 1);
    CHECK(block_sum(f, off) == doctest::Approx(1.0));
  }
  for (int c = 0; c < 3; ++c) CHECK(f[layout::kChannelStd + c] == doctest::Approx(0.0).epsilon(1e-9));
  for (int k = 0; k < 4; ++k) CHECK(f[layout::kGradient + k] == 0.0);
  CHECK(f[layout::kChannelMean] == doctest::Approx(200.0 / 255.0));

  FeatureVector gray = extract(constant_image(8, {90, 90, 90}));
  CHECK(gray[layout::kHueHist] == 1.0);
}

TEST_CASE("extract is deterministic, finite and in range") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Image img = random_image(12, seed);
    FeatureVector a = extract(img);
    CHECK(a == extract(img));
    for (double v : a) CHECK(std::isfinite(v));
    for (std::size_t i = 0; i < 24; ++i) CHECK((a[i] >= 0.0 && a[i] <= 1.0));
    for (std::size_t i = layout::kChannelMean; i < layout::kChannelMean + 3; ++i) CHECK((a[i] >= 0.0 && a[i] <= 1.0));
    for (std::size_t off : {layout::kHueHist, layout::kSatHist, layout::kValHist})
      CHECK(block_sum(a, off) == doctest::Approx(1.0));
  }
}

TEST_CASE("augment8") {
  CHECK_THROWS_AS(augment8(Image(4, 3)), InvalidArgument);

  Image sym = constant_image(6, {1, 2, 3});
  for (const auto& v : augment8(sym)) CHECK(v == sym);

  Image img = random_image(7, 3);
  auto views = augment8(img);
  for (const auto& v : views) {
    CHECK(v.width == img.width);
    CHECK(v.height == img.height);
    CHECK(sorted_pixels(v) == sorted_pixels(img));
  }
  // All eight are distinct for a generic image.
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) CHECK_FALSE(views[i] == views[j]);

  // Closure: the orbit of a rotated input is the same set of images.
  auto rotated = augment8(views[1]);
  for (const auto& r : rotated) CHECK(std::find(views.begin(), views.end(), r) != views.end());
}

TEST_CASE("group features") {
  std::vector<Image> nine(9, constant_image(8, {10, 200, 30}));
  FeatureGroup g = group_features(nine);
  check_close(g.averaged, extract(nine[0]));
  CHECK_THROWS_AS(group_features(std::span(nine).first(8)), InvalidArgument);

  std::vector<Image> imgs;
  for (std::uint64_t s = 0; s < 9; ++s) imgs.push_back(random_image(8, 100 + s));
  FeatureGroup a = group_features(imgs);
  std::vector<Image> perm(imgs.rbegin(), imgs.rend());
  std::rotate(perm.begin(), perm.begin() + 4, perm.end());
  check_close(a.averaged, group_features(perm).averaged);
  for (std::size_t off : {layout::kHueHist, layout::kSatHist, layout::kValHist})
    CHECK(block_sum(a.averaged, off) == doctest::Approx(1.0));

  // Averaged equals the plain mean of all 72 augmented features.
  std::vector<FeatureVector> all;
  for (const auto& im : imgs)
    for (const auto& v : augment8(im)) all.push_back(extract(v));
  check_close(a.averaged, mean_of(all), 1e-12);

  // Dihedral invariance: transform every member by the same group element.
  for (int k = 1; k < 8; ++k) {
    std::vector<Image> moved;
    for (const auto& im : imgs) moved.push_back(augment8(im)[k]);
    check_close(a.averaged, group_features(moved).averaged, 1e-12);
  }
}

TEST_CASE("same design renders are more similar than different flat textures") {
  // Per-render features, standardized on a small corpus of the same renders.
  auto bank = sim::make_bank(sim::BankId::InDomain, {});
  Rng rng(2024);
  struct Triple {
    FeatureVector same_a, same_b, other;
  };
  std::vector<Triple> triples;
  std::vector<FeatureVector> corpus;
  for (int t = 0; t < 100; ++t) {
    int f = static_cast<int>(rng.below(16));
    int f2 = (f + 1 + static_cast<int>(rng.below(15))) % 16;
    int s = static_cast<int>(rng.below(16));
    Triple tr{extract_augmented(sim::simulate(sim::DiscreteDesign{f, s}, rng.next_u64(), bank).image),
              extract_augmented(sim::simulate(sim::DiscreteDesign{f, s}, rng.next_u64(), bank).image),
              extract_augmented(sim::simulate(sim::DiscreteDesign{f2, s}, rng.next_u64(), bank).image)};
    corpus.insert(corpus.end(), {tr.same_a, tr.same_b, tr.other});
    triples.push_back(tr);
  }
  FeatureScaler scaler = FeatureScaler::fit(corpus);
  double same = 0.0, diff = 0.0;
  int wins = 0;
  for (const auto& tr : triples) {
    auto a = scaler.transform(tr.same_a);
    double s = cosine_similarity(a, scaler.transform(tr.same_b));
    double d = cosine_similarity(a, scaler.transform(tr.other));
    same += s;
    diff += d;
    wins += s > d;
  }
  MESSAGE("same-design wins " << wins << "/100, mean cosine " << same / 100 << " vs " << diff / 100);
  CHECK(same > diff);
  CHECK(wins >= 65);
}

TEST_CASE("feature scaler") {
  std::vector<FeatureVector> data{{1.0, 5.0}, {3.0, 5.0}};
  FeatureScaler s = FeatureScaler::fit(data);
  check_close(s.transform(data[0]), {-1.0, 0.0});
  check_close(s.inverse(s.transform(data[1])), data[1]);
  FeatureScaler back = FeatureScaler::from_json(s.to_json());
  CHECK(back.mean() == s.mean());
  CHECK(back.scale() == s.scale());
  CHECK_THROWS_AS(s.transform(std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("feature jsonl round trip") {
  auto path = std::filesystem::temp_directory_path() / "nams_features_test.jsonl";
  std::vector<Image> imgs;
  for (std::uint64_t s = 0; s < 9; ++s) imgs.push_back(random_image(8, s));
  std::vector<std::uint64_t> zetas{1, 2, 3, 4, 5, 6, 7, 8, 0xffffffffffffffffull};
  std::vector<FeatureGroup> groups{group_features(imgs, {3, 4}, zetas)};
  write_feature_jsonl(path, groups);
  auto back = read_feature_jsonl(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].design == sim::DiscreteDesign{3, 4});
  CHECK(back[0].zetas == zetas);
  CHECK(back[0].averaged == groups[0].averaged);
  CHECK(back[0].members == groups[0].members);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_feature_jsonl(path), IoError);
}
