#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "nams/common/error.hpp"
#include "nams/sim/simulator.hpp"

using namespace nams;
using namespace nams::sim;

namespace {

const TextureBank& in_domain() {
  static const TextureBank bank = make_bank(BankId::InDomain, DesignSpace{});
  return bank;
}

const TextureBank& held_out() {
  static const TextureBank bank = make_bank(BankId::HeldOut, DesignSpace{});
  return bank;
}

std::set<std::array<std::uint8_t, 3>> distinct_colors(const Image& img) {
  std::set<std::array<std::uint8_t, 3>> out;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.insert(img.at(x, y));
  return out;
}

}  // namespace

TEST_CASE("simulate is bit-deterministic") {
  DiscreteDesign d{3, 11};
  for (std::uint64_t zeta : {0ull, 1ull, 0xdeadbeefull}) {
    SimOutput a = simulate(d, zeta, in_domain());
    SimOutput b = simulate(d, zeta, in_domain());
    CHECK(a.image == b.image);
    CHECK(a.mask == b.mask);
  }
  CHECK_FALSE(simulate(d, 1, in_domain()).image == simulate(d, 2, in_domain()).image);
}

TEST_CASE("flat texture 0 renders red flat roofs") {
  DiscreteDesign d{0, 5};
  int checked = 0;
  for (std::uint64_t zeta = 0; zeta < 40; ++zeta) {
    SimOutput out = simulate(d, zeta, in_domain());
    std::array<int, 36> hist{};
    int flat_pixels = 0;
    for (int y = 0; y < out.image.height; ++y)
      for (int x = 0; x < out.image.width; ++x) {
        if (out.mask.at(x, y) != kFlatBuilding) continue;
        auto p = out.image.at(x, y);
        Hsv c = rgb_to_hsv(p[0], p[1], p[2]);
        hist[static_cast<int>(c.h / 10.0) % 36] += 1;
        ++flat_pixels;
      }
    if (flat_pixels == 0) continue;
    int mode = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    CHECK(hue_distance(mode * 10.0 + 5.0, 0.0) * 360.0 <= 10.0);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("building fraction over 1000 layouts") {
  DiscreteDesign d{2, 9};
  double total = 0.0;
  double smallest = 1.0;
  for (std::uint64_t zeta = 0; zeta < 1000; ++zeta) {
    double f = building_fraction(simulate(d, zeta * 7919 + 13, in_domain()).mask);
    smallest = std::min(smallest, f);
    total += f;
  }
  double mean = total / 1000.0;
  CHECK(smallest > 0.0);
  CHECK(mean >= 0.05);
  CHECK(mean <= 0.6);
}

TEST_CASE("mask labels match roof families") {
  DiscreteDesign d{4, 4};
  SimOutput out = simulate(d, 77, in_domain());
  for (std::uint8_t l : out.mask.labels) CHECK(l <= kSlopedBuilding);
}

TEST_CASE("relaxed designs are rejected") {
  DesignSpace space;
  std::vector<double> flat(16, 1.0 / 16.0);
  std::vector<double> sloped(16, 0.0);
  sloped[0] = 1.0;
  DesignVector relaxed(flat, sloped);
  CHECK_THROWS_AS(simulate(relaxed, 1, in_domain()), InvalidArgument);
  DesignVector ok = DesignVector::one_hot({1, 2}, space);
  CHECK(simulate(ok, 1, in_domain()).image == simulate(DiscreteDesign{1, 2}, 1, in_domain()).image);
}

TEST_CASE("simulator handle counts calls") {
  std::atomic<std::uint64_t> calls{0};
  Simulator sim(in_domain(), {}, &calls);
  sim({0, 0}, 1);
  sim({1, 1}, 2);
  CHECK(calls.load() == 2);
}

TEST_CASE("texture swatches") {
  const auto& bank = in_domain();
  CHECK(texture_swatch(bank, Family::Flat, 5) == texture_swatch(bank, Family::Flat, 5));
  CHECK_THROWS_AS(texture_swatch(bank, Family::Flat, 16), InvalidArgument);
  CHECK_THROWS_AS(texture_swatch(bank, Family::Sloped, -1), InvalidArgument);

  for (Family fam : {Family::Flat, Family::Sloped}) {
    for (int i = 0; i < 16; ++i) {
      const TextureSpec& t = bank.texture(fam, i);
      Image sw = texture_swatch(bank, fam, i);
      CHECK(sw.width == kSwatchSize);
      if (t.pattern == Pattern::Solid) {
        auto colors = distinct_colors(sw);
        CHECK(colors.size() == 1);
        CHECK(*colors.begin() == hsv_to_rgb(t.base));
      }
    }
  }
}

TEST_CASE("checker swatch at scale 4 has two colors per period") {
  const auto& bank = in_domain();
  int found = 0;
  for (int i = 0; i < 16; ++i) {
    const TextureSpec& t = bank.flat[i];
    if (t.pattern != Pattern::Checker || t.pattern_scale != 4) continue;
    Image sw = texture_swatch(bank, Family::Flat, i);
    CHECK(distinct_colors(sw).size() == 2);
    CHECK(sw.at(0, 0) == sw.at(3, 0));
    CHECK(sw.at(0, 0) != sw.at(4, 0));
    CHECK(sw.at(0, 0) == sw.at(4, 4));
    ++found;
  }
  CHECK(found > 0);
}

TEST_CASE("similarity rank: self match and brute force") {
  const auto& bank = in_domain();
  for (Family fam : {Family::Flat, Family::Sloped}) {
    std::vector<Hsv> means;
    for (int i = 0; i < 16; ++i) means.push_back(mean_hsv(texture_swatch(bank, fam, i)));
    for (int k = 0; k < 16; ++k) {
      auto ranking = texture_similarity_rank(texture_swatch(bank, fam, k), bank, fam);
      REQUIRE(ranking.size() == 16);
      CHECK(ranking[0].id == k);
      CHECK(ranking[0].distance == 0.0);

      std::vector<RankedTexture> brute;
      for (int j = 0; j < 16; ++j) brute.push_back({j, hsv_patch_distance(means[k], means[j])});
      std::sort(brute.begin(), brute.end(), [](const RankedTexture& a, const RankedTexture& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
      });
      for (int j = 0; j < 16; ++j) {
        CHECK(ranking[j].id == brute[j].id);
        CHECK(ranking[j].distance == doctest::Approx(brute[j].distance).epsilon(1e-12));
      }
    }
    for (int a = 0; a < 16; ++a)
      for (int b = 0; b < 16; ++b) CHECK(hsv_patch_distance(means[a], means[b]) == hsv_patch_distance(means[b], means[a]));
  }
}

TEST_CASE("held-out bank is disjoint with unique nearest neighbours") {
  const auto& in = in_domain();
  const auto& out = held_out();
  for (Family fam : {Family::Flat, Family::Sloped}) {
    for (const auto& h : out.family(fam))
      for (const auto& t : in.family(fam)) CHECK(hue_sat_distance(h.base, t.base) >= kMinBankSeparation);
    for (int i = 0; i < 16; ++i) {
      auto ranking = texture_similarity_rank(texture_swatch(out, fam, i), in, fam);
      CHECK(ranking[0].distance < ranking[1].distance - 1e-6);
    }
  }
  CHECK(parse_bank(to_string(BankId::HeldOut)) == BankId::HeldOut);
  CHECK_THROWS_AS(parse_bank("nope"), InvalidArgument);
}

TEST_CASE("uniform design sampling") {
  DesignSpace space;
  Rng rng(42);
  std::array<int, 16> counts{};
  const int n = 100000;
  int invalid = 0;
  for (int i = 0; i < n; ++i) {
    DesignVector d = sample_uniform_design(space, rng);
    if (!d.is_discrete()) {
      ++invalid;
      continue;
    }
    counts[d.to_discrete().flat] += 1;
  }
  CHECK(invalid == 0);
  for (int c : counts) CHECK(std::abs(c / double(n) - 1.0 / 16.0) <= 0.01);

  Rng a(7), b(7);
  for (int i = 0; i < 50; ++i) CHECK(sample_uniform_discrete(space, a) == sample_uniform_discrete(space, b));
}

TEST_CASE("design vector conversions") {
  DesignSpace space;
  DesignVector d = DesignVector::one_hot({3, 15}, space);
  CHECK(d.concatenated().size() == 32);
  CHECK(d.to_discrete() == DiscreteDesign{3, 15});
  auto back = DesignVector::from_concatenated(d.concatenated(), space);
  CHECK(back.to_discrete() == DiscreteDesign{3, 15});
  std::vector<double> relaxed(32, 0.1);
  relaxed[2] = 0.5;
  relaxed[16 + 7] = 0.9;
  auto r = DesignVector::from_concatenated(relaxed, space);
  CHECK_FALSE(r.is_discrete());
  CHECK_THROWS_AS(r.to_discrete(), InvalidArgument);
  CHECK(r.argmax() == DiscreteDesign{2, 7});
  std::vector<double> tie{0.3, 0.3, 0.1};
  CHECK(argmax_index(tie) == 0);
}

TEST_CASE("appearance gap is deterministic and off by default") {
  SimOutput base = simulate(DiscreteDesign{1, 1}, 5, in_domain());
  Image img = base.image;
  apply_appearance_gap(img, AppearanceGap{}, 1);
  CHECK(img == base.image);
  AppearanceGap gap;
  gap.enabled = true;
  Image a = base.image, b = base.image;
  apply_appearance_gap(a, gap, 3);
  apply_appearance_gap(b, gap, 3);
  CHECK(a == b);
  CHECK_FALSE(a == base.image);
}

TEST_CASE("netpbm round trip") {
  auto dir = std::filesystem::temp_directory_path() / "nams_test_sim";
  std::filesystem::create_directories(dir);
  SimOutput out = simulate(DiscreteDesign{6, 2}, 99, in_domain());
  write_ppm(dir / "x.ppm", out.image);
  write_pgm(dir / "x.pgm", out.mask);
  CHECK(read_ppm(dir / "x.ppm") == out.image);
  CHECK(read_pgm(dir / "x.pgm") == out.mask);
  CHECK_THROWS_AS(read_ppm(dir / "missing.ppm"), IoError);
  std::filesystem::remove_all(dir);
}
