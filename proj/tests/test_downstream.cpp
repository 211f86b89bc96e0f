#include <algorithm>
#include <atomic>
#include <set>

#include "doctest.h"
#include "nams/common/error.hpp"
#include "nams/downstream/proxy.hpp"

using namespace nams;
using namespace nams::downstream;

namespace {

sim::Simulator in_domain(std::atomic<std::uint64_t>* calls = nullptr) {
  return sim::Simulator(sim::make_bank(sim::BankId::InDomain, {}), {}, calls);
}

core::DesignPopulation single(sim::DiscreteDesign d) {
  core::DesignPopulation p;
  p.entries.push_back({d, core::PopulationSource::Direct, 0.0});
  return p;
}

// Two well separated colour clusters.
PixelDataset toy_colors(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PixelDataset d;
  double patch[kPatchDim];
  for (std::size_t i = 0; i < n; ++i) {
    const bool building = i % 2 == 0;
    for (std::size_t k = 0; k < kPatchDim; ++k) {
      const double base = building ? (k % 3 == 0 ? 0.8 : 0.2) : (k % 3 == 2 ? 0.8 : 0.3);
      patch[k] = std::clamp(base + 0.05 * rng.normal(), 0.0, 1.0);
    }
    d.append(patch, building);
  }
  return d;
}

ProxyConfig quick(std::uint64_t seed = 1) {
  ProxyConfig c;
  c.epochs = 15;
  c.seed = seed;
  return c;
}

sim::LabelMap random_mask(Rng& rng, int w, int h) {
  sim::LabelMap m(w, h);
  for (auto& v : m.labels) v = rng.below(3) == 0 ? sim::kFlatBuilding : sim::kBackground;
  return m;
}

}  // namespace

TEST_CASE("patches are normalized and clamp at the border") {
  sim::Image img(4, 4);
  img.set(0, 0, {255, 0, 51});
  double p[kPatchDim];
  extract_patch(img, 0, 0, p);
  // Top-left neighbourhood clamps to (0,0) for the four upper-left cells.
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[2] == doctest::Approx(0.2));
  CHECK(p[4 * 3] == doctest::Approx(1.0));
  for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("one design with two tiles costs two simulator calls") {
  std::atomic<std::uint64_t> calls{0};
  auto sim = in_domain(&calls);
  SampleConfig cfg;
  cfg.tiles_per_design = 2;
  PixelDataset d = build_training_set(single({3, 5}), sim, cfg, 7);
  CHECK(d.sim_calls == 2);
  CHECK(calls.load() == 2);
  CHECK(d.features.size() == d.size() * kPatchDim);
  CHECK_THROWS_AS(build_training_set({}, sim, cfg, 7), InvalidArgument);
}

TEST_CASE("sampled labels are balanced") {
  auto sim = in_domain();
  core::DesignPopulation pop;
  Rng rng(3);
  for (int i = 0; i < 10; ++i) pop.entries.push_back({sim::sample_uniform_discrete({16, 16}, rng), {}, 0.0});
  PixelDataset d = build_training_set(pop, sim, {}, 11);
  const double frac = static_cast<double>(std::count(d.labels.begin(), d.labels.end(), 1)) / d.size();
  CHECK(frac >= 0.45);
  CHECK(frac <= 0.55);
}

TEST_CASE("pixel sampling is deterministic") {
  auto sim = in_domain();
  PixelDataset a = build_training_set(single({1, 2}), sim, {}, 5);
  PixelDataset b = build_training_set(single({1, 2}), sim, {}, 5);
  PixelDataset c = build_training_set(single({1, 2}), sim, {}, 6);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.features != c.features);
}

TEST_CASE("separable colours train to high accuracy and BCE falls") {
  PixelDataset d = toy_colors(2000, 4);
  ProxyClassifier m(32, 2);
  ProxyTrainReport r = train_proxy(m, d, quick());
  CHECK(r.train_accuracy > 0.99);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("constant labels give a constant prediction") {
  PixelDataset d = toy_colors(600, 8);
  std::fill(d.labels.begin(), d.labels.end(), 0);
  ProxyClassifier m(32, 3);
  train_proxy(m, d, quick());
  auto prob = m.probabilities(d.features);
  CHECK(std::all_of(prob.begin(), prob.end(), [](double p) { return p < 0.5; }));

  auto sim = in_domain();
  sim::SimOutput tile = sim({0, 0}, 12);
  sim::LabelMap seg = m.segment(tile.image);
  CHECK(std::all_of(seg.labels.begin(), seg.labels.end(), [](auto v) { return v == sim::kBackground; }));
}

TEST_CASE("proxy training is deterministic under a fixed seed") {
  PixelDataset d = toy_colors(500, 9);
  ProxyClassifier a(32, 1), b(32, 1);
  train_proxy(a, d, quick(4));
  train_proxy(b, d, quick(4));
  CHECK(a.params().to_json() == b.params().to_json());
  CHECK_THROWS_AS(train_proxy(a, PixelDataset{}, quick()), InvalidArgument);
}

TEST_CASE("IoU edge cases") {
  Rng rng(1);
  sim::LabelMap truth = random_mask(rng, 8, 8);
  CHECK(iou(iou_counts(truth, truth)) == 1.0);
  sim::LabelMap empty(8, 8);
  CHECK(iou(iou_counts(empty, truth)) == 0.0);
  CHECK(iou(iou_counts(empty, empty)) == 1.0);
  CHECK_THROWS_AS(iou_counts(sim::LabelMap(4, 4), truth), InvalidArgument);
}

TEST_CASE("pooled IoU matches a brute-force set computation and ignores tile order") {
  auto sim = in_domain();
  std::vector<sim::SimOutput> tiles;
  for (std::uint64_t z = 0; z < 3; ++z) tiles.push_back(sim({static_cast<int>(z), 4}, 100 + z));
  PixelDataset d = build_training_set(single({0, 4}), sim, {}, 3);
  ProxyClassifier m(32, 5);
  train_proxy(m, d, quick());

  std::set<std::pair<int, std::size_t>> pred, truth;
  for (int t = 0; t < 3; ++t) {
    sim::LabelMap seg = m.segment(tiles[t].image);
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
      if (seg.labels[i]) pred.insert({t, i});
      if (tiles[t].mask.labels[i]) truth.insert({t, i});
    }
  }
  std::set<std::pair<int, std::size_t>> inter, uni;
  std::set_intersection(pred.begin(), pred.end(), truth.begin(), truth.end(), std::inserter(inter, inter.begin()));
  std::set_union(pred.begin(), pred.end(), truth.begin(), truth.end(), std::inserter(uni, uni.begin()));
  const double expected = static_cast<double>(inter.size()) / static_cast<double>(uni.size());

  IoUReport r = eval_iou(m, tiles);
  CHECK(r.iou == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.tiles == 3);
  std::reverse(tiles.begin(), tiles.end());
  CHECK(eval_iou(m, tiles).iou == r.iou);
  CHECK((r.iou >= 0.0 && r.iou <= 1.0));
}
