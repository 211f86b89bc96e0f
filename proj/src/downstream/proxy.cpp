#include "nams/downstream/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"

namespace nams::downstream {

using ad::Graph;
using ad::Mode;
using ad::NodeId;
using ad::Tensor;

void PixelDataset::append(std::span<const double> patch, bool building) {
  features.insert(features.end(), patch.begin(), patch.end());
  labels.push_back(building ? 1 : 0);
}

void extract_patch(const sim::Image& image, int x, int y, std::span<double> out) {
  std::size_t k = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    const int yy = std::clamp(y + dy, 0, image.height - 1);
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = std::clamp(x + dx, 0, image.width - 1);
      const std::size_t o = image.offset(xx, yy);
      for (int c = 0; c < 3; ++c) out[k++] = image.pixels[o + c] / 255.0;
    }
  }
}

namespace {

// Partial Fisher-Yates: the first k entries become a uniform sample.
void take_prefix(std::vector<std::size_t>& v, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(static_cast<std::uint32_t>(v.size() - i));
    std::swap(v[i], v[j]);
  }
}

}  // namespace

void sample_tile(const sim::SimOutput& tile, int pixels_per_class, Rng& rng, PixelDataset& out) {
  const auto& img = tile.image;
  std::vector<std::size_t> building, ground;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * img.width + x;
      (tile.mask.at(x, y) != sim::kBackground ? building : ground).push_back(p);
    }
  }
  const std::size_t cap = static_cast<std::size_t>(pixels_per_class);
  std::size_t nb = std::min({cap, building.size(), ground.size()});
  std::size_t ng = nb;
  if (building.empty()) ng = std::min(cap, ground.size());
  if (ground.empty()) nb = std::min(cap, building.size());
  take_prefix(building, nb, rng);
  take_prefix(ground, ng, rng);

  double patch[kPatchDim];
  auto emit = [&](std::size_t p, bool is_building) {
    extract_patch(img, static_cast<int>(p % img.width), static_cast<int>(p / img.width), patch);
    out.append(patch, is_building);
  };
  for (std::size_t i = 0; i < nb; ++i) emit(building[i], true);
  for (std::size_t i = 0; i < ng; ++i) emit(ground[i], false);
}

PixelDataset build_training_set(const core::DesignPopulation& population, const sim::Simulator& simulator,
                                const SampleConfig& config, std::uint64_t seed) {
  if (population.empty()) throw InvalidArgument("build_training_set: empty population");
  if (config.tiles_per_design < 1 || config.pixels_per_class < 1) {
    throw InvalidArgument("build_training_set: tiles_per_design and pixels_per_class must be >= 1");
  }
  Rng root(seed, hash_name("downstream.pixels"));
  Rng zetas = root.split("zeta");
  Rng picks = root.split("pick");
  PixelDataset out;
  for (const auto& entry : population.entries) {
    for (int t = 0; t < config.tiles_per_design; ++t) {
      sim::SimOutput tile = simulator(entry.design, zetas.next_u64());
      ++out.sim_calls;
      sample_tile(tile, config.pixels_per_class, picks, out);
    }
  }
  return out;
}

void ProxyConfig::validate() const {
  if (hidden == 0) throw ConfigError("proxy: hidden must be >= 1");
  if (epochs < 1) throw ConfigError("proxy: epochs must be >= 1");
  if (batch < 1) throw ConfigError("proxy: batch must be >= 1");
  adam.validate();
}

nlohmann::json ProxyConfig::to_json() const {
  return {{"hidden", hidden}, {"epochs", epochs}, {"batch", batch}, {"learning_rate", adam.learning_rate}};
}

ProxyConfig ProxyConfig::from_json(const nlohmann::json& j) {
  ProxyConfig c;
  try {
    c.hidden = j.value("hidden", c.hidden);
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("proxy config: ") + e.what());
  }
  c.validate();
  return c;
}

ProxyClassifier::ProxyClassifier(std::size_t hidden, std::uint64_t seed) {
  ad::MlpSpec s;
  s.name = "proxy";
  s.input_dim = kPatchDim;
  s.hidden = {hidden};
  s.output_dim = 1;
  s.batchnorm = false;
  s.hidden_activation = ad::Activation::Sigmoid;
  s.output_activation = ad::Activation::Sigmoid;
  net_ = ad::Mlp(s);
  Rng rng(seed, hash_name("proxy.init"));
  net_.init(params_, rng);
}

NodeId ProxyClassifier::forward(Graph& g, NodeId x) { return net_.forward(g, x, params_, Mode::Train, nullptr); }

std::vector<double> ProxyClassifier::probabilities(std::span<const double> patches) const {
  if (patches.size() % kPatchDim != 0) throw InvalidArgument("ProxyClassifier: patch block is not a multiple of 27");
  const std::size_t n = patches.size() / kPatchDim;
  if (n == 0) return {};
  Graph g;
  g.freeze_parameters(true);
  Tensor x({n, kPatchDim}, std::vector<double>(patches.begin(), patches.end()));
  // No batchnorm or dropout, so the forward pass leaves the parameters alone.
  NodeId out = net_.forward(g, g.input(std::move(x)), const_cast<ad::ModelParameters&>(params_), Mode::Eval, nullptr);
  return g.value(out).to_vector();
}

sim::LabelMap ProxyClassifier::segment(const sim::Image& image) const {
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  std::vector<double> patches(n * kPatchDim);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * image.width + x;
      extract_patch(image, x, y, std::span<double>(patches.data() + p * kPatchDim, kPatchDim));
    }
  }
  std::vector<double> prob = probabilities(patches);
  sim::LabelMap mask(image.width, image.height);
  for (std::size_t p = 0; p < n; ++p) mask.labels[p] = prob[p] >= 0.5 ? sim::kFlatBuilding : sim::kBackground;
  return mask;
}

ProxyTrainReport train_proxy(ProxyClassifier& model, const PixelDataset& data, const ProxyConfig& config) {
  config.validate();
  if (data.size() == 0) throw InvalidArgument("train_proxy: empty dataset");
  Rng order_rng(config.seed, hash_name("proxy.train"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  ProxyTrainReport report;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng.below(static_cast<std::uint32_t>(i))]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::size_t rows = end - start;
      Tensor x = Tensor::matrix(rows, kPatchDim);
      Tensor y = Tensor::matrix(rows, 1);
      for (std::size_t r = 0; r < rows; ++r) {
        auto src = data.row(order[start + r]);
        std::copy(src.begin(), src.end(), x.values().begin() + static_cast<std::ptrdiff_t>(r * kPatchDim));
        y(r, 0) = data.labels[order[start + r]];
      }
      Graph g;
      NodeId loss = ad::bce(g, model.forward(g, g.input(std::move(x))), g.input(std::move(y)));
      const double lv = g.value(loss).item();
      if (!std::isfinite(lv)) throw NumericalError("train_proxy: loss is not finite at epoch " + std::to_string(epoch));
      g.backward(loss);
      ad::adam_step(model.params(), g.parameter_grads(model.params()), config.adam);
      loss_sum += lv * static_cast<double>(rows);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }

  std::vector<double> prob = model.probabilities(data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) correct += (prob[i] >= 0.5) == (data.labels[i] != 0);
  report.train_accuracy = static_cast<double>(correct) / static_cast<double>(prob.size());
  return report;
}

IoUCounts iou_counts(const sim::LabelMap& predicted, const sim::LabelMap& truth) {
  if (predicted.width != truth.width || predicted.height != truth.height) {
    throw InvalidArgument("iou_counts: mask sizes differ");
  }
  IoUCounts c;
  c.pixels = truth.labels.size();
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const bool p = predicted.labels[i] != sim::kBackground;
    const bool t = truth.labels[i] != sim::kBackground;
    c.intersection += p && t;
    c.union_ += p || t;
  }
  return c;
}

double iou(const IoUCounts& c) {
  if (c.union_ == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

IoUReport eval_iou(const ProxyClassifier& model, std::span<const sim::SimOutput> targets) {
  IoUReport report;
  for (const auto& t : targets) {
    IoUCounts c = iou_counts(model.segment(t.image), t.mask);
    report.counts.intersection += c.intersection;
    report.counts.union_ += c.union_;
    report.counts.pixels += c.pixels;
  }
  report.tiles = targets.size();
  report.iou = iou(report.counts);
  return report;
}

}  // namespace nams::downstream
