#include "nams/core/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"

namespace nams::core {

void NamsTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("nams training: epochs must be >= 0");
  if (batch < 2) throw ConfigError("nams training: batch must be >= 2 (batchnorm)");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ConfigError("nams training: validation_fraction must be in [0, 1)");
  }
  adam.validate();
}

nlohmann::json NamsTrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch", batch},
          {"validation_fraction", validation_fraction},
          {"learning_rate", adam.learning_rate},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2}};
}

NamsTrainConfig NamsTrainConfig::from_json(const nlohmann::json& j) {
  NamsTrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("nams training config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

struct Batch {
  Tensor designs;
  Tensor targets;
};

Batch gather(const NamsModel& model, std::span<const TrainingExample> data, std::span<const std::size_t> idx) {
  const std::size_t dim = model.config().feature_dim;
  std::vector<sim::DiscreteDesign> designs;
  Tensor targets = Tensor::matrix(idx.size(), dim);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& ex = data[idx[r]];
    if (ex.target.size() != dim) {
      throw InvalidArgument("train_nams: example " + std::to_string(idx[r]) + " has " +
                            std::to_string(ex.target.size()) + " features, model expects " + std::to_string(dim));
    }
    designs.push_back(ex.design);
    std::copy(ex.target.begin(), ex.target.end(), targets.values().begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  return {design_matrix(designs, model.space()), std::move(targets)};
}

struct LossNodes {
  NodeId total, predict, decode, kld;
  NodeId mu;
};

LossNodes build_loss(NamsModel& model, Graph& g, const Batch& b, const Tensor& noise, Mode mode, Rng* drop) {
  NodeId d = g.input(b.designs, false, "designs");
  NodeId x = g.input(b.targets, false, "targets");
  auto enc = model.encode(g, d, g.input(noise, false, "noise"), mode, drop);
  NodeId decoded = model.decode(g, enc.z, mode, drop);
  NodeId predicted = model.predict(g, enc.z, mode, drop);
  NodeId lp = ad::mse(g, predicted, x);
  NodeId ld = ad::bce(g, decoded, d);
  NodeId lk = ad::kl_gaussian(g, enc.mu, enc.sigma);
  const auto& c = model.config();
  NodeId total = ad::add(g, ad::add(g, ad::scale(g, lp, c.lambda_p), ad::scale(g, ld, c.lambda_d)),
                         ad::scale(g, lk, c.lambda_kld));
  return {total, lp, ld, lk, enc.mu};
}

LossTerms read_terms(const Graph& g, const LossNodes& n) {
  return {g.value(n.total).item(), g.value(n.predict).item(), g.value(n.decode).item(), g.value(n.kld).item()};
}

std::vector<double> mu_spread(const NamsModel& model, std::span<const TrainingExample> data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  Batch b = gather(model, data, all);
  const std::size_t k = model.config().latent_dim;
  LatentCode code = model.encode(b.designs, Tensor::matrix(data.size(), k));
  std::vector<double> sigma(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) mean += code.mu(r, j);
    mean /= static_cast<double>(data.size());
    double var = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) var += std::pow(code.mu(r, j) - mean, 2);
    // Collapsed dimensions still get a usable search range.
    sigma[j] = std::max(std::sqrt(var / static_cast<double>(data.size())), 1e-3);
  }
  return sigma;
}

}  // namespace

LossTerms evaluate_losses(const NamsModel& model, std::span<const TrainingExample> data) {
  if (data.empty()) return {};
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  Batch b = gather(model, data, all);
  Graph g;
  g.freeze_parameters(true);
  Tensor noise = Tensor::matrix(data.size(), model.config().latent_dim);
  // Eval mode leaves the parameter set untouched.
  auto nodes = build_loss(const_cast<NamsModel&>(model), g, b, noise, Mode::Eval, nullptr);
  return read_terms(g, nodes);
}

NamsTrainReport train_nams(NamsModel& model, std::span<const TrainingExample> data, const NamsTrainConfig& config) {
  config.validate();
  if (data.size() < 2) throw InvalidArgument("train_nams: need at least two examples");

  Rng root(config.seed, hash_name("nams.train"));
  Rng split_rng = root.split("split");
  Rng order_rng = root.split("order");
  Rng noise_rng = root.split("noise");
  Rng drop_rng = root.split("dropout");

  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[split_rng.below(i)]);
  std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(data.size())));
  n_val = std::min(n_val, data.size() - 2);
  std::vector<std::size_t> val_idx(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::vector<std::size_t> train_idx(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<TrainingExample> train_set, val_set;
  for (auto i : train_idx) train_set.push_back(data[i]);
  for (auto i : val_idx) val_set.push_back(data[i]);

  NamsTrainReport report;
  report.train_size = train_set.size();
  report.validation_size = val_set.size();
  const std::size_t k = model.config().latent_dim;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    LossTerms acc;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      std::size_t end = std::min(order.size(), start + config.batch);
      // A trailing batch of one cannot be batch-normalized; fold it in.
      if (order.size() - end == 1) end = order.size();
      std::span<const std::size_t> rows(order.data() + start, end - start);
      Batch b = gather(model, train_set, rows);
      Tensor noise = Tensor::matrix(rows.size(), k);
      for (auto& v : noise.values()) v = noise_rng.normal();
      Graph g;
      auto nodes = build_loss(model, g, b, noise, Mode::Train, &drop_rng);
      LossTerms t = read_terms(g, nodes);
      if (!std::isfinite(t.total)) {
        throw NumericalError("train_nams: loss is not finite at epoch " + std::to_string(epoch));
      }
      g.backward(nodes.total);
      try {
        ad::adam_step(model.params(), g.parameter_grads(model.params()), config.adam);
      } catch (const NumericalError& e) {
        throw NumericalError("train_nams: epoch " + std::to_string(epoch) + ": " + e.what());
      }
      acc.total += t.total;
      acc.predict += t.predict;
      acc.decode += t.decode;
      acc.kld += t.kld;
      ++batches;
      if (end == order.size()) break;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    report.train.push_back({acc.total * inv, acc.predict * inv, acc.decode * inv, acc.kld * inv});
    if (!val_set.empty()) report.validation.push_back(evaluate_losses(model, val_set));
  }
  model.set_latent_sigma(mu_spread(model, train_set));
  return report;
}

}  // namespace nams::core
