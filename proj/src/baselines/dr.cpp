#include "nams/baselines/dr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"
#include "nams/core/model.hpp"

namespace nams::baselines {

using ad::Graph;
using ad::Mode;
using ad::NodeId;
using ad::Tensor;

void DrConfig::validate() const {
  if (hidden.empty()) throw ConfigError("dr: at least one hidden layer is required");
  if (epochs < 0) throw ConfigError("dr: epochs must be >= 0");
  if (batch < 2) throw ConfigError("dr: batch must be >= 2");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) throw ConfigError("dr: validation_fraction in [0, 1)");
  if (l2 < 0.0) throw ConfigError("dr: l2 must be >= 0");
  adam.validate();
}

nlohmann::json DrConfig::to_json() const {
  return {{"hidden", hidden}, {"epochs", epochs}, {"batch", batch}, {"validation_fraction", validation_fraction},
          {"l2", l2},         {"learning_rate", adam.learning_rate}};
}

DrConfig DrConfig::from_json(const nlohmann::json& j) {
  DrConfig c;
  try {
    c.hidden = j.value("hidden", c.hidden);
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.l2 = j.value("l2", c.l2);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dr config: ") + e.what());
  }
  c.validate();
  return c;
}

DrModel::DrModel(std::size_t feature_dim, sim::DesignSpace space, std::vector<std::size_t> hidden, std::uint64_t seed)
    : feature_dim_(feature_dim), space_(space), hidden_(std::move(hidden)) {
  build();
  Rng rng(seed, hash_name("dr.init"));
  net_.init(params_, rng);
  // Start from the uniform-design mean so an untrained model is the mean predictor.
  const std::string out = "dr.l" + std::to_string(hidden_.size());
  params_.get(out + ".weight").fill(0.0);
  Tensor& bias = params_.get(out + ".bias");
  for (int i = 0; i < space_.dim(); ++i) {
    bias[static_cast<std::size_t>(i)] = 1.0 / (i < space_.flat_count ? space_.flat_count : space_.sloped_count);
  }
}

void DrModel::build() {
  ad::MlpSpec s;
  s.name = "dr";
  s.input_dim = feature_dim_;
  s.hidden = hidden_;
  s.output_dim = static_cast<std::size_t>(space_.dim());
  s.hidden_activation = ad::Activation::Relu;
  net_ = ad::Mlp(s);
}

NodeId DrModel::forward(Graph& g, NodeId x, Mode mode) { return net_.forward(g, x, params_, mode, nullptr); }

Tensor DrModel::predict(const Tensor& x) const {
  Graph g;
  g.freeze_parameters(true);
  // Eval mode does not touch the parameters.
  return g.value(const_cast<DrModel*>(this)->forward(g, g.input(x), Mode::Eval));
}

void DrModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j{{"format", "nams-dr-model"},
                   {"format_version", 1},
                   {"feature_dim", feature_dim_},
                   {"flat_count", space_.flat_count},
                   {"sloped_count", space_.sloped_count},
                   {"hidden", hidden_}};
  std::ofstream out(dir / "model.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << j.dump(2) << '\n';
  params_.save(dir / "params.json");
}

DrModel DrModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json", std::ios::binary);
  if (!in) throw IoError("cannot read " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("dr model.json: ") + e.what());
  }
  if (j.value("format", "") != "nams-dr-model") throw ConfigError("dr model.json: unsupported format");
  DrModel m;
  m.feature_dim_ = j.at("feature_dim").get<std::size_t>();
  m.space_ = {j.at("flat_count").get<int>(), j.at("sloped_count").get<int>()};
  m.hidden_ = j.at("hidden").get<std::vector<std::size_t>>();
  m.build();
  m.params_ = ad::ModelParameters::load(dir / "params.json");
  return m;
}

namespace {

struct Rows {
  Tensor x;
  Tensor y;
};

Rows gather(const DrModel& model, std::span<const DrExample> data, std::span<const std::size_t> idx) {
  const std::size_t dim = model.feature_dim();
  Rows r{Tensor::matrix(idx.size(), dim), Tensor()};
  std::vector<sim::DiscreteDesign> designs;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& ex = data[idx[i]];
    if (ex.features.size() != dim) {
      throw InvalidArgument("train_dr: example " + std::to_string(idx[i]) + " has " +
                            std::to_string(ex.features.size()) + " features, expected " + std::to_string(dim));
    }
    std::copy(ex.features.begin(), ex.features.end(), r.x.values().begin() + static_cast<std::ptrdiff_t>(i * dim));
    designs.push_back(ex.design);
  }
  r.y = core::design_matrix(designs, model.space());
  return r;
}

double mse_of(const Tensor& pred, const Tensor& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::pow(pred[i] - target[i], 2);
  return s / static_cast<double>(pred.size());
}

}  // namespace

DrTrainReport train_dr(DrModel& model, std::span<const DrExample> data, const DrConfig& config) {
  config.validate();
  if (data.size() < 4) throw InvalidArgument("train_dr: need at least four examples");
  Rng root(config.seed, hash_name("dr.train"));
  Rng split_rng = root.split("split");
  Rng order_rng = root.split("order");

  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[split_rng.below(i)]);
  std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(data.size())));
  n_val = std::min(n_val, data.size() - 2);
  std::vector<std::size_t> val_idx(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::vector<std::size_t> train_idx(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));

  DrTrainReport report;
  report.batch = std::min(config.batch, std::max<std::size_t>(2, data.size() / 10));
  const std::size_t batch = report.batch;

  Rows val = gather(model, data, val_idx);
  Rows train_all = gather(model, data, train_idx);
  {
    // Mean predictor baseline on the held-out split.
    const std::size_t dd = train_all.y.cols();
    std::vector<double> mean(dd, 0.0);
    for (std::size_t r = 0; r < train_all.y.rows(); ++r)
      for (std::size_t c = 0; c < dd; ++c) mean[c] += train_all.y(r, c);
    for (auto& m : mean) m /= static_cast<double>(train_all.y.rows());
    Tensor mp = Tensor::matrix(val.y.rows(), dd);
    for (std::size_t r = 0; r < mp.rows(); ++r)
      for (std::size_t c = 0; c < dd; ++c) mp(r, c) = mean[c];
    report.mean_predictor_mse = val.y.rows() ? mse_of(mp, val.y) : 0.0;
  }

  std::vector<std::size_t> order(train_idx.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::size_t end = std::min(order.size(), start + batch);
      if (order.size() - end == 1) end = order.size();
      std::vector<std::size_t> rows;
      for (std::size_t i = start; i < end; ++i) rows.push_back(train_idx[order[i]]);
      Rows b = gather(model, data, rows);
      Graph g;
      NodeId pred = model.forward(g, g.input(b.x), Mode::Train);
      NodeId loss = ad::mse(g, pred, g.input(b.y));
      const double lv = g.value(loss).item();
      if (!std::isfinite(lv)) throw NumericalError("train_dr: loss is not finite at epoch " + std::to_string(epoch));
      g.backward(loss);
      ad::ParameterGrads grads = g.parameter_grads(model.params());
      const double coeff = config.l2 / static_cast<double>(rows.size());
      for (auto& [name, grad] : grads) {
        if (name.size() < 7 || name.compare(name.size() - 7, 7, ".weight") != 0) continue;
        const Tensor& w = model.params().get(name);
        for (std::size_t i = 0; i < w.size(); ++i) grad[i] += coeff * w[i];
      }
      try {
        ad::adam_step(model.params(), grads, config.adam);
      } catch (const NumericalError& e) {
        throw NumericalError("train_dr: epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += lv;
      ++batches;
      if (end == order.size()) break;
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(batches));
    if (val.y.rows() > 0) report.validation_loss.push_back(mse_of(model.predict(val.x), val.y));
  }
  report.validation_mse = val.y.rows() ? mse_of(model.predict(val.x), val.y) : 0.0;
  return report;
}

sim::DiscreteDesign infer_dr(const DrModel& model, std::span<const double> features) {
  if (features.size() != model.feature_dim()) throw InvalidArgument("infer_dr: feature dimension mismatch");
  Tensor x = Tensor::row(std::vector<double>(features.begin(), features.end()));
  Tensor y = model.predict(x);
  for (auto& v : y.values())
    if (!std::isfinite(v)) v = 0.0;
  return core::discretize(y.row_span(0), model.space());
}

}  // namespace nams::baselines
