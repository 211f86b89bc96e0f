#include "nams/core/model.hpp"

#include <cmath>
#include <fstream>

#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"

namespace nams::core {

void NamsConfig::validate() const {
  if (latent_dim == 0 || feature_dim == 0) throw ConfigError("nams: latent_dim and feature_dim must be positive");
  if (hidden.empty()) throw ConfigError("nams: at least one hidden layer is required");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("nams: dropout must be in [0, 1)");
  if (lambda_p < 0.0 || lambda_d < 0.0 || lambda_kld < 0.0) throw ConfigError("nams: loss weights must be >= 0");
}

nlohmann::json NamsConfig::to_json() const {
  return {{"latent_dim", latent_dim}, {"feature_dim", feature_dim}, {"hidden", hidden},
          {"dropout", dropout},       {"leaky_slope", leaky_slope}, {"lambda_p", lambda_p},
          {"lambda_d", lambda_d},     {"lambda_kld", lambda_kld}};
}

NamsConfig NamsConfig::from_json(const nlohmann::json& j) {
  NamsConfig c;
  try {
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.lambda_p = j.value("lambda_p", c.lambda_p);
    c.lambda_d = j.value("lambda_d", c.lambda_d);
    c.lambda_kld = j.value("lambda_kld", c.lambda_kld);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("nams config: ") + e.what());
  }
  c.validate();
  return c;
}

NamsModel::NamsModel(NamsConfig config, sim::DesignSpace space, std::uint64_t seed)
    : config_(std::move(config)), space_(space) {
  config_.validate();
  build_networks();
  Rng rng(seed, hash_name("nams.init"));
  encoder_.init(params_, rng);
  decoder_.init(params_, rng);
  predictor_.init(params_, rng);
  latent_sigma_.assign(config_.latent_dim, 1.0);
}

void NamsModel::build_networks() {
  auto spec = [&](const char* name, std::size_t in, std::size_t out, ad::Activation act) {
    ad::MlpSpec s;
    s.name = name;
    s.input_dim = in;
    s.hidden = config_.hidden;
    s.output_dim = out;
    s.leaky_slope = config_.leaky_slope;
    s.dropout = config_.dropout;
    s.output_activation = act;
    return s;
  };
  encoder_ = ad::Mlp(spec("encoder", design_dim(), 2 * config_.latent_dim, ad::Activation::None));
  decoder_ = ad::Mlp(spec("decoder", config_.latent_dim, design_dim(), ad::Activation::Sigmoid));
  predictor_ = ad::Mlp(spec("predictor", config_.latent_dim, config_.feature_dim, ad::Activation::None));
}

NamsModel::EncodeNodes NamsModel::encode(Graph& g, NodeId design, NodeId noise, Mode mode, Rng* dropout_rng) {
  NodeId out = encoder_.forward(g, design, params_, mode, dropout_rng);
  auto [mu, logvar] = ad::split(g, out, config_.latent_dim);
  NodeId sigma = ad::exp(g, ad::scale(g, logvar, 0.5));
  NodeId z = ad::add(g, mu, ad::mul(g, noise, sigma));
  return {mu, logvar, sigma, z};
}

NodeId NamsModel::decode(Graph& g, NodeId z, Mode mode, Rng* dropout_rng) {
  return decoder_.forward(g, z, params_, mode, dropout_rng);
}

NodeId NamsModel::predict(Graph& g, NodeId z, Mode mode, Rng* dropout_rng) {
  return predictor_.forward(g, z, params_, mode, dropout_rng);
}

// Eval mode never writes to the parameter set, so the const_casts below are safe.
LatentCode NamsModel::encode(const Tensor& designs, const Tensor& noise) const {
  Graph g;
  g.freeze_parameters(true);
  auto nodes = const_cast<NamsModel*>(this)->encode(g, g.input(designs), g.input(noise), Mode::Eval, nullptr);
  return {g.value(nodes.z), g.value(nodes.mu), g.value(nodes.sigma)};
}

Tensor NamsModel::decode(const Tensor& z) const {
  Graph g;
  g.freeze_parameters(true);
  return g.value(const_cast<NamsModel*>(this)->decode(g, g.input(z), Mode::Eval, nullptr));
}

Tensor NamsModel::predict(const Tensor& z) const {
  Graph g;
  g.freeze_parameters(true);
  return g.value(const_cast<NamsModel*>(this)->predict(g, g.input(z), Mode::Eval, nullptr));
}

void NamsModel::set_latent_sigma(std::vector<double> sigma) {
  if (sigma.size() != config_.latent_dim) throw InvalidArgument("latent sigma: wrong dimension");
  for (double s : sigma)
    if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("latent sigma: entries must be positive and finite");
  latent_sigma_ = std::move(sigma);
}

void NamsModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j{{"format", "nams-model"},
                   {"format_version", 1},
                   {"config", config_.to_json()},
                   {"flat_count", space_.flat_count},
                   {"sloped_count", space_.sloped_count},
                   {"latent_sigma", latent_sigma_}};
  std::ofstream out(dir / "model.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << j.dump(2) << '\n';
  params_.save(dir / "params.json");
}

NamsModel NamsModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json", std::ios::binary);
  if (!in) throw IoError("cannot read " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("model.json: ") + e.what());
  }
  if (j.value("format", "") != "nams-model" || j.value("format_version", 0) != 1) {
    throw ConfigError("model.json: unsupported format");
  }
  NamsModel m;
  m.config_ = NamsConfig::from_json(j.at("config"));
  m.space_ = {j.at("flat_count").get<int>(), j.at("sloped_count").get<int>()};
  m.build_networks();
  m.params_ = ad::ModelParameters::load(dir / "params.json");
  m.latent_sigma_ = j.at("latent_sigma").get<std::vector<double>>();
  return m;
}

Tensor design_matrix(std::span<const sim::DiscreteDesign> designs, const sim::DesignSpace& space) {
  Tensor t = Tensor::matrix(designs.size(), static_cast<std::size_t>(space.dim()));
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const auto& d = designs[i];
    if (d.flat < 0 || d.flat >= space.flat_count || d.sloped < 0 || d.sloped >= space.sloped_count) {
      throw InvalidArgument("design_matrix: design index out of range");
    }
    t(i, static_cast<std::size_t>(d.flat)) = 1.0;
    t(i, static_cast<std::size_t>(space.flat_count + d.sloped)) = 1.0;
  }
  return t;
}

sim::DiscreteDesign discretize(std::span<const double> relaxed, const sim::DesignSpace& space) {
  if (relaxed.size() != static_cast<std::size_t>(space.dim())) throw InvalidArgument("discretize: wrong dimension");
  return {sim::argmax_index(relaxed.first(static_cast<std::size_t>(space.flat_count))),
          sim::argmax_index(relaxed.subspan(static_cast<std::size_t>(space.flat_count)))};
}

}  // namespace nams::core
