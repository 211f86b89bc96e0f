#include "nams/core/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"

namespace nams::core {

void SearchConfig::validate() const {
  if (restarts < 1 || pool < 1 || iterations < 0) throw ConfigError("search: restarts and pool must be >= 1");
  if (pool > restarts) throw ConfigError("search: pool (S) must not exceed restarts (M)");
  if (!(init_range > 0.0)) throw ConfigError("search: init_range must be positive");
  adam.validate();
}

nlohmann::json SearchConfig::to_json() const {
  return {{"restarts", restarts},
          {"init_range", init_range},
          {"pool", pool},
          {"iterations", iterations},
          {"learning_rate", adam.learning_rate},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2}};
}

SearchConfig SearchConfig::from_json(const nlohmann::json& j) {
  SearchConfig c;
  try {
    c.restarts = j.value("restarts", c.restarts);
    c.init_range = j.value("init_range", c.init_range);
    c.pool = j.value("pool", c.pool);
    c.iterations = j.value("iterations", c.iterations);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::vector<double> row_losses(const Tensor& pred, const Tensor& target) {
  std::vector<double> out(pred.rows(), 0.0);
  for (std::size_t r = 0; r < pred.rows(); ++r)
    for (std::size_t c = 0; c < pred.cols(); ++c) out[r] += std::pow(pred(r, c) - target(r, c), 2);
  return out;
}

// Per-group winner among candidate values.
int vote_group(std::span<const SearchCandidate> cands, bool flat) {
  struct Tally {
    int count = 0;
    double loss_sum = 0.0;
  };
  std::map<int, Tally> tally;
  for (const auto& c : cands) {
    auto& t = tally[flat ? c.design.flat : c.design.sloped];
    t.count += 1;
    t.loss_sum += c.loss;
  }
  int best = -1;
  Tally best_t;
  for (const auto& [value, t] : tally) {
    // std::map iterates values ascending, so strict comparisons keep the lowest index.
    if (best < 0 || t.count > best_t.count ||
        (t.count == best_t.count && t.loss_sum / t.count < best_t.loss_sum / best_t.count)) {
      best = value;
      best_t = t;
    }
  }
  return best;
}

}  // namespace

VoteOutcome vote(std::span<const SearchCandidate> candidates) {
  if (candidates.empty()) throw InvalidArgument("vote: no candidates");
  VoteOutcome out;
  out.design = {vote_group(candidates, true), vote_group(candidates, false)};
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].design == out.design && (!found || candidates[i].loss < best)) {
      best = candidates[i].loss;
      out.chosen = i;
      found = true;
    }
  }
  if (!found) {
    out.mismatch = true;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (candidates[i].loss < candidates[out.chosen].loss) out.chosen = i;
  }
  return out;
}

SearchResult latent_search(const PredictFn& predict, const DecodeFn& decode, const sim::DesignSpace& space,
                           std::span<const double> target, std::span<const double> sigma,
                           const SearchConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t m = static_cast<std::size_t>(config.restarts);
  const std::size_t k = sigma.size();
  if (k == 0) throw InvalidArgument("latent_search: empty sigma");

  Rng rng(seed, hash_name("nams.search"));
  Tensor z = Tensor::matrix(m, k);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < k; ++j) z(r, j) = rng.uniform(-config.init_range, config.init_range) * sigma[j];

  Tensor targets = Tensor::matrix(m, target.size());
  for (std::size_t r = 0; r < m; ++r)
    std::copy(target.begin(), target.end(), targets.values().begin() + static_cast<std::ptrdiff_t>(r * target.size()));

  ad::AdamState adam(z);
  std::vector<double> initial;
  auto forward = [&](Graph& g, NodeId zn) {
    NodeId p = predict(g, zn);
    if (g.value(p).cols() != target.size()) {
      throw InvalidArgument("latent_search: predictor emits " + std::to_string(g.value(p).cols()) +
                            " features, target has " + std::to_string(target.size()));
    }
    return p;
  };
  for (int it = 0; it < config.iterations; ++it) {
    Graph g;
    g.freeze_parameters(true);
    NodeId zn = g.input(z, true, "z");
    NodeId p = forward(g, zn);
    NodeId loss = ad::sum_squares(g, ad::sub(g, p, g.input(targets)));
    if (it == 0) initial = row_losses(g.value(p), targets);
    g.backward(loss);
    Tensor grad = g.grad(zn);
    // Diverged restarts stop moving instead of poisoning the shared state.
    for (auto& v : grad.values())
      if (!std::isfinite(v)) v = 0.0;
    adam.step(z, grad, config.adam);
  }
  std::vector<double> final_loss;
  {
    Graph g;
    g.freeze_parameters(true);
    NodeId p = forward(g, g.input(z));
    final_loss = row_losses(g.value(p), targets);
    if (initial.empty()) initial = final_loss;
  }

  SearchResult result;
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < m; ++r) {
    bool finite = std::isfinite(final_loss[r]);
    for (std::size_t j = 0; j < k && finite; ++j) finite = std::isfinite(z(r, j));
    if (!finite) {
      ++result.nonfinite_restarts;
      continue;
    }
    if (final_loss[r] > initial[r] + 1e-9) ++result.failed_restarts;
    order.push_back(r);
  }
  if (order.empty()) throw NumericalError("latent_search: every restart diverged");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return final_loss[a] < final_loss[b]; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(config.pool)));

  Tensor pooled = Tensor::matrix(order.size(), k);
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = 0; j < k; ++j) pooled(i, j) = z(order[i], j);
  Tensor relaxed = decode(pooled);
  if (relaxed.rows() != order.size() || relaxed.cols() != static_cast<std::size_t>(space.dim())) {
    throw InvalidArgument("latent_search: decoder output has shape " + relaxed.shape_string());
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t r = order[i];
    SearchCandidate c;
    c.restart = static_cast<int>(r);
    c.z.assign(pooled.row_span(i).begin(), pooled.row_span(i).end());
    c.initial_loss = initial[r];
    c.loss = final_loss[r];
    c.design = discretize(relaxed.row_span(i), space);
    c.failed = final_loss[r] > initial[r] + 1e-9;
    result.pool.push_back(std::move(c));
  }
  VoteOutcome v = vote(result.pool);
  result.design = v.design;
  result.mismatch = v.mismatch;
  result.z_star = result.pool[v.chosen].z;
  result.loss = result.pool[v.chosen].loss;
  return result;
}

SearchResult na_search(const NamsModel& model, std::span<const double> target, const SearchConfig& config,
                       std::uint64_t seed) {
  // Eval mode never mutates the model, so the predictor can run on a const model.
  auto& m = const_cast<NamsModel&>(model);
  PredictFn predict = [&m](Graph& g, NodeId z) { return m.predict(g, z, Mode::Eval, nullptr); };
  DecodeFn decode = [&model](const Tensor& z) { return model.decode(z); };
  return latent_search(predict, decode, model.space(), target, model.latent_sigma(), config, seed);
}

}  // namespace nams::core
