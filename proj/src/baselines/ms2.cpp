#include "nams/baselines/ms2.hpp"

#include <algorithm>
#include <cmath>

#include "nams/common/error.hpp"
#include "nams/features/features.hpp"

namespace nams::baselines {

void Ms2Config::validate() const {
  if (iterations < 0) throw ConfigError("ms2: iterations must be >= 0");
  if (designs_per_step < 2) throw ConfigError("ms2: designs_per_step (N) must be >= 2");
  if (learning_rate < 0.0) throw ConfigError("ms2: learning_rate must be >= 0");
  if (bandwidth < 0.0) throw ConfigError("ms2: bandwidth must be >= 0");
}

nlohmann::json Ms2Config::to_json() const {
  return {{"iterations", iterations},
          {"designs_per_step", designs_per_step},
          {"learning_rate", learning_rate},
          {"bandwidth", bandwidth}};
}

Ms2Config Ms2Config::from_json(const nlohmann::json& j) {
  Ms2Config c;
  try {
    c.iterations = j.value("iterations", c.iterations);
    c.designs_per_step = j.value("designs_per_step", c.designs_per_step);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.bandwidth = j.value("bandwidth", c.bandwidth);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ms2 config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax: empty input");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - top);
  for (auto& v : p) v /= z;
  return p;
}

std::vector<double> reinforce_gradient(std::span<const int> samples, std::span<const double> scores,
                                       std::span<const double> probs) {
  if (samples.size() != scores.size() || samples.empty()) {
    throw InvalidArgument("reinforce_gradient: need one score per sample");
  }
  std::vector<double> grad(probs.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] < 0 || static_cast<std::size_t>(samples[i]) >= probs.size()) {
      throw InvalidArgument("reinforce_gradient: sample out of range");
    }
    for (std::size_t k = 0; k < probs.size(); ++k) grad[k] -= scores[i] * probs[k];
    grad[static_cast<std::size_t>(samples[i])] += scores[i];
  }
  for (auto& g : grad) g /= static_cast<double>(samples.size());
  return grad;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

Ms2Search::Ms2Search(const sim::Simulator& simulator, FeatureProjection projection, std::vector<Point> target_points,
                     Ms2Config config, std::uint64_t seed)
    : simulator_(simulator),
      projection_(std::move(projection)),
      targets_(std::move(target_points)),
      config_(config),
      space_(simulator.space()),
      theta_(static_cast<std::size_t>(space_.dim()), 0.0),
      adam_(ad::Tensor::row(theta_)),
      sample_rng_(seed, hash_name("ms2.sample")),
      zeta_rng_(seed, hash_name("ms2.zeta")) {
  config_.validate();
  if (targets_.empty()) throw InvalidArgument("Ms2Search: empty target corpus");
  bandwidth_ = config_.bandwidth > 0.0 ? config_.bandwidth : silverman_bandwidth(targets_);
}

std::vector<double> Ms2Search::flat_probabilities() const {
  return softmax(std::span(theta_).first(static_cast<std::size_t>(space_.flat_count)));
}

std::vector<double> Ms2Search::sloped_probabilities() const {
  return softmax(std::span(theta_).subspan(static_cast<std::size_t>(space_.flat_count)));
}

Ms2Diagnostics Ms2Search::step() {
  const std::size_t n = static_cast<std::size_t>(config_.designs_per_step);
  const auto pf = flat_probabilities();
  const auto ps = sloped_probabilities();
  std::vector<int> flat(n), sloped(n);
  std::vector<Point> generated(n);
  for (std::size_t i = 0; i < n; ++i) {
    flat[i] = sample_categorical(pf, sample_rng_);
    sloped[i] = sample_categorical(ps, sample_rng_);
    const sim::DiscreteDesign d{flat[i], sloped[i]};
    sim::SimOutput out;
    try {
      out = simulator_(d, zeta_rng_.next_u64());
    } catch (const Error& e) {
      throw NumericalError("ms2 step " + std::to_string(iteration_) + ": design " + std::to_string(i) + ": " + e.what());
    }
    ++calls_;
    generated[i] = projection_(features::extract_augmented(out.image));
  }
  std::vector<double> scores(n);
  double score_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = kde_log_density(generated, generated[i], bandwidth_) - kde_log_density(targets_, generated[i], bandwidth_);
    score_sum += scores[i];
  }
  auto gf = reinforce_gradient(flat, scores, pf);
  auto gs = reinforce_gradient(sloped, scores, ps);
  ad::Tensor grad = ad::Tensor::matrix(1, theta_.size());
  std::copy(gf.begin(), gf.end(), grad.values().begin());
  std::copy(gs.begin(), gs.end(), grad.values().begin() + static_cast<std::ptrdiff_t>(gf.size()));
  ad::Tensor theta = ad::Tensor::row(theta_);
  adam_.step(theta, grad, {config_.learning_rate, 0.9, 0.999, 1e-8});
  theta_ = theta.to_vector();
  ++iteration_;

  Ms2Diagnostics diag;
  diag.iteration = iteration_;
  diag.score_mean = score_sum / static_cast<double>(n);
  diag.sim_calls = calls_;
  const auto nf = flat_probabilities();
  const auto ns = sloped_probabilities();
  for (double p : nf)
    if (!(p > 0.0) || !std::isfinite(p)) throw NumericalError("ms2: flat multinomial left the simplex");
  for (double p : ns)
    if (!(p > 0.0) || !std::isfinite(p)) throw NumericalError("ms2: sloped multinomial left the simplex");
  diag.mode_flat = sim::argmax_index(nf);
  diag.mode_sloped = sim::argmax_index(ns);
  diag.mode_prob_flat = nf[static_cast<std::size_t>(diag.mode_flat)];
  diag.mode_prob_sloped = ns[static_cast<std::size_t>(diag.mode_sloped)];
  return diag;
}

std::vector<Ms2Diagnostics> Ms2Search::run() {
  std::vector<Ms2Diagnostics> out;
  for (int t = 0; t < config_.iterations; ++t) out.push_back(step());
  return out;
}

core::DesignPopulation Ms2Search::sample_population(std::size_t n, std::uint64_t seed) const {
  Rng rng(seed, hash_name("ms2.population"));
  const auto pf = flat_probabilities();
  const auto ps = sloped_probabilities();
  core::DesignPopulation pop;
  for (std::size_t i = 0; i < n; ++i) {
    sim::DiscreteDesign d;
    d.flat = sample_categorical(pf, rng);
    d.sloped = sample_categorical(ps, rng);
    pop.entries.push_back({d, core::PopulationSource::Sampled, 0.0});
  }
  return pop;
}

}  // namespace nams::baselines
