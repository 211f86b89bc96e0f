#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "nams/autodiff/adam.hpp"
#include "nams/baselines/kde.hpp"
#include "nams/core/population.hpp"
#include "nams/sim/simulator.hpp"

namespace nams::baselines {

struct Ms2Config {
  int iterations = 50;        // T
  int designs_per_step = 64;  // N
  double learning_rate = 0.2;
  /// Kernel bandwidth; 0 selects Silverman's rule on the projected targets.
  double bandwidth = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static Ms2Config from_json(const nlohmann::json& j);
};

struct Ms2Diagnostics {
  int iteration = 0;
  /// Mean over the step's designs of log p_G - log p_T.
  double score_mean = 0.0;
  std::uint64_t sim_calls = 0;  // cumulative
  int mode_flat = 0;
  int mode_sloped = 0;
  double mode_prob_flat = 0.0;
  double mode_prob_sloped = 0.0;
};

std::vector<double> softmax(std::span<const double> logits);

/// Score-function estimate (1/N) sum_i score_i * (onehot(sample_i) - probs),
/// i.e. the REINFORCE gradient of one categorical group.
std::vector<double> reinforce_gradient(std::span<const int> samples, std::span<const double> scores,
                                       std::span<const double> probs);

/// Distribution matching over per-group multinomials: each step samples N
/// designs, renders one image per design, and descends the REINFORCE
/// estimate of KL(p_G || p_T) with both densities approximated by KDE in
/// the projected feature space.
class Ms2Search {
 public:
  Ms2Search(const sim::Simulator& simulator, FeatureProjection projection, std::vector<Point> target_points,
            Ms2Config config, std::uint64_t seed);

  Ms2Diagnostics step();
  std::vector<Ms2Diagnostics> run();

  std::vector<double> flat_probabilities() const;
  std::vector<double> sloped_probabilities() const;
  const std::vector<double>& logits() const { return theta_; }
  double bandwidth() const { return bandwidth_; }
  std::uint64_t sim_calls() const { return calls_; }
  int iteration() const { return iteration_; }

  /// Draws n designs from the current multinomials.
  core::DesignPopulation sample_population(std::size_t n, std::uint64_t seed) const;

 private:
  const sim::Simulator& simulator_;
  FeatureProjection projection_;
  std::vector<Point> targets_;
  Ms2Config config_;
  sim::DesignSpace space_;
  std::vector<double> theta_;  // [flat logits | sloped logits]
  ad::AdamState adam_;
  Rng sample_rng_;
  Rng zeta_rng_;
  double bandwidth_ = 1.0;
  std::uint64_t calls_ = 0;
  int iteration_ = 0;
};

/// Index drawn from a categorical distribution by inverse CDF.
int sample_categorical(std::span<const double> probs, Rng& rng);

}  // namespace nams::baselines
