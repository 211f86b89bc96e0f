#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "nams/core/model.hpp"

namespace nams::core {

struct SearchConfig {
  int restarts = 200;
  double init_range = 3.0;  // k: inits are uniform in +-k * sigma_j
  int pool = 50;            // S: candidates kept for the vote
  int iterations = 200;
  ad::AdamConfig adam{0.01, 0.9, 0.999, 1e-8};

  void validate() const;
  nlohmann::json to_json() const;
  static SearchConfig from_json(const nlohmann::json& j);
};

struct SearchCandidate {
  int restart = 0;
  std::vector<double> z;
  double initial_loss = 0.0;
  double loss = 0.0;
  sim::DiscreteDesign design;
  /// Final loss exceeded the initial loss.
  bool failed = false;
};

struct SearchResult {
  std::vector<double> z_star;
  sim::DiscreteDesign design;
  double loss = 0.0;
  /// The S best candidates, ascending by final loss.
  std::vector<SearchCandidate> pool;
  /// No pooled candidate decoded to the voted design.
  bool mismatch = false;
  int failed_restarts = 0;
  int nonfinite_restarts = 0;
};

/// Builds P(z) on a graph; the search differentiates through it w.r.t. z only.
using PredictFn = std::function<NodeId(Graph&, NodeId)>;
/// Maps a batch of latent codes to relaxed designs.
using DecodeFn = std::function<Tensor(const Tensor&)>;

/// Multi-restart ADAM descent on ||P(z) - target||^2 followed by a per-group
/// majority vote over the S lowest-loss candidates.
SearchResult latent_search(const PredictFn& predict, const DecodeFn& decode, const sim::DesignSpace& space,
                           std::span<const double> target, std::span<const double> sigma,
                           const SearchConfig& config, std::uint64_t seed);

/// latent_search with the model's frozen eval-mode predictor and decoder.
SearchResult na_search(const NamsModel& model, std::span<const double> target, const SearchConfig& config,
                       std::uint64_t seed);

struct VoteOutcome {
  sim::DiscreteDesign design;
  /// Index into the candidate list of the chosen z*.
  std::size_t chosen = 0;
  bool mismatch = false;
};

/// Per-group majority vote. Ties go to the value whose supporters have the
/// lowest mean loss, then to the lowest index. Candidates must be non-empty.
VoteOutcome vote(std::span<const SearchCandidate> candidates);

}  // namespace nams::core
