#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nams/core/search.hpp"
#include "nams/features/features.hpp"

namespace nams::core {

enum class PopulationSource { Searched, RejectedUniform, Direct, Sampled };
std::string to_string(PopulationSource s);
PopulationSource parse_source(const std::string& s);

struct PopulationEntry {
  sim::DiscreteDesign design;
  PopulationSource source = PopulationSource::Searched;
  /// Search loss for searched entries, 0 otherwise.
  double loss = 0.0;
};

struct DesignPopulation {
  std::vector<PopulationEntry> entries;
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// JSON-lines: {"flat_idx", "sloped_idx", "source", "loss"}.
void write_population_jsonl(const std::filesystem::path& path, const DesignPopulation& population);
DesignPopulation read_population_jsonl(const std::filesystem::path& path);

struct RejectionOutcome {
  sim::DiscreteDesign design;
  bool replaced = false;
};

/// Keeps d_star with probability 1 - r, otherwise replaces it with a uniform
/// design. Throws InvalidArgument when r is outside [0, 1].
RejectionOutcome rejection_sample(const sim::DiscreteDesign& d_star, double r, const sim::DesignSpace& space, Rng& rng);

/// Searches every target group and applies rejection sampling. Never calls
/// the simulator. `details`, when given, receives one SearchResult per target.
DesignPopulation infer_population(const NamsModel& model, std::span<const features::FeatureVector> targets,
                                  const SearchConfig& config, double r, std::uint64_t seed,
                                  std::vector<SearchResult>* details = nullptr);

}  // namespace nams::core
