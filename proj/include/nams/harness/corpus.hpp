#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nams/features/features.hpp"
#include "nams/sim/simulator.hpp"

namespace nams::harness {

struct Corpus {
  std::vector<features::FeatureGroup> groups;
};

/// Uniformly sampled designs, nine fresh renders each. With `out_dir` the
/// renders (PPM), masks (PGM), a per-image manifest.jsonl and features.jsonl
/// are written as they are produced.
Corpus gen_training_corpus(const sim::Simulator& simulator, int n_designs, std::uint64_t seed,
                           const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Reads features.jsonl written by gen_training_corpus.
Corpus load_corpus(const std::filesystem::path& dir);

/// Nine renders of one design from fresh zetas drawn from `rng`.
features::FeatureGroup render_group(const sim::Simulator& simulator, const sim::DiscreteDesign& design, Rng& rng);

}  // namespace nams::harness
