#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "nams/baselines/dr.hpp"
#include "nams/baselines/ms2.hpp"
#include "nams/core/model.hpp"
#include "nams/core/search.hpp"
#include "nams/core/training.hpp"
#include "nams/downstream/proxy.hpp"
#include "nams/sim/design.hpp"

namespace nams::harness {

struct DownstreamSettings {
  downstream::SampleConfig sample;
  /// Fresh target-design tiles used for IoU.
  int target_tiles = 8;
  /// Designs standing in for the unaugmented source domain ("no_aug").
  int source_designs = 4;
  /// Replicates; each one trains a fresh proxy per strategy and target.
  int seeds = 4;
  /// When true every strategy also trains on the source pixels.
  bool mix_source = false;
  downstream::ProxyConfig proxy;

  nlohmann::json to_json() const;
  static DownstreamSettings from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::string profile = "desk";
  std::uint64_t seed = 2022;
  sim::DesignSpace space{16, 16};
  int corpus_designs = 400;
  int trials = 4;
  int target_groups = 12;

  core::NamsConfig nams;
  core::NamsTrainConfig nams_train;
  core::SearchConfig search;
  /// Rejection-diversification probability r.
  double rejection = 0.0;
  baselines::DrConfig dr;
  baselines::Ms2Config ms2;
  std::size_t pca_components = 8;
  DownstreamSettings downstream;

  static ExperimentConfig desk();
  static ExperimentConfig paper();
  /// Throws ConfigError for anything but "desk" or "paper".
  static ExperimentConfig for_profile(const std::string& profile);

  void validate() const;
  nlohmann::json to_json() const;
  /// Overlays `j` on the profile it names (desk when absent). A "version"
  /// other than kVersion is rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Hex FNV-1a of the canonical JSON dump.
  std::string hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace nams::harness
