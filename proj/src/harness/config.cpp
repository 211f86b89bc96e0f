#include "nams/harness/config.hpp"

#include <cstdio>
#include <fstream>

#include "nams/common/error.hpp"
#include "nams/common/rng.hpp"

namespace nams::harness {

nlohmann::json DownstreamSettings::to_json() const {
  return {{"tiles_per_design", sample.tiles_per_design},
          {"pixels_per_class", sample.pixels_per_class},
          {"target_tiles", target_tiles},
          {"source_designs", source_designs},
          {"seeds", seeds},
          {"mix_source", mix_source},
          {"proxy", proxy.to_json()}};
}

DownstreamSettings DownstreamSettings::from_json(const nlohmann::json& j) {
  DownstreamSettings s;
  try {
    s.sample.tiles_per_design = j.value("tiles_per_design", s.sample.tiles_per_design);
    s.sample.pixels_per_class = j.value("pixels_per_class", s.sample.pixels_per_class);
    s.target_tiles = j.value("target_tiles", s.target_tiles);
    s.source_designs = j.value("source_designs", s.source_designs);
    s.seeds = j.value("seeds", s.seeds);
    s.mix_source = j.value("mix_source", s.mix_source);
    if (j.contains("proxy")) s.proxy = downstream::ProxyConfig::from_json(j.at("proxy"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("downstream config: ") + e.what());
  }
  return s;
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.nams_train.epochs = 500;
  c.search.restarts = 200;
  return c;
}

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c;
  c.profile = "paper";
  c.space = {40, 44};
  c.corpus_designs = 1700;
  c.target_groups = 100;
  c.nams.hidden = {1024, 2048};
  c.nams_train.epochs = 50000;
  c.search.restarts = 1000;
  c.ms2.iterations = 200;
  c.ms2.designs_per_step = 500;
  return c;
}

ExperimentConfig ExperimentConfig::for_profile(const std::string& profile) {
  if (profile == "desk") return desk();
  if (profile == "paper") return paper();
  throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
}

void ExperimentConfig::validate() const {
  if (space.flat_count < 1 || space.sloped_count < 1) throw ConfigError("bank sizes must be >= 1");
  if (corpus_designs < 4) throw ConfigError("corpus_designs must be >= 4");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (target_groups < 1) throw ConfigError("target_groups must be >= 1");
  if (rejection < 0.0 || rejection > 1.0) throw ConfigError("rejection must lie in [0, 1]");
  if (pca_components < 1 || pca_components > features::layout::kDim) {
    throw ConfigError("pca_components must lie in [1, 46]");
  }
  if (downstream.target_tiles < 1 || downstream.source_designs < 1 || downstream.seeds < 1) {
    throw ConfigError("downstream target_tiles, source_designs and seeds must be >= 1");
  }
  if (downstream.sample.tiles_per_design < 1 || downstream.sample.pixels_per_class < 1) {
    throw ConfigError("downstream tiles_per_design and pixels_per_class must be >= 1");
  }
  nams.validate();
  nams_train.validate();
  search.validate();
  dr.validate();
  ms2.validate();
  downstream.proxy.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"version", kVersion},
          {"profile", profile},
          {"seed", seed},
          {"flat_count", space.flat_count},
          {"sloped_count", space.sloped_count},
          {"corpus_designs", corpus_designs},
          {"trials", trials},
          {"target_groups", target_groups},
          {"nams", {{"model", nams.to_json()}, {"train", nams_train.to_json()}, {"search", search.to_json()}}},
          {"rejection", rejection},
          {"dr", dr.to_json()},
          {"ms2", ms2.to_json()},
          {"pca_components", pca_components},
          {"downstream", downstream.to_json()}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("version") && j.at("version") != kVersion) {
    throw ConfigError("config version " + j.at("version").dump() + " is not supported (expected " +
                      std::to_string(kVersion) + ")");
  }
  ExperimentConfig c;
  try {
    c = for_profile(j.value("profile", std::string("desk")));
    nlohmann::json merged = c.to_json();
    merged.merge_patch(j);
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.space = {merged.at("flat_count").get<int>(), merged.at("sloped_count").get<int>()};
    c.corpus_designs = merged.at("corpus_designs").get<int>();
    c.trials = merged.at("trials").get<int>();
    c.target_groups = merged.at("target_groups").get<int>();
    const auto& n = merged.at("nams");
    c.nams = core::NamsConfig::from_json(n.at("model"));
    c.nams_train = core::NamsTrainConfig::from_json(n.at("train"));
    c.search = core::SearchConfig::from_json(n.at("search"));
    c.rejection = merged.at("rejection").get<double>();
    c.dr = baselines::DrConfig::from_json(merged.at("dr"));
    c.ms2 = baselines::Ms2Config::from_json(merged.at("ms2"));
    c.pca_components = merged.at("pca_components").get<std::size_t>();
    c.downstream = DownstreamSettings::from_json(merged.at("downstream"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_name(to_json().dump())));
  return buf;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace nams::harness
