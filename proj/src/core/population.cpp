#include "nams/core/population.hpp"

#include <fstream>

#include "json.hpp"
#include "nams/common/error.hpp"

namespace nams::core {

std::string to_string(PopulationSource s) {
  switch (s) {
    case PopulationSource::Searched:
      return "searched";
    case PopulationSource::RejectedUniform:
      return "rejected_uniform";
    case PopulationSource::Direct:
      return "direct";
    case PopulationSource::Sampled:
      return "sampled";
  }
  return "searched";
}

PopulationSource parse_source(const std::string& s) {
  for (auto v : {PopulationSource::Searched, PopulationSource::RejectedUniform, PopulationSource::Direct,
                 PopulationSource::Sampled})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown population source '" + s + "'");
}

void write_population_jsonl(const std::filesystem::path& path, const DesignPopulation& population) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : population.entries) {
    nlohmann::json j{{"flat_idx", e.design.flat},
                     {"sloped_idx", e.design.sloped},
                     {"source", to_string(e.source)},
                     {"loss", e.loss}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

DesignPopulation read_population_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  DesignPopulation pop;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      pop.entries.push_back({{j.at("flat_idx").get<int>(), j.at("sloped_idx").get<int>()},
                             parse_source(j.at("source").get<std::string>()),
                             j.value("loss", 0.0)});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pop;
}

RejectionOutcome rejection_sample(const sim::DiscreteDesign& d_star, double r, const sim::DesignSpace& space,
                                  Rng& rng) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("rejection_sample: r must be in [0, 1]");
  if (rng.uniform() < r) return {sim::sample_uniform_discrete(space, rng), true};
  return {d_star, false};
}

DesignPopulation infer_population(const NamsModel& model, std::span<const features::FeatureVector> targets,
                                  const SearchConfig& config, double r, std::uint64_t seed,
                                  std::vector<SearchResult>* details) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("infer_population: r must be in [0, 1]");
  DesignPopulation pop;
  Rng root(seed, hash_name("nams.infer"));
  Rng reject = root.split("reject");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    SearchResult res;
    try {
      res = na_search(model, targets[i], config, root.split(i).next_u64());
    } catch (const NumericalError& e) {
      throw NumericalError("infer_population: target " + std::to_string(i) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("infer_population: target " + std::to_string(i) + ": " + e.what());
    }
    RejectionOutcome o = rejection_sample(res.design, r, model.space(), reject);
    pop.entries.push_back({o.design, o.replaced ? PopulationSource::RejectedUniform : PopulationSource::Searched,
                           o.replaced ? 0.0 : res.loss});
    if (details) details->push_back(std::move(res));
  }
  return pop;
}

}  // namespace nams::core
