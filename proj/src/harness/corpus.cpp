#include "nams/harness/corpus.hpp"

#include <cstdio>
#include <fstream>

#include "nams/common/error.hpp"

namespace nams::harness {

namespace fs = std::filesystem;

features::FeatureGroup render_group(const sim::Simulator& simulator, const sim::DiscreteDesign& design, Rng& rng) {
  std::vector<sim::Image> images;
  std::vector<std::uint64_t> zetas;
  for (std::size_t k = 0; k < features::kGroupSize; ++k) {
    zetas.push_back(rng.next_u64());
    images.push_back(simulator(design, zetas.back()).image);
  }
  return features::group_features(images, design, std::move(zetas));
}

Corpus gen_training_corpus(const sim::Simulator& simulator, int n_designs, std::uint64_t seed,
                           const std::optional<fs::path>& out_dir) {
  if (n_designs < 0) throw InvalidArgument("gen_training_corpus: n_designs must be >= 0");
  Rng root(seed, hash_name("corpus"));
  Rng design_rng = root.split("design");
  Rng zeta_rng = root.split("zeta");

  std::ofstream manifest;
  if (out_dir) {
    fs::create_directories(*out_dir / "images");
    manifest.open(*out_dir / "manifest.jsonl", std::ios::binary);
    if (!manifest) throw IoError("cannot write " + (*out_dir / "manifest.jsonl").string());
  }

  Corpus corpus;
  for (int i = 0; i < n_designs; ++i) {
    const sim::DiscreteDesign d = sim::sample_uniform_discrete(simulator.space(), design_rng);
    std::vector<sim::Image> images;
    std::vector<std::uint64_t> zetas;
    for (std::size_t k = 0; k < features::kGroupSize; ++k) {
      zetas.push_back(zeta_rng.next_u64());
      sim::SimOutput out = simulator(d, zetas.back());
      if (out_dir) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "g%05d_%zu", i, k);
        const std::string image = std::string("images/") + stem + ".ppm";
        const std::string mask = std::string("images/") + stem + "_mask.pgm";
        sim::write_ppm(*out_dir / image, out.image);
        sim::write_pgm(*out_dir / mask, out.mask);
        nlohmann::json line{{"group", i},     {"member", k},        {"flat_idx", d.flat}, {"sloped_idx", d.sloped},
                            {"zeta", zetas.back()}, {"image", image}, {"mask", mask}};
        manifest << line.dump() << '\n';
      }
      images.push_back(std::move(out.image));
    }
    corpus.groups.push_back(features::group_features(images, d, std::move(zetas)));
  }
  if (out_dir) {
    if (!manifest) throw IoError("write failed: " + (*out_dir / "manifest.jsonl").string());
    features::write_feature_jsonl(*out_dir / "features.jsonl", corpus.groups);
  }
  return corpus;
}

Corpus load_corpus(const fs::path& dir) {
  Corpus c;
  c.groups = features::read_feature_jsonl(dir / "features.jsonl");
  return c;
}

}  // namespace nams::harness
