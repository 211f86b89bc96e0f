#include "nams/harness/cli.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "nams/common/error.hpp"
#include "nams/harness/report.hpp"

namespace nams::harness {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string profile;
  std::string out = "out";
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
  nlohmann::json j = nlohmann::json::object();
  if (!g.config_path.empty()) {
    const std::string text = read_text(g.config_path);
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(g.config_path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(g.config_path + ": config must be a JSON object");
  }
  if (!g.profile.empty()) j["profile"] = g.profile;
  if (g.seed) j["seed"] = *g.seed;
  return ExperimentConfig::from_json(j);
}

/// Wall-clock per step. Kept out of CSV/JSON outputs so reruns stay
/// byte-identical; written to timing.log instead.
class Stopwatch {
 public:
  explicit Stopwatch(std::ostream& log) : log_(log) {}
  template <class F>
  auto time(const std::string& what, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      lines_ << what << ' ' << s << " s\n";
      log_ << "  " << what << ": " << s << " s" << std::endl;
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }
  void write(const fs::path& dir) const { write_text(dir / "timing.log", lines_.str()); }

 private:
  std::ostream& log_;
  std::ostringstream lines_;
};

Corpus obtain_corpus(const ExperimentConfig& cfg, const std::string& corpus_dir, SimCallCounter& counter,
                     Stopwatch& sw) {
  if (!corpus_dir.empty()) {
    if (!fs::exists(fs::path(corpus_dir) / "features.jsonl")) {
      throw ConfigError("corpus directory " + corpus_dir + " has no features.jsonl");
    }
    return sw.time("load corpus", [&] { return load_corpus(corpus_dir); });
  }
  const sim::Simulator sim = make_simulator(cfg, sim::BankId::InDomain, &counter, Phase::NamsTrain);
  return sw.time("generate corpus", [&] {
    return gen_training_corpus(sim, cfg.corpus_designs, derive_seed(cfg.seed, "corpus"));
  });
}

void write_chart_outputs(const fs::path& out) { regenerate_report(out); }

void write_common(const fs::path& out, const std::string& command, const ExperimentConfig& cfg,
                  const SimCallCounter& counter, const Stopwatch& sw) {
  write_json(out / "provenance.json", provenance(command, cfg, {cfg.seed}));
  write_json(out / "sim_calls.json", counter.to_json());
  sw.write(out);
}

struct Pipeline {
  Corpus corpus;
  TrainedModels models;
};

Pipeline prepare(const ExperimentConfig& cfg, const std::string& corpus_dir, SimCallCounter& counter, Stopwatch& sw,
                 std::ostream& log) {
  Pipeline p;
  p.corpus = obtain_corpus(cfg, corpus_dir, counter, sw);
  log << "  corpus: " << p.corpus.groups.size() << " designs" << std::endl;
  p.models = sw.time("train models", [&] { return train_models(cfg, p.corpus); });
  return p;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"Neural-adjoint meta-simulation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON experiment config");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--profile", g.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--out", g.out, "output directory");

  std::string corpus_dir;
  auto* gen = app.add_subcommand("gen-corpus", "simulate the uniform training corpus");
  auto* tn = app.add_subcommand("train-nams", "train the NAMS encoder/decoder/predictor");
  tn->add_option("--corpus", corpus_dir, "corpus directory (generated in memory when absent)");
  auto* td = app.add_subcommand("train-dr", "train the direct-regression baseline");
  td->add_option("--corpus", corpus_dir, "corpus directory (generated in memory when absent)");

  std::string model_dir, targets_path, method = "nams";
  std::optional<double> rejection;
  auto* inf = app.add_subcommand("infer", "infer designs for target feature groups");
  inf->add_option("--model", model_dir, "model directory from train-nams or train-dr")->required();
  inf->add_option("--targets", targets_path, "feature groups (JSONL)")->required();
  inf->add_option("--method", method, "nams or dr")->check(CLI::IsMember({"nams", "dr"}));
  inf->add_option("--rejection", rejection, "rejection probability r (NAMS only)");

  int flat = 0, sloped = 0;
  std::string bank = "in_domain";
  auto* ms2 = app.add_subcommand("ms2-search", "run MS2 against renders of one target design");
  ms2->add_option("--flat", flat, "target flat texture index");
  ms2->add_option("--sloped", sloped, "target sloped texture index");
  ms2->add_option("--bank", bank, "target bank")->check(CLI::IsMember({"in_domain", "held_out"}));
  ms2->add_option("--corpus", corpus_dir, "corpus used to fit the feature projection");

  auto* e1 = app.add_subcommand("run-e1", "in-domain design inference (no design gap)");
  auto* e2 = app.add_subcommand("run-e2", "held-out texture design inference");
  auto* e4 = app.add_subcommand("run-e4", "simulator-call accounting and crossover");
  auto* dsub = app.add_subcommand("downstream", "proxy segmentation IoU per strategy");
  auto* rep = app.add_subcommand("report", "regenerate charts and a summary from CSVs in --out");
  for (auto* sub : {e1, e2, e4, dsub}) sub->add_option("--corpus", corpus_dir, "reuse a generated corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream err;
    const int code = app.exit(e, log, err);
    log << err.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const fs::path out = g.out;
    if (*rep) {
      nlohmann::json summary = regenerate_report(out);
      write_json(out / "summary.json", summary);
      log << "report: " << summary["charts"].size() << " charts regenerated in " << out.string() << std::endl;
      return kExitOk;
    }

    const ExperimentConfig cfg = resolve_config(g);
    fs::create_directories(out);
    SimCallCounter counter;
    Stopwatch sw(log);
    const std::string command = app.get_subcommands().front()->get_name();
    log << command << " (profile " << cfg.profile << ", seed " << cfg.seed << ", config " << cfg.hash() << ")"
        << std::endl;

    if (*gen) {
      const sim::Simulator sim = make_simulator(cfg, sim::BankId::InDomain, &counter, Phase::NamsTrain);
      Corpus c = sw.time("generate corpus", [&] {
        return gen_training_corpus(sim, cfg.corpus_designs, derive_seed(cfg.seed, "corpus"), out / "corpus");
      });
      log << "  wrote " << c.groups.size() * features::kGroupSize << " images to " << (out / "corpus").string()
          << std::endl;
    } else if (*tn) {
      Corpus c = obtain_corpus(cfg, corpus_dir, counter, sw);
      features::FeatureScaler scaler = fit_group_scaler(c);
      core::NamsModel model(cfg.nams, cfg.space, derive_seed(cfg.seed, "nams.init"));
      core::NamsTrainConfig tc = cfg.nams_train;
      tc.seed = derive_seed(cfg.seed, "nams.train");
      auto examples = nams_examples(c, scaler);
      core::NamsTrainReport r = sw.time("train nams", [&] { return core::train_nams(model, examples, tc); });
      model.save(out / "nams_model");
      write_json(out / "nams_model" / "scaler.json", scaler.to_json());
      write_text(out / "nams_train.csv", nams_train_csv(r).str());
    } else if (*td) {
      Corpus c = obtain_corpus(cfg, corpus_dir, counter, sw);
      features::FeatureScaler scaler = fit_group_scaler(c);
      baselines::DrConfig dc = cfg.dr;
      dc.seed = derive_seed(cfg.seed, "dr.train");
      baselines::DrModel model(features::layout::kDim, cfg.space, dc.hidden, derive_seed(cfg.seed, "dr.init"));
      auto examples = dr_examples(c, scaler);
      baselines::DrTrainReport r = sw.time("train dr", [&] { return baselines::train_dr(model, examples, dc); });
      model.save(out / "dr_model");
      write_json(out / "dr_model" / "scaler.json", scaler.to_json());
      write_text(out / "dr_train.csv", dr_train_csv(r).str());
    } else if (*inf) {
      nlohmann::json sj;
      try {
        sj = nlohmann::json::parse(read_text(fs::path(model_dir) / "scaler.json"));
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("scaler.json: ") + e.what());
      }
      const features::FeatureScaler scaler = features::FeatureScaler::from_json(sj);
      std::vector<features::FeatureVector> targets;
      for (const auto& grp : features::read_feature_jsonl(targets_path)) targets.push_back(scaler.transform(grp.averaged));
      core::DesignPopulation pop;
      if (method == "nams") {
        const core::NamsModel model = core::NamsModel::load(model_dir);
        pop = sw.time("nams inference", [&] {
          return core::infer_population(model, targets, cfg.search, rejection.value_or(cfg.rejection),
                                        derive_seed(cfg.seed, "infer.nams"));
        });
      } else {
        const baselines::DrModel model = baselines::DrModel::load(model_dir);
        for (const auto& t : targets) pop.entries.push_back({baselines::infer_dr(model, t), core::PopulationSource::Direct, 0.0});
      }
      core::write_population_jsonl(out / "population.jsonl", pop);
      log << "  inferred " << pop.size() << " designs" << std::endl;
    } else if (*ms2) {
      const sim::DesignSpace space = cfg.space;
      if (flat < 0 || flat >= space.flat_count || sloped < 0 || sloped >= space.sloped_count) {
        throw ConfigError("ms2-search: target design out of range");
      }
      Corpus c = obtain_corpus(cfg, corpus_dir, counter, sw);
      const baselines::FeatureProjection proj = fit_projection(c, cfg.pca_components);
      const sim::Simulator target_sim(sim::make_bank(sim::parse_bank(bank), space));
      Rng trng(derive_seed(cfg.seed, "ms2.target"));
      std::vector<baselines::Point> points;
      for (int i = 0; i < cfg.target_groups; ++i) {
        for (const auto& m : render_group(target_sim, {flat, sloped}, trng).members) points.push_back(proj(m));
      }
      const sim::Simulator sim = make_simulator(cfg, sim::BankId::InDomain, &counter, Phase::Ms2Search);
      baselines::Ms2Search search(sim, proj, std::move(points), cfg.ms2, derive_seed(cfg.seed, "ms2.search"));
      auto trace = sw.time("ms2 search", [&] { return search.run(); });
      write_text(out / "ms2_trace.csv", ms2_trace_csv(trace).str());
      core::write_population_jsonl(out / "ms2_population.jsonl",
                                   search.sample_population(static_cast<std::size_t>(cfg.target_groups),
                                                            derive_seed(cfg.seed, "ms2.sample")));
      std::vector<std::string> fp, sp;
      for (double p : search.flat_probabilities()) fp.push_back(fmt(p));
      for (double p : search.sloped_probabilities()) sp.push_back(fmt(p));
      write_json(out / "ms2_final.json", {{"flat_probabilities", fp}, {"sloped_probabilities", sp}});
    } else {
      Pipeline p = prepare(cfg, corpus_dir, counter, sw, log);
      if (*e2) {
        InferenceReport r = sw.time("e2", [&] { return run_e2(cfg, p.models, counter); });
        write_text(out / "e2_accuracy.csv", accuracy_csv(r.rows).str());
      } else {
        InferenceReport r = sw.time("e1", [&] { return run_e1(cfg, p.models, counter); });
        write_text(out / "e1_accuracy.csv", accuracy_csv(r.rows).str());
        if (*e4) {
          const Accounting a = run_e4(cfg, counter, static_cast<std::uint64_t>(cfg.trials));
          write_json(out / "e4_accounting.json", accounting_json(a));
          write_text(out / "e4_accounting.csv", e4_csv(a, std::max(8, 2 * a.configured_crossover)).str());
          log << "  crossover at N_d = " << a.crossover << " (configured budgets: " << a.configured_crossover << ")"
              << std::endl;
        }
        if (*dsub) {
          auto rows = sw.time("downstream", [&] { return run_downstream(cfg, r, counter); });
          write_text(out / "downstream_iou.csv", iou_csv(rows).str());
        }
      }
    }
    write_chart_outputs(out);
    write_common(out, command, cfg, counter, sw);
    log << "done; outputs in " << out.string() << std::endl;
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << std::endl;
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
}

}  // namespace nams::harness
