#include "nams/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nams/common/error.hpp"
#include "nams/downstream/proxy.hpp"

namespace nams::harness {

sim::Simulator make_simulator(const ExperimentConfig& config, sim::BankId bank, SimCallCounter* counter, Phase phase) {
  return sim::Simulator(sim::make_bank(bank, config.space), {}, counter ? counter->slot(phase) : nullptr);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index) {
  return Rng(master, hash_name(purpose)).split(index).next_u64();
}

features::FeatureScaler fit_group_scaler(const Corpus& corpus) {
  std::vector<features::FeatureVector> rows;
  for (const auto& g : corpus.groups) rows.push_back(g.averaged);
  return features::FeatureScaler::fit(rows);
}

std::vector<core::TrainingExample> nams_examples(const Corpus& corpus, const features::FeatureScaler& scaler) {
  std::vector<core::TrainingExample> out;
  for (const auto& g : corpus.groups) out.push_back({g.design, scaler.transform(g.averaged)});
  return out;
}

std::vector<baselines::DrExample> dr_examples(const Corpus& corpus, const features::FeatureScaler& scaler) {
  std::vector<baselines::DrExample> out;
  for (const auto& g : corpus.groups) out.push_back({scaler.transform(g.averaged), g.design});
  return out;
}

baselines::FeatureProjection fit_projection(const Corpus& corpus, std::size_t components) {
  std::vector<features::FeatureVector> members;
  for (const auto& g : corpus.groups) members.insert(members.end(), g.members.begin(), g.members.end());
  baselines::FeatureProjection p;
  p.scaler = features::FeatureScaler::fit(members);
  std::vector<baselines::Point> standardized;
  for (const auto& m : members) standardized.push_back(p.scaler.transform(m));
  p.pca = baselines::Pca::fit(standardized, components);
  return p;
}

TrainedModels train_models(const ExperimentConfig& config, const Corpus& corpus) {
  TrainedModels m;
  m.scaler = fit_group_scaler(corpus);

  core::NamsTrainConfig nt = config.nams_train;
  nt.seed = derive_seed(config.seed, "nams.train");
  m.nams = core::NamsModel(config.nams, config.space, derive_seed(config.seed, "nams.init"));
  auto ne = nams_examples(corpus, m.scaler);
  m.nams_report = core::train_nams(m.nams, ne, nt);

  baselines::DrConfig dc = config.dr;
  dc.seed = derive_seed(config.seed, "dr.train");
  m.dr = baselines::DrModel(features::layout::kDim, config.space, dc.hidden, derive_seed(config.seed, "dr.init"));
  auto de = dr_examples(corpus, m.scaler);
  m.dr_report = baselines::train_dr(m.dr, de, dc);

  m.projection = fit_projection(corpus, config.pca_components);
  return m;
}

const MethodResult& TrialResult::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw InvalidArgument("trial " + std::to_string(trial) + " has no method '" + name + "'");
}

double top_n_mass(std::span<const double> dist, const std::vector<sim::RankedTexture>& ranking, int n) {
  double mass = 0.0;
  for (int i = 0; i < n && i < static_cast<int>(ranking.size()); ++i) {
    mass += dist[static_cast<std::size_t>(ranking[static_cast<std::size_t>(i)].id)];
  }
  return mass;
}

namespace {

void empirical(const core::DesignPopulation& pop, const sim::DesignSpace& space, MethodResult& out) {
  out.flat.assign(static_cast<std::size_t>(space.flat_count), 0.0);
  out.sloped.assign(static_cast<std::size_t>(space.sloped_count), 0.0);
  const double w = 1.0 / static_cast<double>(pop.size());
  for (const auto& e : pop.entries) {
    out.flat[static_cast<std::size_t>(e.design.flat)] += w;
    out.sloped[static_cast<std::size_t>(e.design.sloped)] += w;
  }
}

MethodResult uniform_method(const ExperimentConfig& config, std::uint64_t seed) {
  MethodResult r;
  r.method = "uniform";
  r.flat.assign(static_cast<std::size_t>(config.space.flat_count), 1.0 / config.space.flat_count);
  r.sloped.assign(static_cast<std::size_t>(config.space.sloped_count), 1.0 / config.space.sloped_count);
  Rng rng(seed);
  for (int i = 0; i < config.target_groups; ++i) {
    r.population.entries.push_back(
        {sim::sample_uniform_discrete(config.space, rng), core::PopulationSource::Sampled, 0.0});
  }
  return r;
}

}  // namespace

InferenceReport run_inference_experiment(const std::string& name, const ExperimentConfig& config,
                                         const TrainedModels& models, sim::BankId target_bank,
                                         SimCallCounter& counter) {
  InferenceReport report;
  report.experiment = name;
  const sim::TextureBank in_bank = sim::make_bank(sim::BankId::InDomain, config.space);
  const sim::Simulator target_sim(sim::make_bank(target_bank, config.space));
  const sim::Simulator ms2_sim = make_simulator(config, sim::BankId::InDomain, &counter, Phase::Ms2Search);

  for (int t = 0; t < config.trials; ++t) {
    TrialResult trial;
    trial.trial = t;
    trial.bank = target_bank;
    Rng trial_rng(derive_seed(config.seed, name + ".target", static_cast<std::uint64_t>(t)));
    trial.target = sim::sample_uniform_discrete(config.space, trial_rng);
    for (int g = 0; g < config.target_groups; ++g) trial.target_groups.push_back(render_group(target_sim, trial.target, trial_rng));

    std::vector<features::FeatureVector> scaled;
    for (const auto& g : trial.target_groups) scaled.push_back(models.scaler.transform(g.averaged));

    trial.methods.push_back(uniform_method(config, derive_seed(config.seed, name + ".uniform", t)));

    MethodResult dr;
    dr.method = "dr";
    for (const auto& f : scaled) {
      dr.population.entries.push_back({baselines::infer_dr(models.dr, f), core::PopulationSource::Direct, 0.0});
    }
    empirical(dr.population, config.space, dr);
    trial.methods.push_back(std::move(dr));

    std::vector<baselines::Point> points;
    for (const auto& g : trial.target_groups)
      for (const auto& m : g.members) points.push_back(models.projection(m));
    baselines::Ms2Search search(ms2_sim, models.projection, std::move(points), config.ms2,
                                derive_seed(config.seed, name + ".ms2", t));
    trial.ms2_trace = search.run();
    MethodResult ms2;
    ms2.method = "ms2";
    ms2.flat = search.flat_probabilities();
    ms2.sloped = search.sloped_probabilities();
    ms2.population = search.sample_population(static_cast<std::size_t>(config.target_groups),
                                              derive_seed(config.seed, name + ".ms2.sample", t));
    trial.methods.push_back(std::move(ms2));

    MethodResult nams;
    nams.method = "nams";
    nams.population = core::infer_population(models.nams, scaled, config.search, config.rejection,
                                             derive_seed(config.seed, name + ".nams", t));
    empirical(nams.population, config.space, nams);
    trial.methods.push_back(std::move(nams));

    const sim::TextureBank& tbank = target_sim.bank();
    for (sim::Family fam : {sim::Family::Flat, sim::Family::Sloped}) {
      const auto ranking =
          sim::texture_similarity_rank(sim::texture_swatch(tbank, fam, trial.target.get(fam)), in_bank, fam);
      for (const auto& m : trial.methods) {
        const auto& dist = fam == sim::Family::Flat ? m.flat : m.sloped;
        report.rows.push_back({name, t, m.method, fam == sim::Family::Flat ? "flat" : "sloped",
                               trial.target.get(fam), top_n_mass(dist, ranking, 1), top_n_mass(dist, ranking, 3),
                               top_n_mass(dist, ranking, 10)});
      }
    }
    report.trials.push_back(std::move(trial));
  }
  return report;
}

InferenceReport run_e1(const ExperimentConfig& config, const TrainedModels& models, SimCallCounter& counter) {
  return run_inference_experiment("e1", config, models, sim::BankId::InDomain, counter);
}

InferenceReport run_e2(const ExperimentConfig& config, const TrainedModels& models, SimCallCounter& counter) {
  return run_inference_experiment("e2", config, models, sim::BankId::HeldOut, counter);
}

double InferenceReport::accuracy(int trial, const std::string& method, const std::string& family, int n_top) const {
  for (const auto& r : rows) {
    if (r.trial == trial && r.method == method && r.family == family) {
      if (n_top == 1) return r.top1;
      if (n_top == 3) return r.top3;
      if (n_top == 10) return r.top10;
      throw InvalidArgument("accuracy: n_top must be 1, 3 or 10");
    }
  }
  throw InvalidArgument("accuracy: no row for trial " + std::to_string(trial) + " method " + method);
}

double InferenceReport::mean_accuracy(const std::string& method, const std::string& family, int n_top) const {
  if (trials.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trials) s += accuracy(t.trial, method, family, n_top);
  return s / static_cast<double>(trials.size());
}

std::vector<IoURow> run_downstream(const ExperimentConfig& config, const InferenceReport& report,
                                   SimCallCounter& counter) {
  const auto& ds = config.downstream;
  const sim::Simulator train_sim = make_simulator(config, sim::BankId::InDomain, &counter, Phase::Downstream);

  core::DesignPopulation source;
  {
    Rng rng(derive_seed(config.seed, "downstream.source"));
    for (int i = 0; i < ds.source_designs; ++i) {
      source.entries.push_back({sim::sample_uniform_discrete(config.space, rng), core::PopulationSource::Sampled, 0.0});
    }
  }

  struct Tally {
    downstream::IoUCounts counts;
    std::size_t tiles = 0;
    std::uint64_t sim_calls = 0;
  };
  std::vector<IoURow> rows;
  for (int seed = 0; seed < ds.seeds; ++seed) {
    std::map<std::string, Tally> tally;
    for (const auto& trial : report.trials) {
      const auto t = static_cast<std::uint64_t>(trial.trial);
      const std::uint64_t st = static_cast<std::uint64_t>(seed) * report.trials.size() + t;
      const sim::Simulator target_sim(sim::make_bank(trial.bank, config.space));
      // Ground truth renders come from the target's own bank, which is also
      // what the evaluation tiles use.
      const sim::Simulator gt_sim = make_simulator(config, trial.bank, &counter, Phase::Downstream);

      // The evaluation tiles depend on the trial only, so every seed scores the same pixels.
      std::vector<sim::SimOutput> eval;
      Rng eval_rng(derive_seed(config.seed, "downstream.eval", t));
      for (int i = 0; i < ds.target_tiles; ++i) eval.push_back(target_sim(trial.target, eval_rng.next_u64()));

      const std::uint64_t pixel_seed = derive_seed(config.seed, "downstream.pixels", st);
      downstream::PixelDataset source_pixels = downstream::build_training_set(source, train_sim, ds.sample, pixel_seed);

      downstream::ProxyConfig pc = ds.proxy;
      pc.seed = derive_seed(config.seed, "downstream.proxy", st);
      for (const auto& strategy : kStrategies) {
        downstream::PixelDataset data;
        if (strategy == "no_aug") {
          data = source_pixels;
        } else {
          core::DesignPopulation pop;
          if (strategy == "gt") {
            for (int i = 0; i < config.target_groups; ++i)
              pop.entries.push_back({trial.target, core::PopulationSource::Direct, 0.0});
          } else {
            pop = trial.method(strategy).population;
          }
          data = downstream::build_training_set(pop, strategy == "gt" ? gt_sim : train_sim, ds.sample, pixel_seed);
          if (ds.mix_source) {
            data.features.insert(data.features.end(), source_pixels.features.begin(), source_pixels.features.end());
            data.labels.insert(data.labels.end(), source_pixels.labels.begin(), source_pixels.labels.end());
          }
        }
        downstream::ProxyClassifier model(pc.hidden, derive_seed(config.seed, "downstream.init", st));
        downstream::train_proxy(model, data, pc);
        const downstream::IoUReport r = downstream::eval_iou(model, eval);
        Tally& acc = tally[strategy];
        acc.counts.intersection += r.counts.intersection;
        acc.counts.union_ += r.counts.union_;
        acc.counts.pixels += r.counts.pixels;
        acc.tiles += r.tiles;
        acc.sim_calls += data.sim_calls;
      }
    }
    for (const auto& strategy : kStrategies) {
      const Tally& acc = tally[strategy];
      rows.push_back({strategy, seed, downstream::iou(acc.counts), acc.tiles, acc.sim_calls});
    }
  }
  return rows;
}

std::vector<IoUSummary> summarize_iou(const std::vector<IoURow>& rows) {
  std::vector<IoUSummary> out;
  for (const auto& s : kStrategies) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.strategy == s) v.push_back(r.iou);
    if (v.empty()) continue;
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    out.push_back({s, mean, se});
  }
  return out;
}

std::pair<double, double> paired_difference(const std::vector<IoURow>& rows, const std::string& a,
                                            const std::string& b) {
  std::map<int, double> va, vb;
  for (const auto& r : rows) {
    if (r.strategy == a) va[r.seed] = r.iou;
    if (r.strategy == b) vb[r.seed] = r.iou;
  }
  std::vector<double> d;
  for (const auto& [seed, x] : va)
    if (vb.count(seed)) d.push_back(x - vb[seed]);
  if (d.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  return {mean, d.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0};
}

int crossover_domains(std::uint64_t fixed, std::uint64_t per_domain_a, std::uint64_t per_domain_b) {
  if (per_domain_b <= per_domain_a) return -1;
  // fixed + n a < n b  <=>  n > fixed / (b - a)
  return static_cast<int>(fixed / (per_domain_b - per_domain_a) + 1);
}

Accounting run_e4(const ExperimentConfig& config, const SimCallCounter& counter, std::uint64_t domains) {
  if (domains == 0) throw InvalidArgument("run_e4: need at least one domain");
  Accounting a;
  a.domains = domains;
  a.nams_fixed = counter.get(Phase::NamsTrain) + counter.get(Phase::DrTrain);
  a.nams_per_domain = counter.get(Phase::NamsInfer) / domains;
  a.dr_per_domain = counter.get(Phase::DrInfer) / domains;
  a.ms2_per_domain = counter.get(Phase::Ms2Search) / domains;
  a.configured_fixed = static_cast<std::uint64_t>(config.corpus_designs) * features::kGroupSize;
  a.configured_ms2 = static_cast<std::uint64_t>(config.ms2.iterations) * config.ms2.designs_per_step;
  a.crossover = crossover_domains(a.nams_fixed, a.nams_per_domain, a.ms2_per_domain);
  a.configured_crossover = crossover_domains(a.configured_fixed, 0, a.configured_ms2);
  return a;
}

}  // namespace nams::harness
