#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nams/baselines/dr.hpp"
#include "nams/baselines/kde.hpp"
#include "nams/baselines/ms2.hpp"
#include "nams/core/population.hpp"
#include "nams/core/training.hpp"
#include "nams/harness/config.hpp"
#include "nams/harness/corpus.hpp"
#include "nams/harness/counter.hpp"

namespace nams::harness {

/// In-domain simulator bound to one counter phase.
sim::Simulator make_simulator(const ExperimentConfig& config, sim::BankId bank, SimCallCounter* counter, Phase phase);

/// Scaler over the corpus's averaged group features.
features::FeatureScaler fit_group_scaler(const Corpus& corpus);
std::vector<core::TrainingExample> nams_examples(const Corpus& corpus, const features::FeatureScaler& scaler);
std::vector<baselines::DrExample> dr_examples(const Corpus& corpus, const features::FeatureScaler& scaler);
/// Scaler + PCA over the corpus's per-image features, used as MS2's fixed
/// feature space.
baselines::FeatureProjection fit_projection(const Corpus& corpus, std::size_t components);

/// Seeds derived from the master seed, one per named purpose.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

struct TrainedModels {
  features::FeatureScaler scaler;
  core::NamsModel nams;
  core::NamsTrainReport nams_report;
  baselines::DrModel dr;
  baselines::DrTrainReport dr_report;
  baselines::FeatureProjection projection;
};

TrainedModels train_models(const ExperimentConfig& config, const Corpus& corpus);

/// One method's answer for one target domain as a distribution over each
/// family. Populations become their empirical distributions.
struct MethodResult {
  std::string method;
  std::vector<double> flat;
  std::vector<double> sloped;
  core::DesignPopulation population;
};

struct TrialResult {
  int trial = 0;
  sim::DiscreteDesign target;
  sim::BankId bank = sim::BankId::InDomain;
  std::vector<features::FeatureGroup> target_groups;
  std::vector<MethodResult> methods;
  std::vector<baselines::Ms2Diagnostics> ms2_trace;

  const MethodResult& method(const std::string& name) const;
};

struct AccuracyRow {
  std::string experiment;
  int trial = 0;
  std::string method;
  std::string family;
  int target = 0;
  double top1 = 0.0;
  double top3 = 0.0;
  double top10 = 0.0;
};

struct InferenceReport {
  std::string experiment;
  std::vector<TrialResult> trials;
  std::vector<AccuracyRow> rows;

  /// Accuracy for one trial/method/family; n_top in {1, 3, 10}.
  double accuracy(int trial, const std::string& method, const std::string& family, int n_top) const;
  /// Mean of accuracy() over trials.
  double mean_accuracy(const std::string& method, const std::string& family, int n_top) const;
};

/// Probability mass on the n nearest in-domain textures to the target
/// texture of `family`, ranked by HSV patch distance.
double top_n_mass(std::span<const double> dist, const std::vector<sim::RankedTexture>& ranking, int n);

/// Runs uniform, DR, MS2 and NAMS on `config.trials` target domains rendered
/// from `target_bank`. Target renders are not counted: they stand in for
/// observed imagery.
InferenceReport run_inference_experiment(const std::string& name, const ExperimentConfig& config,
                                         const TrainedModels& models, sim::BankId target_bank,
                                         SimCallCounter& counter);
InferenceReport run_e1(const ExperimentConfig& config, const TrainedModels& models, SimCallCounter& counter);
InferenceReport run_e2(const ExperimentConfig& config, const TrainedModels& models, SimCallCounter& counter);

struct IoURow {
  std::string strategy;
  int seed = 0;
  double iou = 0.0;
  std::size_t n_tiles = 0;
  std::uint64_t sim_calls = 0;
};

inline const std::vector<std::string> kStrategies{"no_aug", "uniform", "dr", "ms2", "nams", "gt"};

/// For every seed, trains one proxy per strategy and trial on tiles from that
/// strategy's designs and scores it on fresh tiles of the trial's target
/// design. One row per (strategy, seed); IoU is pooled over all trials' tiles.
std::vector<IoURow> run_downstream(const ExperimentConfig& config, const InferenceReport& report,
                                   SimCallCounter& counter);

struct IoUSummary {
  std::string strategy;
  double mean = 0.0;
  double stderr_ = 0.0;
};
std::vector<IoUSummary> summarize_iou(const std::vector<IoURow>& rows);
/// Mean and standard error of the per-seed difference a - b.
std::pair<double, double> paired_difference(const std::vector<IoURow>& rows, const std::string& a,
                                            const std::string& b);

struct Accounting {
  std::uint64_t domains = 0;
  std::uint64_t nams_fixed = 0;       // corpus simulations shared by NAMS and DR
  std::uint64_t nams_per_domain = 0;  // measured inference simulations per domain
  std::uint64_t dr_per_domain = 0;
  std::uint64_t ms2_per_domain = 0;
  std::uint64_t configured_fixed = 0;       // designs x 9
  std::uint64_t configured_ms2 = 0;         // T x N
  int crossover = 0;             // from measured counts
  int configured_crossover = 0;  // from configured budgets
};

/// Smallest N_d >= 1 with fixed + N_d * per_domain_a < N_d * per_domain_b;
/// -1 when a never undercuts b.
int crossover_domains(std::uint64_t fixed, std::uint64_t per_domain_a, std::uint64_t per_domain_b);

Accounting run_e4(const ExperimentConfig& config, const SimCallCounter& counter, std::uint64_t domains);

}  // namespace nams::harness
